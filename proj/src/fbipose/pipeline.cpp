#include "fbipose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

using json = nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename R>
std::vector<R> strict(Dataset<R> d, const std::string& path) {
  if (!d.errors.empty()) {
    const auto& e = d.errors.front();
    fail(ErrorCode::kParse, path + ":" + std::to_string(e.line) + ": " + e.message + " (" +
                                std::to_string(d.errors.size()) + " malformed line(s))");
  }
  return std::move(d.records);
}

json summary_json(const EvalSummary& s) {
  return {{"count", s.count},
          {"mpjpe_p1_mm", s.mpjpe_p1},
          {"mpjpe_p2_mm", s.mpjpe_p2},
          {"fbi_correctness", s.fbi_correctness ? json(*s.fbi_correctness) : json(nullptr)}};
}

json histogram_json(const AngleHistogram& h) {
  return {{"edges_deg", h.edges}, {"counts", h.counts}, {"percentages", h.percentages}, {"total", h.total}};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

LiftOptions lift_options(const LiftFileOptions& o, const SyntheticSample& s) {
  LiftOptions lo;
  if (o.use_record_scale) lo.scale = s.scale;
  lo.spine_sign = o.spine_sign;
  lo.uncertain_policy = o.policy;
  return lo;
}

json lift_json(const LiftResult& r) {
  return {{"scale_used", r.scale_used}, {"ambiguous_edges", r.ambiguous_edges}, {"radicand_clamps", r.radicand_clamps}};
}

}  // namespace

std::vector<SyntheticSample> make_synthetic(const SynthOptions& o) {
  if (o.mirrored_pairs && o.count % 2 != 0) {
    fail(ErrorCode::kInvalidArgument, "mirrored pairs need an even record count");
  }
  if (!(o.pixel_noise >= 0.0)) fail(ErrorCode::kInvalidArgument, "pixel noise must be >= 0");
  std::vector<SyntheticSample> out;
  out.reserve(o.count);
  const std::size_t draws = o.mirrored_pairs ? o.count / 2 : o.count;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::uint64_t seed = mix_seed(o.seed, i);
    const SyntheticDraw draw = generate_synthetic_draw(seed, o.config);
    Pose2D pose2d = project(draw.pose, draw.camera);
    if (o.pixel_noise > 0.0) {
      std::mt19937_64 rng(mix_seed(seed, 1));
      std::normal_distribution<double> noise(0.0, o.pixel_noise);
      for (auto& p : pose2d.joints) {
        const double dx = noise(rng);
        const double dy = noise(rng);
        p += Vec2(dx, dy);
      }
    }
    std::vector<Pose3D> variants{draw.pose};
    if (o.mirrored_pairs) variants.push_back(depth_mirror(draw.pose));
    for (std::size_t v = 0; v < variants.size(); ++v) {
      SyntheticSample s;
      s.id = o.id_prefix + std::to_string(i) + (o.mirrored_pairs ? (v == 0 ? "a" : "b") : "");
      s.pose2d = pose2d;
      s.fbi = convert_pose_to_fbi(variants[v], o.alpha).labels;
      s.probs = simulate_fbi_probabilities(variants[v], o.alpha, o.concentration, mix_seed(seed, 2 + v));
      s.scale = draw.camera.scale;
      s.seed = seed;
      s.alpha = o.alpha;
      s.action = draw.action;
      if (!o.weak) s.pose3d = variants[v];
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TrainingSample> to_training_samples(const std::vector<SyntheticSample>& samples) {
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    TrainingSample t;
    t.id = s.id;
    t.input = make_input(s.pose2d, s.probs, true);
    t.labels = s.fbi;
    if (s.pose3d) {
      const Pose3D rel = root_relative(*s.pose3d);
      Eigen::VectorXd y(kPoseWidth);
      for (int j = 0; j < kNumJoints; ++j) y.segment<3>(3 * j) = rel.joints[static_cast<std::size_t>(j)];
      t.target = std::move(y);
    }
    out.push_back(std::move(t));
  }
  return out;
}

Pose3D pose_from_vector(const Eigen::VectorXd& v) {
  if (v.size() != kPoseWidth) fail(ErrorCode::kInvalidArgument, "pose vectors hold 48 values");
  Pose3D p;
  p.joints.resize(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) p.joints[static_cast<std::size_t>(j)] = v.segment<3>(3 * j);
  return p;
}

json EvalReport::to_json() const {
  json actions = json::object();
  for (const auto& [name, s] : per_action) actions[name] = summary_json(s);
  return {{"aggregate", summary_json(aggregate)}, {"per_action", actions}, {"uncertain_histogram", histogram_json(histogram)}};
}

std::string EvalReport::to_csv() const {
  std::string out = "group,count,mpjpe_p1_mm,mpjpe_p2_mm,fbi_correctness\n";
  auto row = [&out](const std::string& g, const EvalSummary& s) {
    out += g + "," + std::to_string(s.count) + "," + fmt(s.mpjpe_p1) + "," + fmt(s.mpjpe_p2) + "," +
           fmt(s.fbi_correctness) + "\n";
  };
  row("all", aggregate);
  for (const auto& [name, s] : per_action) row(name, s);
  return out;
}

EvalReport evaluate(const RegressorParams<float>& params, const std::vector<SyntheticSample>& test,
                    const EvalOptions& options) {
  std::vector<SyntheticSample> usable;
  for (const auto& s : test) {
    if (s.pose3d) usable.push_back(s);
  }
  if (usable.empty()) fail(ErrorCode::kEmptyDataset, "no test records with 3D ground truth");
  const auto predictions = predict(params, to_training_samples(usable));

  struct Acc {
    std::size_t n = 0;
    double p1 = 0.0, p2 = 0.0;
    FbiCorrectness fbi;
  };
  Acc all;
  std::map<std::string, Acc> groups;
  std::vector<Pose3D> gts;
  std::vector<FbiMatrix> gt_labels;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const Pose3D gt = root_relative(*usable[i].pose3d);
    const Pose3D pred = pose_from_vector(predictions[i]);
    const double p1 = mpjpe_p1(pred, gt);
    const double p2 = mpjpe_p2(pred, gt, options.procrustes_scale);
    const FbiCorrectness c = fbi_correctness({pred}, {usable[i].fbi}, options.alpha);
    for (Acc* a : {&all, &groups[usable[i].action.empty() ? "unlabelled" : usable[i].action]}) {
      ++a->n;
      a->p1 += p1;
      a->p2 += p2;
      a->fbi.matched += c.matched;
      a->fbi.clear += c.clear;
    }
    gts.push_back(gt);
    gt_labels.push_back(usable[i].fbi);
  }
  auto summarise = [](const Acc& a) {
    EvalSummary s;
    s.count = a.n;
    s.mpjpe_p1 = a.p1 / static_cast<double>(a.n);
    s.mpjpe_p2 = a.p2 / static_cast<double>(a.n);
    if (a.fbi.clear > 0) s.fbi_correctness = a.fbi.ratio();
    return s;
  };
  EvalReport r;
  r.aggregate = summarise(all);
  for (const auto& [name, a] : groups) r.per_action.emplace_back(name, summarise(a));
  r.histogram = uncertain_angle_histogram(gts, gt_labels, options.bucket_deg);
  return r;
}

json SweepResult::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    pts.push_back({{"alpha", p.alpha},
                   {"mpjpe_p1_mm", p.mpjpe_p1},
                   {"mpjpe_p2_mm", p.mpjpe_p2},
                   {"fbi_correctness", p.fbi_correctness ? json(*p.fbi_correctness) : json(nullptr)}});
  }
  return {{"points", pts},
          {"best_alpha", points.empty() ? json(nullptr) : json(points[best].alpha)},
          {"interior_optimum", interior_optimum()}};
}

std::string SweepResult::to_csv() const {
  std::string out = "alpha,mpjpe_p1_mm,mpjpe_p2_mm,fbi_correctness\n";
  for (const auto& p : points) {
    out += fmt(p.alpha) + "," + fmt(p.mpjpe_p1) + "," + fmt(p.mpjpe_p2) + "," + fmt(p.fbi_correctness) + "\n";
  }
  return out;
}

SweepResult sweep_alpha(const SweepOptions& options) {
  if (options.alphas.empty()) fail(ErrorCode::kInvalidArgument, "no threshold angles to sweep");
  SweepResult result;
  for (double alpha : options.alphas) {
    SynthOptions train;
    train.count = options.train_count;
    train.seed = options.seed;
    train.alpha = alpha;
    train.concentration = options.concentration;
    train.id_prefix = "train";
    SynthOptions test = train;
    test.count = options.test_count;
    test.seed = mix_seed(options.seed, 0x7e57);
    test.id_prefix = "test";

    const auto model = train_supervised(to_training_samples(make_synthetic(train)), options.train);
    const auto report = evaluate(model.params, make_synthetic(test), EvalOptions{alpha, true, 10.0});
    result.points.push_back({alpha, report.aggregate.mpjpe_p1, report.aggregate.mpjpe_p2, report.aggregate.fbi_correctness});
  }
  for (std::size_t i = 1; i < result.points.size(); ++i) {
    if (result.points[i].mpjpe_p1 < result.points[result.best].mpjpe_p1) result.best = i;
  }
  return result;
}

json CorpusStats::to_json() const {
  return {{"poses", poses},
          {"uncertain_fraction", uncertain_fraction},
          {"uncertain_histogram", histogram_json(histogram)},
          {"degenerate_bones", degenerate_bones}};
}

CorpusStats corpus_statistics(const std::vector<Pose3D>& poses, double alpha, double bucket_deg) {
  if (poses.empty()) fail(ErrorCode::kEmptyDataset, "no poses");
  CorpusStats s;
  s.poses = poses.size();
  s.degenerate_bones.assign(kNumFbiBones, 0);
  std::vector<FbiMatrix> labels;
  labels.reserve(poses.size());
  for (const auto& p : poses) {
    auto c = convert_pose_to_fbi(p, alpha);
    for (int b : c.degenerate_bones) ++s.degenerate_bones[static_cast<std::size_t>(b)];
    labels.push_back(c.labels);
  }
  s.uncertain_fraction = fbipose::uncertain_fraction(labels);
  s.histogram = uncertain_angle_histogram(poses, labels, bucket_deg);
  return s;
}

json run_synth(const SynthOptions& options, const std::string& out_path) {
  const auto samples = make_synthetic(options);
  write_synthetic(samples, out_path);
  return {{"records", samples.size()}, {"alpha", options.alpha}, {"out", out_path}};
}

json run_convert_fbi(const std::string& pose3d_path, const std::string& out_path, double alpha) {
  const auto records = strict(read_pose3d(pose3d_path), pose3d_path);
  std::vector<AnnotationRecord> out;
  out.reserve(records.size());
  std::size_t degenerate = 0;
  const std::int64_t now = now_utc_ms();
  std::ostringstream who;
  who << "convert:alpha=" << alpha;
  for (const auto& r : records) {
    auto c = convert_pose_to_fbi(r.pose, alpha);
    degenerate += c.degenerate_bones.size();
    AnnotationRecord a;
    a.task_id = r.id;
    a.image_ref = r.id;
    a.annotator_id = who.str();
    a.labels = c.labels;
    a.created_at = now;
    out.push_back(std::move(a));
  }
  write_annotations(out, out_path);
  json summary = {{"records", out.size()}, {"alpha", alpha}, {"degenerate_bones", degenerate}, {"out", out_path}};
  if (!out.empty()) summary["uncertain_fraction"] = uncertain_fraction(out);
  return summary;
}

json run_lift(const std::string& synthetic_path, const std::string& out_path, const LiftFileOptions& options) {
  const auto records = strict(read_synthetic(synthetic_path), synthetic_path);
  const BoneLengthPrior priors = options.priors.value_or(BoneLengthPrior::standard());
  std::vector<Pose3DRecord> out;
  long clamps = 0;
  for (const auto& s : records) {
    const LiftResult r = lift(s.pose2d, s.fbi, priors, lift_options(options, s));
    clamps += r.radicand_clamps;
    out.push_back({s.id, r.pose, s.action});
  }
  write_pose3d(out, out_path);
  return {{"records", out.size()}, {"radicand_clamps", clamps}, {"out", out_path}};
}

json run_enumerate(const std::string& synthetic_path, const std::string& record_id, const std::string& out_path,
                   const LiftFileOptions& options, int max_uncertain) {
  const auto records = strict(read_synthetic(synthetic_path), synthetic_path);
  auto it = std::find_if(records.begin(), records.end(), [&](const SyntheticSample& s) { return s.id == record_id; });
  if (it == records.end()) fail(ErrorCode::kNotFound, "no record '" + record_id + "' in " + synthetic_path);
  EnumerateOptions eo;
  if (options.use_record_scale) eo.scale = it->scale;
  eo.spine_sign = options.spine_sign;
  eo.max_uncertain = max_uncertain;
  const auto candidates = enumerate_lifts(it->pose2d, it->fbi, options.priors.value_or(BoneLengthPrior::standard()), eo);
  std::vector<Pose3DRecord> out;
  json details = json::array();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out.push_back({record_id + "#" + std::to_string(c), candidates[c].pose, it->action});
    details.push_back(lift_json(candidates[c]));
  }
  write_pose3d(out, out_path);
  return {{"candidates", out.size()},
          {"ambiguous_edges", candidates.empty() ? json::array() : json(candidates.front().ambiguous_edges)},
          {"out", out_path}};
}

json run_train(const std::string& train_path, const TrainConfig& config, const std::string& checkpoint_out,
               bool pretrain_head) {
  const auto samples = to_training_samples(strict(read_synthetic(train_path), train_path));
  TrainResult result = train_supervised(samples, config);
  json summary = {{"records", samples.size()},
                  {"iterations", config.iterations},
                  {"final_train_loss", result.history.train.empty() ? json(nullptr) : json(result.history.train.back())},
                  {"final_validation_loss",
                   result.history.validation.empty() ? json(nullptr) : json(result.history.validation.back())}};
  if (pretrain_head) {
    const auto head = pretrain_fbi_head(result.params, samples, config);
    summary["head_final_loss"] = head.train.empty() ? json(nullptr) : json(head.train.back());
  }
  Checkpoint ck;
  ck.params = result.params;
  ck.config = config.to_json();
  ck.seed = config.seed;
  ck.meta = {{"stage", "supervised"},
             {"train_loss", result.history.train},
             {"validation_loss", result.history.validation},
             {"head_pretrained", pretrain_head}};
  save_checkpoint(ck, checkpoint_out);
  summary["checkpoint"] = checkpoint_out;
  return summary;
}

json run_finetune_weak(const std::string& checkpoint_in, const std::string& weak_path,
                       const std::string& supervised_path, const TrainConfig& config,
                       const std::string& checkpoint_out) {
  Checkpoint ck = load_checkpoint(checkpoint_in);
  auto weak_records = strict(read_synthetic(weak_path), weak_path);
  for (auto& r : weak_records) r.pose3d.reset();
  const auto weak = to_training_samples(weak_records);
  std::vector<TrainingSample> supervised;
  if (!supervised_path.empty()) supervised = to_training_samples(strict(read_synthetic(supervised_path), supervised_path));
  const double before = weak_fbi_loss(ck.params, weak, config);
  TrainResult result = finetune_weak(ck.params, weak, supervised, config);
  const double after = weak_fbi_loss(result.params, weak, config);
  ck.params = result.params;
  ck.meta["stage"] = "weak";
  ck.meta["weak_loss_before"] = before;
  ck.meta["weak_loss_after"] = after;
  ck.config = config.to_json();
  save_checkpoint(ck, checkpoint_out);
  return {{"weak_records", weak.size()},
          {"supervised_records", supervised.size()},
          {"weak_loss_before", before},
          {"weak_loss_after", after},
          {"checkpoint", checkpoint_out}};
}

json run_eval(const std::string& checkpoint, const std::string& test_path, const EvalOptions& options,
              const std::string& csv_out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto report = evaluate(ck.params, strict(read_synthetic(test_path), test_path), options);
  if (!csv_out.empty()) {
    std::ofstream out(csv_out, std::ios::trunc);
    out << report.to_csv();
    if (!out) fail(ErrorCode::kIo, "failed writing " + csv_out);
  }
  return report.to_json();
}

json run_sweep_alpha(const SweepOptions& options, const std::string& csv_out) {
  const auto result = sweep_alpha(options);
  if (!csv_out.empty()) {
    std::ofstream out(csv_out, std::ios::trunc);
    out << result.to_csv();
    if (!out) fail(ErrorCode::kIo, "failed writing " + csv_out);
  }
  return result.to_json();
}

json run_hist(const std::string& path, double alpha, double bucket_deg) {
  std::ifstream probe(path);
  if (!probe) fail(ErrorCode::kIo, "cannot open " + path);
  std::string header;
  std::getline(probe, header);
  std::vector<Pose3D> poses;
  if (header.find("synthetic-sample/") != std::string::npos) {
    for (auto& s : strict(read_synthetic(path), path)) {
      if (s.pose3d) poses.push_back(std::move(*s.pose3d));
    }
  } else {
    for (auto& r : strict(read_pose3d(path), path)) poses.push_back(std::move(r.pose));
  }
  return corpus_statistics(poses, alpha, bucket_deg).to_json();
}

json run_export(const std::string& log_path, const std::optional<std::string>& annotator, const std::string& out_path) {
  auto records = strict(read_annotations(log_path), log_path);
  std::vector<AnnotationRecord> out;
  for (auto& r : records) {
    if (!annotator || r.annotator_id == *annotator) out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.task_id < b.task_id;
  });
  write_annotations(out, out_path);
  return {{"records", out.size()}, {"out", out_path}};
}

std::vector<TaskDefinition> load_task_stream(const std::string& tasks_path, const std::string& gold_path,
                                             double gold_fraction, std::uint64_t seed) {
  std::vector<TaskDefinition> tasks;
  if (!tasks_path.empty()) {
    for (auto& r : strict(read_pose2d(tasks_path), tasks_path)) {
      TaskDefinition t;
      t.task_id = r.id;
      t.image_ref = r.image_ref.empty() ? r.id : r.image_ref;
      t.pose2d = std::move(r.pose);
      tasks.push_back(std::move(t));
    }
  }
  std::vector<TaskDefinition> gold;
  if (!gold_path.empty()) {
    for (auto& s : strict(read_synthetic(gold_path), gold_path)) {
      TaskDefinition t;
      t.task_id = s.id;
      t.image_ref = "synthetic:" + s.id;
      t.pose2d = std::move(s.pose2d);
      t.is_gold = true;
      t.gold_fbi = s.fbi;
      gold.push_back(std::move(t));
    }
  }
  if (gold.empty()) return mix_gold(tasks, gold, 0.0, seed);
  return mix_gold(tasks, gold, gold_fraction, seed);
}

}  // namespace fbipose
