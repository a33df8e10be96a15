#include "fbipose/fbipose.h"

#include <cstring>
#include <memory>
#include <string>

#include "fbipose/checkpoint.hpp"
#include "fbipose/error.hpp"
#include "fbipose/hub.hpp"
#include "fbipose/lifting.hpp"
#include "fbipose/losses.hpp"
#include "fbipose/metrics.hpp"
#include "fbipose/pipeline.hpp"

struct fbi_text {
  std::string data;
};

struct fbi_lift_set {
  std::vector<fbipose::LiftResult> results;
};

struct fbi_regressor {
  fbipose::RegressorParams<float> params;
};

struct fbi_hub {
  std::unique_ptr<fbipose::AnnotationHub> hub;
  std::unique_ptr<fbipose::HubServer> server;
};

namespace {

using namespace fbipose;
using json = nlohmann::json;

thread_local std::string g_last_error;

fbi_status set_error(fbi_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

template <typename F>
fbi_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return FBI_OK;
  } catch (const Error& e) {
    return set_error(static_cast<fbi_status>(static_cast<int>(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(FBI_E_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(FBI_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(FBI_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(FBI_E_INTERNAL, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

Pose3D read_pose3d(const double* p) {
  need(p, "pose3d");
  Pose3D out;
  out.joints.resize(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) out.joints[static_cast<std::size_t>(j)] = Vec3(p[3 * j], p[3 * j + 1], p[3 * j + 2]);
  return out;
}

Pose2D read_pose2d(const double* p) {
  need(p, "pose2d");
  Pose2D out;
  out.joints.resize(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) out.joints[static_cast<std::size_t>(j)] = Vec2(p[2 * j], p[2 * j + 1]);
  return out;
}

void write_pose3d(const Pose3D& pose, double* out) {
  need(out, "output pose");
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3& v = pose.joints[static_cast<std::size_t>(j)];
    out[3 * j] = v.x();
    out[3 * j + 1] = v.y();
    out[3 * j + 2] = v.z();
  }
}

FbiMatrix read_labels(const uint8_t* l) {
  need(l, "labels");
  FbiMatrix m{};
  for (int b = 0; b < kNumFbiBones; ++b) m[static_cast<std::size_t>(b)] = fbi_status_from_int(l[b]);
  return m;
}

FbiProbRows read_probs(const double* p) {
  need(p, "probabilities");
  FbiProbRows rows;
  std::memcpy(rows.data(), p, sizeof(double) * kProbWidth);
  return rows;
}

BoneLengthPrior read_lengths(const double* l) {
  if (l == nullptr) return BoneLengthPrior::standard();
  BoneLengthPrior prior;
  for (int e = 0; e < kNumTreeEdges; ++e) prior.lengths[static_cast<std::size_t>(e)] = l[e];
  prior.validate();
  return prior;
}

UncertainPolicy read_policy(int p) {
  switch (p) {
    case FBI_UNCERTAIN_DEFAULT_FORWARD: return UncertainPolicy::kDefaultForward;
    case FBI_UNCERTAIN_DEFAULT_BACKWARD: return UncertainPolicy::kDefaultBackward;
    case FBI_UNCERTAIN_ZERO_CLAMP: return UncertainPolicy::kZeroClamp;
    default: fail(ErrorCode::kInvalidArgument, "unknown uncertain policy " + std::to_string(p));
  }
}

std::optional<int> read_spine(int s) {
  if (s == 0) return std::nullopt;
  if (s != 1 && s != -1) fail(ErrorCode::kInvalidArgument, "spine sign must be +1, -1 or 0");
  return s;
}

void emit(fbi_text** out, std::string text) {
  if (out == nullptr) return;
  *out = new fbi_text{std::move(text)};
}

void emit(fbi_text** out, const json& j) {
  if (out == nullptr) return;
  emit(out, j.dump());
}

std::string str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

TrainConfig read_config(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') return TrainConfig{};
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("training config is not JSON: ") + e.what());
  }
  return TrainConfig::from_json(j);
}

LiftFileOptions read_file_options(const fbi_lift_file_options* o) {
  LiftFileOptions out;
  if (o == nullptr) return out;
  out.use_record_scale = o->use_record_scale != 0;
  out.spine_sign = read_spine(o->spine_sign);
  out.policy = read_policy(o->uncertain_policy);
  if (o->priors_json != nullptr) {
    out.priors = BoneLengthPrior::from_json(json::parse(o->priors_json), SkeletonTopology::standard());
  }
  return out;
}

}  // namespace

extern "C" {

const char* fbi_version(void) { return "1.0.0"; }

const char* fbi_status_name(fbi_status status) {
  static thread_local std::string name;
  name = std::string(to_string(static_cast<ErrorCode>(static_cast<int>(status))));
  return name.c_str();
}

const char* fbi_last_error(void) { return g_last_error.c_str(); }

const char* fbi_text_data(const fbi_text* text) { return text == nullptr ? "" : text->data.c_str(); }
size_t fbi_text_size(const fbi_text* text) { return text == nullptr ? 0 : text->data.size(); }
void fbi_text_free(fbi_text* text) { delete text; }

fbi_status fbi_topology_json(fbi_text** out) {
  return guard([&] {
    need(out, "out");
    emit(out, SkeletonTopology::standard().to_json());
  });
}

fbi_status fbi_default_bone_lengths(double* lengths15) {
  return guard([&] {
    need(lengths15, "lengths");
    const auto prior = BoneLengthPrior::standard();
    for (int e = 0; e < kNumTreeEdges; ++e) lengths15[e] = prior.lengths[static_cast<std::size_t>(e)];
  });
}

fbi_status fbi_out_of_plane_angle(const double* pose3d, int bone, double* angle_deg) {
  return guard([&] {
    need(angle_deg, "angle_deg");
    if (bone < 0 || bone >= kNumFbiBones) fail(ErrorCode::kInvalidArgument, "bone index out of range");
    *angle_deg = out_of_plane_angle(read_pose3d(pose3d), bone);
  });
}

fbi_status fbi_convert_pose(const double* pose3d, double alpha_deg, uint8_t* labels14, int* degenerate_count) {
  return guard([&] {
    need(labels14, "labels");
    const auto c = convert_pose_to_fbi(read_pose3d(pose3d), alpha_deg);
    for (int b = 0; b < kNumFbiBones; ++b) labels14[b] = static_cast<uint8_t>(c.labels[static_cast<std::size_t>(b)]);
    if (degenerate_count != nullptr) *degenerate_count = static_cast<int>(c.degenerate_bones.size());
  });
}

void fbi_lift_options_init(fbi_lift_options* options) {
  if (options == nullptr) return;
  options->scale = 0.0;
  options->spine_sign = 0;
  options->uncertain_policy = FBI_UNCERTAIN_ZERO_CLAMP;
  options->cx = 0.0;
  options->cy = 0.0;
}

fbi_status fbi_project(const double* pose3d, double scale, double cx, double cy, double* pose2d_out) {
  return guard([&] {
    need(pose2d_out, "pose2d_out");
    if (!(scale > 0.0)) fail(ErrorCode::kInvalidArgument, "scale must be > 0");
    const Pose2D p = project(read_pose3d(pose3d), ScaledOrthoCamera{scale, Vec2(cx, cy)});
    for (int j = 0; j < kNumJoints; ++j) {
      pose2d_out[2 * j] = p.joints[static_cast<std::size_t>(j)].x();
      pose2d_out[2 * j + 1] = p.joints[static_cast<std::size_t>(j)].y();
    }
  });
}

fbi_status fbi_estimate_scale(const double* pose2d, const double* lengths15, double* scale) {
  return guard([&] {
    need(scale, "scale");
    *scale = estimate_scale(read_pose2d(pose2d), read_lengths(lengths15));
  });
}

fbi_status fbi_lift(const double* pose2d, const uint8_t* labels14, const double* lengths15,
                    const fbi_lift_options* options, double* pose3d_out, double* scale_used, int* radicand_clamps) {
  return guard([&] {
    fbi_lift_options o;
    fbi_lift_options_init(&o);
    if (options != nullptr) o = *options;
    LiftOptions lo;
    if (o.scale > 0.0) lo.scale = o.scale;
    lo.spine_sign = read_spine(o.spine_sign);
    lo.uncertain_policy = read_policy(o.uncertain_policy);
    lo.principal = Vec2(o.cx, o.cy);
    const LiftResult r = lift(read_pose2d(pose2d), read_labels(labels14), read_lengths(lengths15), lo);
    write_pose3d(r.pose, pose3d_out);
    if (scale_used != nullptr) *scale_used = r.scale_used;
    if (radicand_clamps != nullptr) *radicand_clamps = r.radicand_clamps;
  });
}

fbi_status fbi_enumerate_lifts(const double* pose2d, const uint8_t* labels14, const double* lengths15,
                               const fbi_lift_options* options, int max_uncertain, fbi_lift_set** out) {
  return guard([&] {
    need(out, "out");
    fbi_lift_options o;
    fbi_lift_options_init(&o);
    if (options != nullptr) o = *options;
    EnumerateOptions eo;
    if (o.scale > 0.0) eo.scale = o.scale;
    eo.spine_sign = read_spine(o.spine_sign);
    eo.max_uncertain = max_uncertain;
    eo.principal = Vec2(o.cx, o.cy);
    auto set = std::make_unique<fbi_lift_set>();
    set->results = enumerate_lifts(read_pose2d(pose2d), read_labels(labels14), read_lengths(lengths15), eo);
    *out = set.release();
  });
}

size_t fbi_lift_set_size(const fbi_lift_set* set) { return set == nullptr ? 0 : set->results.size(); }

fbi_status fbi_lift_set_pose(const fbi_lift_set* set, size_t index, double* pose3d_out) {
  return guard([&] {
    need(set, "set");
    if (index >= set->results.size()) fail(ErrorCode::kInvalidArgument, "candidate index out of range");
    write_pose3d(set->results[index].pose, pose3d_out);
  });
}

fbi_status fbi_lift_set_ambiguous_edges(const fbi_lift_set* set, int* edges, size_t capacity, size_t* count) {
  return guard([&] {
    need(set, "set");
    const std::vector<int> none;
    const auto& amb = set->results.empty() ? none : set->results.front().ambiguous_edges;
    if (count != nullptr) *count = amb.size();
    for (size_t i = 0; i < amb.size() && i < capacity && edges != nullptr; ++i) edges[i] = amb[i];
  });
}

void fbi_lift_set_free(fbi_lift_set* set) { delete set; }

fbi_status fbi_synthetic_pose(uint64_t seed, double* pose3d_out) {
  return guard([&] { write_pose3d(generate_synthetic_pose(seed), pose3d_out); });
}

fbi_status fbi_simulate_probabilities(const double* pose3d, double alpha_deg, double concentration, uint64_t seed,
                                      double* p_fws42, double* p_aws42) {
  return guard([&] {
    need(p_fws42, "p_fws");
    need(p_aws42, "p_aws");
    const auto p = simulate_fbi_probabilities(read_pose3d(pose3d), alpha_deg, concentration, seed);
    std::memcpy(p_fws42, p.p_fws.data(), sizeof(double) * kProbWidth);
    std::memcpy(p_aws42, p.p_aws.data(), sizeof(double) * kProbWidth);
  });
}

fbi_status fbi_focal_loss(const double* probs42, const uint8_t* labels14, double gamma, double* loss) {
  return guard([&] {
    need(loss, "loss");
    *loss = focal_fbi_loss(read_probs(probs42), read_labels(labels14), gamma);
  });
}

fbi_status fbi_fixed_weight_loss(const double* probs42, const uint8_t* labels14, double w_clear, double w_uncertain,
                                 double* loss) {
  return guard([&] {
    need(loss, "loss");
    *loss = fixed_weight_fbi_loss(read_probs(probs42), read_labels(labels14), w_clear, w_uncertain);
  });
}

fbi_status fbi_pose_l2_loss(const double* pred, const double* gt, size_t n, double* loss) {
  return guard([&] {
    need(pred, "pred");
    need(gt, "gt");
    need(loss, "loss");
    const auto len = static_cast<Eigen::Index>(n);
    *loss = pose_l2_loss(Eigen::Map<const Eigen::VectorXd>(pred, len), Eigen::Map<const Eigen::VectorXd>(gt, len));
  });
}

fbi_status fbi_mpjpe_p1(const double* pred3d, const double* gt3d, double* mm) {
  return guard([&] {
    need(mm, "mm");
    *mm = mpjpe_p1(read_pose3d(pred3d), read_pose3d(gt3d));
  });
}

fbi_status fbi_mpjpe_p2(const double* pred3d, const double* gt3d, int with_scale, double* mm) {
  return guard([&] {
    need(mm, "mm");
    *mm = mpjpe_p2(read_pose3d(pred3d), read_pose3d(gt3d), with_scale != 0);
  });
}

fbi_status fbi_procrustes_align(const double* pred3d, const double* gt3d, int with_scale, double* rotation9,
                                double* scale, double* translation3) {
  return guard([&] {
    const auto t = procrustes_align(read_pose3d(pred3d), read_pose3d(gt3d), with_scale != 0);
    if (rotation9 != nullptr) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rotation9[3 * r + c] = t.rotation(r, c);
    }
    if (scale != nullptr) *scale = t.scale;
    if (translation3 != nullptr) {
      for (int k = 0; k < 3; ++k) translation3[k] = t.translation(k);
    }
  });
}

fbi_status fbi_correctness_ratio(const double* pred3d, const uint8_t* gt_labels, size_t n, double alpha_deg,
                                 double* ratio) {
  return guard([&] {
    need(ratio, "ratio");
    if (n > 0) {
      need(pred3d, "pred3d");
      need(gt_labels, "gt_labels");
    }
    std::vector<Pose3D> poses;
    std::vector<FbiMatrix> labels;
    for (size_t i = 0; i < n; ++i) {
      poses.push_back(read_pose3d(pred3d + i * kPoseWidth));
      labels.push_back(read_labels(gt_labels + i * kNumFbiBones));
    }
    *ratio = fbipose::fbi_correctness_ratio(poses, labels, alpha_deg);
  });
}

fbi_status fbi_regressor_load(const char* checkpoint_path, fbi_regressor** out) {
  return guard([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    auto model = std::make_unique<fbi_regressor>();
    model->params = load_checkpoint(checkpoint_path).params;
    *out = model.release();
  });
}

fbi_status fbi_regressor_predict(const fbi_regressor* model, const double* pose2d, const double* p_fws42,
                                 const double* p_aws42, double* pose3d_out) {
  return guard([&] {
    need(model, "model");
    FbiProbabilities probs;
    if (p_fws42 != nullptr) probs.p_fws = read_probs(p_fws42);
    if (p_aws42 != nullptr) probs.p_aws = read_probs(p_aws42);
    TrainingSample s;
    s.id = "input";
    s.input = make_input(read_pose2d(pose2d), probs, true);
    const auto pred = predict(model->params, {s});
    write_pose3d(pose_from_vector(pred.front()), pose3d_out);
  });
}

void fbi_regressor_free(fbi_regressor* model) { delete model; }

void fbi_synth_options_init(fbi_synth_options* options) {
  if (options == nullptr) return;
  const SynthOptions d;
  options->count = d.count;
  options->seed = d.seed;
  options->alpha = d.alpha;
  options->concentration = d.concentration;
  options->pixel_noise = d.pixel_noise;
  options->mirrored_pairs = 0;
  options->weak = 0;
  options->id_prefix = nullptr;
  options->generator_config_json = nullptr;
}

fbi_status fbi_run_synth(const fbi_synth_options* options, const char* out_path, fbi_text** summary) {
  return guard([&] {
    need(options, "options");
    need(out_path, "out_path");
    SynthOptions o;
    o.count = options->count;
    o.seed = options->seed;
    o.alpha = options->alpha;
    o.concentration = options->concentration;
    o.pixel_noise = options->pixel_noise;
    o.mirrored_pairs = options->mirrored_pairs != 0;
    o.weak = options->weak != 0;
    if (options->id_prefix != nullptr) o.id_prefix = options->id_prefix;
    if (options->generator_config_json != nullptr) {
      o.config = SynthConfig::from_json(json::parse(options->generator_config_json));
    }
    emit(summary, run_synth(o, out_path));
  });
}

fbi_status fbi_run_convert_fbi(const char* pose3d_path, const char* out_path, double alpha_deg, fbi_text** summary) {
  return guard([&] {
    need(pose3d_path, "pose3d_path");
    need(out_path, "out_path");
    emit(summary, run_convert_fbi(pose3d_path, out_path, alpha_deg));
  });
}

void fbi_lift_file_options_init(fbi_lift_file_options* options) {
  if (options == nullptr) return;
  options->use_record_scale = 0;
  options->spine_sign = 0;
  options->uncertain_policy = FBI_UNCERTAIN_ZERO_CLAMP;
  options->priors_json = nullptr;
}

fbi_status fbi_run_lift(const char* synthetic_path, const char* out_path, const fbi_lift_file_options* options,
                        fbi_text** summary) {
  return guard([&] {
    need(synthetic_path, "synthetic_path");
    need(out_path, "out_path");
    emit(summary, run_lift(synthetic_path, out_path, read_file_options(options)));
  });
}

fbi_status fbi_run_enumerate(const char* synthetic_path, const char* record_id, const char* out_path,
                             const fbi_lift_file_options* options, int max_uncertain, fbi_text** summary) {
  return guard([&] {
    need(synthetic_path, "synthetic_path");
    need(record_id, "record_id");
    need(out_path, "out_path");
    emit(summary, run_enumerate(synthetic_path, record_id, out_path, read_file_options(options), max_uncertain));
  });
}

fbi_status fbi_run_train(const char* train_path, const char* config_json, const char* checkpoint_out,
                         int pretrain_head, fbi_text** summary) {
  return guard([&] {
    need(train_path, "train_path");
    need(checkpoint_out, "checkpoint_out");
    emit(summary, run_train(train_path, read_config(config_json), checkpoint_out, pretrain_head != 0));
  });
}

fbi_status fbi_run_finetune_weak(const char* checkpoint_in, const char* weak_path, const char* supervised_path,
                                 const char* config_json, const char* checkpoint_out, fbi_text** summary) {
  return guard([&] {
    need(checkpoint_in, "checkpoint_in");
    need(weak_path, "weak_path");
    need(checkpoint_out, "checkpoint_out");
    emit(summary, run_finetune_weak(checkpoint_in, weak_path, str(supervised_path), read_config(config_json),
                                    checkpoint_out));
  });
}

fbi_status fbi_run_eval(const char* checkpoint, const char* test_path, double alpha_deg, int procrustes_scale,
                        double bucket_deg, const char* csv_out, fbi_text** summary) {
  return guard([&] {
    need(checkpoint, "checkpoint");
    need(test_path, "test_path");
    EvalOptions o{alpha_deg, procrustes_scale != 0, bucket_deg};
    emit(summary, run_eval(checkpoint, test_path, o, str(csv_out)));
  });
}

fbi_status fbi_run_sweep_alpha(const char* sweep_json, const char* csv_out, fbi_text** summary) {
  return guard([&] {
    SweepOptions o;
    if (sweep_json != nullptr && *sweep_json != '\0') {
      const json j = json::parse(sweep_json);
      if (j.contains("alphas")) o.alphas = j.at("alphas").get<std::vector<double>>();
      o.train_count = j.value("train_count", o.train_count);
      o.test_count = j.value("test_count", o.test_count);
      o.concentration = j.value("concentration", o.concentration);
      o.seed = j.value("seed", o.seed);
      if (j.contains("train")) o.train = TrainConfig::from_json(j.at("train"));
    }
    emit(summary, run_sweep_alpha(o, str(csv_out)));
  });
}

fbi_status fbi_run_hist(const char* path, double alpha_deg, double bucket_deg, fbi_text** summary) {
  return guard([&] {
    need(path, "path");
    emit(summary, run_hist(path, alpha_deg, bucket_deg));
  });
}

fbi_status fbi_run_export(const char* log_path, const char* annotator, const char* out_path, fbi_text** summary) {
  return guard([&] {
    need(log_path, "log_path");
    need(out_path, "out_path");
    std::optional<std::string> who;
    if (annotator != nullptr) who = annotator;
    emit(summary, run_export(log_path, who, out_path));
  });
}

void fbi_hub_options_init(fbi_hub_options* options) {
  if (options == nullptr) return;
  options->tasks_path = nullptr;
  options->gold_path = nullptr;
  options->gold_fraction = 0.1;
  options->seed = 1;
  options->log_path = nullptr;
  options->ui_dir = nullptr;
}

fbi_status fbi_hub_open(const fbi_hub_options* options, fbi_hub** out) {
  return guard([&] {
    need(options, "options");
    need(out, "out");
    auto h = std::make_unique<fbi_hub>();
    auto stream = load_task_stream(str(options->tasks_path), str(options->gold_path), options->gold_fraction,
                                   options->seed);
    h->hub = std::make_unique<AnnotationHub>(std::move(stream), str(options->log_path));
    h->server = std::make_unique<HubServer>(*h->hub, str(options->ui_dir));
    *out = h.release();
  });
}

fbi_status fbi_hub_next_task(fbi_hub* hub, const char* annotator, fbi_text** out) {
  return guard([&] {
    need(hub, "hub");
    need(annotator, "annotator");
    need(out, "out");
    auto t = hub->hub->next_task(annotator);
    emit(out, t ? json{{"done", false}, {"task", t->client_view()}} : json{{"done", true}});
  });
}

fbi_status fbi_hub_submit(fbi_hub* hub, const char* annotator, const char* task_id, const int* labels,
                          size_t n_labels, int64_t duration_ms, fbi_text** response) {
  return guard([&] {
    need(hub, "hub");
    need(annotator, "annotator");
    need(task_id, "task_id");
    if (n_labels > 0) need(labels, "labels");
    std::vector<int> l(labels, labels + n_labels);
    emit(response, hub->hub->submit_labels(annotator, task_id, l, duration_ms).to_json());
  });
}

fbi_status fbi_hub_stats(fbi_hub* hub, const char* annotator, fbi_text** out) {
  return guard([&] {
    need(hub, "hub");
    need(annotator, "annotator");
    need(out, "out");
    emit(out, hub->hub->annotator_stats(annotator).to_json());
  });
}

fbi_status fbi_hub_export(fbi_hub* hub, const char* annotator, fbi_text** jsonl) {
  return guard([&] {
    need(hub, "hub");
    need(jsonl, "jsonl");
    std::optional<std::string> who;
    if (annotator != nullptr) who = annotator;
    emit(jsonl, serialize_annotations(hub->hub->export_annotations(who)));
  });
}

fbi_status fbi_hub_serve_start(fbi_hub* hub, const char* host, int port, int* bound_port) {
  return guard([&] {
    need(hub, "hub");
    const int p = hub->server->start(host == nullptr ? "127.0.0.1" : host, port);
    if (bound_port != nullptr) *bound_port = p;
  });
}

fbi_status fbi_hub_serve(fbi_hub* hub, const char* host, int port) {
  return guard([&] {
    need(hub, "hub");
    hub->server->run(host == nullptr ? "127.0.0.1" : host, port);
  });
}

fbi_status fbi_hub_serve_stop(fbi_hub* hub) {
  return guard([&] {
    need(hub, "hub");
    hub->server->stop();
  });
}

void fbi_hub_close(fbi_hub* hub) {
  if (hub == nullptr) return;
  if (hub->server) hub->server->stop();
  delete hub;
}

}  // extern "C"
