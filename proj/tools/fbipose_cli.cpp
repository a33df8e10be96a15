// fbipose command line front end. Talks to the library only through the C API.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fbipose/fbipose.h"

namespace {

using json = nlohmann::json;

struct Text {
  fbi_text* t = nullptr;
  ~Text() { fbi_text_free(t); }
  std::string str() const { return std::string(fbi_text_data(t), fbi_text_size(t)); }
};

int report(fbi_status s, const Text& summary, const std::string& out_json = {}) {
  if (s != FBI_OK) {
    std::cerr << "error (" << fbi_status_name(s) << "): " << fbi_last_error() << "\n";
    return 1;
  }
  const json j = json::parse(summary.str());
  if (!out_json.empty()) {
    std::ofstream out(out_json);
    out << j.dump(2) << "\n";
    if (!out) {
      std::cerr << "error: cannot write " << out_json << "\n";
      return 1;
    }
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

json section(const json& config, const char* name) {
  if (config.contains(name) && config.at(name).is_object()) return config.at(name);
  return json::object();
}

std::optional<json> load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config " << path << "\n";
    return std::nullopt;
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    std::cerr << "error: config " << path << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

int policy_from(const std::string& s) {
  if (s == "forward") return FBI_UNCERTAIN_DEFAULT_FORWARD;
  if (s == "backward") return FBI_UNCERTAIN_DEFAULT_BACKWARD;
  return FBI_UNCERTAIN_ZERO_CLAMP;
}

struct TrainFlags {
  std::optional<int> iterations, batch, hidden, head_iterations;
  std::optional<double> lr, dropout, weak_weight, pose_weight, focal_weight, fixed_weight;
  bool no_fbi_inputs = false;
  std::string weak_loss;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "Training iterations");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--hidden", hidden, "Hidden layer width");
    app->add_option("--lr", lr, "Initial learning rate");
    app->add_option("--dropout", dropout, "Dropout rate");
    app->add_option("--head-iterations", head_iterations, "FBI head pretraining iterations");
    app->add_option("--focal-weight", focal_weight, "Weight of the focal FBI loss on the head");
    app->add_option("--fixed-weight", fixed_weight, "Weight of the fixed-weight FBI loss on the head");
    app->add_flag("--no-fbi-inputs", no_fbi_inputs, "Replace the FBI probability inputs by uniform rows");
  }

  void add_weak(CLI::App* app) {
    app->add_option("--iterations", iterations, "Finetuning iterations");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--lr", lr, "Initial learning rate");
    app->add_option("--weak-weight", weak_weight, "Weight of the weak FBI loss");
    app->add_option("--pose-weight", pose_weight, "Weight of the interleaved supervised 3D loss");
    app->add_option("--weak-loss", weak_loss, "focal or fixed")->check(CLI::IsMember({"focal", "fixed"}));
  }

  json apply(json c, std::uint64_t seed, bool seed_set) const {
    if (seed_set) c["seed"] = seed;
    if (iterations) c["iterations"] = *iterations;
    if (batch) c["batch_size"] = *batch;
    if (hidden) c["hidden"] = *hidden;
    if (head_iterations) c["head_iterations"] = *head_iterations;
    if (lr) c["learning_rate"] = *lr;
    if (dropout) c["dropout"] = *dropout;
    if (weak_weight) c["weak_fbi_weight"] = *weak_weight;
    if (pose_weight) c["weak_pose_weight"] = *pose_weight;
    if (focal_weight) c["weights"]["focal"] = *focal_weight;
    if (fixed_weight) c["weights"]["fixed"] = *fixed_weight;
    if (!weak_loss.empty()) c["weak_loss"] = weak_loss;
    if (no_fbi_inputs) c["fbi_inputs"] = false;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FBI-based 3D human pose lifting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  std::string config_path;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic-sample dataset");
  std::string synth_out, synth_prefix = "s";
  std::size_t synth_count = 1000;
  double synth_alpha = 35.0, synth_conc = 8.0, synth_noise = 0.0;
  bool synth_mirror = false, synth_weak = false;
  synth->add_option("--out", synth_out, "Output JSONL")->required();
  synth->add_option("--count", synth_count, "Number of records")->capture_default_str();
  synth->add_option("--alpha", synth_alpha, "FBI threshold angle (degrees)")->capture_default_str();
  synth->add_option("--concentration", synth_conc, "Simulated predictor sharpness")->capture_default_str();
  synth->add_option("--pixel-noise", synth_noise, "2D joint noise (pixels)")->capture_default_str();
  synth->add_option("--prefix", synth_prefix, "Record id prefix")->capture_default_str();
  synth->add_flag("--mirrored", synth_mirror, "Emit depth-mirrored pose pairs");
  synth->add_flag("--weak", synth_weak, "Omit 3D poses (FBI-only records)");

  // convert-fbi
  auto* convert = app.add_subcommand("convert-fbi", "Threshold 3D poses into FBI labels");
  std::string conv_in, conv_out;
  double conv_alpha = 35.0;
  convert->add_option("--in", conv_in, "pose3d JSONL")->required();
  convert->add_option("--out", conv_out, "fbi-annotation JSONL")->required();
  convert->add_option("--alpha", conv_alpha, "Threshold angle (degrees)")->capture_default_str();

  // lift / enumerate
  auto* lift = app.add_subcommand("lift", "Analytic 2D+FBI lifting of a synthetic-sample file");
  auto* enumerate = app.add_subcommand("enumerate", "All sign candidates for one record");
  std::string lift_in, lift_out, lift_policy = "zero_clamp", enum_id;
  bool lift_true_scale = false;
  int lift_spine = 0, enum_max = 12;
  for (auto* sub : {lift, enumerate}) {
    sub->add_option("--in", lift_in, "synthetic-sample JSONL")->required();
    sub->add_option("--out", lift_out, "pose3d JSONL")->required();
    sub->add_flag("--true-scale", lift_true_scale, "Use each record's camera scale");
    sub->add_option("--spine-sign", lift_spine, "+1 or -1 (default: +1, reported as ambiguous)")
        ->check(CLI::IsMember({-1, 1}));
  }
  lift->add_option("--policy", lift_policy, "Uncertain bones: zero_clamp, forward or backward")
      ->check(CLI::IsMember({"zero_clamp", "forward", "backward"}))
      ->capture_default_str();
  enumerate->add_option("--id", enum_id, "Record id")->required();
  enumerate->add_option("--max-uncertain", enum_max, "Cap on ambiguous edges")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Supervised training of the 3D pose regressor");
  std::string train_in, train_out;
  bool train_no_head = false;
  TrainFlags train_flags;
  train->add_option("--train", train_in, "synthetic-sample JSONL with 3D poses")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_flag("--no-head", train_no_head, "Skip FBI head pretraining");
  train_flags.add(train);

  // finetune-weak
  auto* weak = app.add_subcommand("finetune-weak", "Weakly supervised finetuning on FBI-only records");
  std::string weak_ck, weak_in, weak_sup, weak_out;
  TrainFlags weak_flags;
  weak->add_option("--checkpoint", weak_ck, "Input checkpoint")->required();
  weak->add_option("--weak", weak_in, "synthetic-sample JSONL used without its 3D poses")->required();
  weak->add_option("--supervised", weak_sup, "synthetic-sample JSONL of interleaved supervised batches");
  weak->add_option("--out", weak_out, "Output checkpoint")->required();
  weak_flags.add_weak(weak);

  // eval
  auto* eval = app.add_subcommand("eval", "MPJPE, FBI correctness and histograms on a test set");
  std::string eval_ck, eval_in, eval_csv, eval_json;
  double eval_alpha = 35.0, eval_bucket = 10.0;
  bool eval_no_scale = false;
  eval->add_option("--checkpoint", eval_ck, "Checkpoint")->required();
  eval->add_option("--test", eval_in, "synthetic-sample JSONL")->required();
  eval->add_option("--alpha", eval_alpha, "Threshold angle for FBI correctness")->capture_default_str();
  eval->add_option("--bucket", eval_bucket, "Histogram bucket width (degrees)")->capture_default_str();
  eval->add_flag("--no-scale", eval_no_scale, "Protocol #2 without scale (rigid alignment)");
  eval->add_option("--csv", eval_csv, "CSV report path");
  eval->add_option("--report", eval_json, "JSON report path");

  // sweep-alpha
  auto* sweep = app.add_subcommand("sweep-alpha", "Train and evaluate over threshold angles");
  std::vector<double> sweep_alphas;
  std::optional<std::size_t> sweep_train_n, sweep_test_n;
  std::optional<double> sweep_conc;
  std::string sweep_csv, sweep_json;
  TrainFlags sweep_flags;
  sweep->add_option("--alphas", sweep_alphas, "Threshold angles (default 5,20,25,30,35,40,60)")->delimiter(',');
  sweep->add_option("--train-count", sweep_train_n, "Training records per angle");
  sweep->add_option("--test-count", sweep_test_n, "Test records per angle");
  sweep->add_option("--concentration", sweep_conc, "Simulated predictor sharpness");
  sweep->add_option("--csv", sweep_csv, "CSV curve path");
  sweep->add_option("--report", sweep_json, "JSON report path");
  sweep_flags.add(sweep);

  // hist
  auto* hist = app.add_subcommand("hist", "Uncertain fraction and out-of-plane angle histogram");
  std::string hist_in, hist_json;
  double hist_alpha = 35.0, hist_bucket = 10.0;
  hist->add_option("--in", hist_in, "pose3d or synthetic-sample JSONL")->required();
  hist->add_option("--alpha", hist_alpha, "Threshold angle (degrees)")->capture_default_str();
  hist->add_option("--bucket", hist_bucket, "Bucket width (degrees)")->capture_default_str();
  hist->add_option("--report", hist_json, "JSON report path");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  std::string serve_tasks, serve_gold, serve_log, serve_ui, serve_host = "127.0.0.1";
  double serve_gold_frac = 0.1;
  int serve_port = 8080;
  serve->add_option("--tasks", serve_tasks, "pose2d JSONL of tasks");
  serve->add_option("--gold", serve_gold, "synthetic-sample JSONL of gold tasks");
  serve->add_option("--gold-fraction", serve_gold_frac, "Share of gold tasks in the stream")->capture_default_str();
  serve->add_option("--log", serve_log, "Append-only annotation log");
  serve->add_option("--ui-dir", serve_ui, "Static UI bundle directory");
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "Port (0 picks a free one)")->capture_default_str();

  // export
  auto* exp = app.add_subcommand("export", "Export annotation records from a log");
  std::string exp_log, exp_out, exp_who;
  exp->add_option("--log", exp_log, "Annotation log")->required();
  exp->add_option("--out", exp_out, "Output fbi-annotation JSONL")->required();
  exp->add_option("--annotator", exp_who, "Only this annotator");

  CLI11_PARSE(app, argc, argv);

  const auto config = load_config(config_path);
  if (!config) return 1;
  const bool seed_set = seed_opt->count() > 0;
  Text summary;

  if (synth->parsed()) {
    fbi_synth_options o;
    fbi_synth_options_init(&o);
    const json s = section(*config, "synth");
    o.count = synth->count("--count") ? synth_count : s.value("count", synth_count);
    o.seed = seed;
    o.alpha = synth->count("--alpha") ? synth_alpha : s.value("alpha", synth_alpha);
    o.concentration = synth->count("--concentration") ? synth_conc : s.value("concentration", synth_conc);
    o.pixel_noise = synth->count("--pixel-noise") ? synth_noise : s.value("pixel_noise", synth_noise);
    o.mirrored_pairs = synth_mirror ? 1 : 0;
    o.weak = synth_weak ? 1 : 0;
    o.id_prefix = synth_prefix.c_str();
    std::string gen;
    if (config->contains("generator")) {
      gen = config->at("generator").dump();
      o.generator_config_json = gen.c_str();
    }
    return report(fbi_run_synth(&o, synth_out.c_str(), &summary.t), summary);
  }
  if (convert->parsed()) {
    return report(fbi_run_convert_fbi(conv_in.c_str(), conv_out.c_str(), conv_alpha, &summary.t), summary);
  }
  if (lift->parsed() || enumerate->parsed()) {
    fbi_lift_file_options o;
    fbi_lift_file_options_init(&o);
    o.use_record_scale = lift_true_scale ? 1 : 0;
    o.spine_sign = lift_spine;
    o.uncertain_policy = policy_from(lift_policy);
    std::string priors;
    if (config->contains("bone_lengths_mm")) {
      priors = config->at("bone_lengths_mm").dump();
      o.priors_json = priors.c_str();
    }
    if (lift->parsed()) return report(fbi_run_lift(lift_in.c_str(), lift_out.c_str(), &o, &summary.t), summary);
    return report(fbi_run_enumerate(lift_in.c_str(), enum_id.c_str(), lift_out.c_str(), &o, enum_max, &summary.t),
                  summary);
  }
  if (train->parsed()) {
    const std::string c = train_flags.apply(section(*config, "train"), seed, seed_set).dump();
    return report(fbi_run_train(train_in.c_str(), c.c_str(), train_out.c_str(), train_no_head ? 0 : 1, &summary.t),
                  summary);
  }
  if (weak->parsed()) {
    const std::string c = weak_flags.apply(section(*config, "finetune"), seed, seed_set).dump();
    return report(fbi_run_finetune_weak(weak_ck.c_str(), weak_in.c_str(), weak_sup.empty() ? nullptr : weak_sup.c_str(),
                                        c.c_str(), weak_out.c_str(), &summary.t),
                  summary);
  }
  if (eval->parsed()) {
    return report(fbi_run_eval(eval_ck.c_str(), eval_in.c_str(), eval_alpha, eval_no_scale ? 0 : 1, eval_bucket,
                               eval_csv.empty() ? nullptr : eval_csv.c_str(), &summary.t),
                  summary, eval_json);
  }
  if (sweep->parsed()) {
    json s = section(*config, "sweep");
    if (!sweep_alphas.empty()) s["alphas"] = sweep_alphas;
    if (sweep_train_n) s["train_count"] = *sweep_train_n;
    if (sweep_test_n) s["test_count"] = *sweep_test_n;
    if (sweep_conc) s["concentration"] = *sweep_conc;
    if (seed_set) s["seed"] = seed;
    s["train"] = sweep_flags.apply(s.value("train", json::object()), seed, seed_set);
    const std::string text = s.dump();
    return report(fbi_run_sweep_alpha(text.c_str(), sweep_csv.empty() ? nullptr : sweep_csv.c_str(), &summary.t),
                  summary, sweep_json);
  }
  if (hist->parsed()) {
    return report(fbi_run_hist(hist_in.c_str(), hist_alpha, hist_bucket, &summary.t), summary, hist_json);
  }
  if (exp->parsed()) {
    return report(fbi_run_export(exp_log.c_str(), exp_who.empty() ? nullptr : exp_who.c_str(), exp_out.c_str(),
                                 &summary.t),
                  summary);
  }
  if (serve->parsed()) {
    fbi_hub_options o;
    fbi_hub_options_init(&o);
    o.tasks_path = serve_tasks.empty() ? nullptr : serve_tasks.c_str();
    o.gold_path = serve_gold.empty() ? nullptr : serve_gold.c_str();
    o.gold_fraction = serve_gold_frac;
    o.seed = seed;
    o.log_path = serve_log.empty() ? nullptr : serve_log.c_str();
    o.ui_dir = serve_ui.empty() ? nullptr : serve_ui.c_str();
    fbi_hub* hub = nullptr;
    fbi_status s = fbi_hub_open(&o, &hub);
    if (s != FBI_OK) return report(s, summary);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    int port = 0;
    s = fbi_hub_serve_start(hub, serve_host.c_str(), serve_port, &port);
    if (s != FBI_OK) {
      fbi_hub_close(hub);
      return report(s, summary);
    }
    std::cout << "serving on http://" << serve_host << ":" << port << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    fbi_hub_close(hub);
    return 0;
  }
  return 0;
}
