#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fbipose/checkpoint.hpp"
#include "fbipose/dataio.hpp"
#include "fbipose/lifting.hpp"
#include "fbipose/metrics.hpp"
#include "fbipose/synthetic.hpp"
#include "fbipose/training.hpp"

namespace fbipose {

struct SynthOptions {
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  double alpha = 35.0;
  double concentration = 8.0;  // simulated FBI predictor sharpness
  double pixel_noise = 0.0;    // Gaussian 2D noise, pixels
  bool mirrored_pairs = false; // emit each pose with its depth mirror (count must be even)
  bool weak = false;           // drop pose3d (FBI-only records)
  std::string id_prefix = "s";
  SynthConfig config = SynthConfig::standard();
};

std::vector<SyntheticSample> make_synthetic(const SynthOptions& options);

// Regressor inputs from synthetic records (pose3d, when present, becomes a
// root-relative millimetre target).
std::vector<TrainingSample> to_training_samples(const std::vector<SyntheticSample>& samples);

Pose3D pose_from_vector(const Eigen::VectorXd& v48);

struct EvalOptions {
  double alpha = 35.0;
  bool procrustes_scale = true;
  double bucket_deg = 10.0;
};

struct EvalSummary {
  std::size_t count = 0;
  double mpjpe_p1 = 0.0;
  double mpjpe_p2 = 0.0;
  std::optional<double> fbi_correctness;  // null when no clear bone
};

struct EvalReport {
  EvalSummary aggregate;
  std::vector<std::pair<std::string, EvalSummary>> per_action;  // sorted by action name
  AngleHistogram histogram;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Predictions against every record with a 3D pose in `test`. FBI correctness
// compares the predicted poses, converted at options.alpha, with each record's
// stored labels.
EvalReport evaluate(const RegressorParams<float>& params, const std::vector<SyntheticSample>& test,
                    const EvalOptions& options = {});

struct SweepOptions {
  std::vector<double> alphas{5, 20, 25, 30, 35, 40, 60};
  std::size_t train_count = 4000;
  std::size_t test_count = 1000;
  double concentration = 8.0;
  std::uint64_t seed = 1;
  TrainConfig train;
};

struct SweepPoint {
  double alpha = 0.0;
  double mpjpe_p1 = 0.0;
  double mpjpe_p2 = 0.0;
  std::optional<double> fbi_correctness;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::size_t best = 0;  // index of the lowest protocol #1 error
  bool interior_optimum() const { return best > 0 && best + 1 < points.size(); }
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// For each threshold angle: simulate FBI labels and probabilities at that
// angle, train a regressor and evaluate it on a held-out set. The poses are
// the same for every angle.
SweepResult sweep_alpha(const SweepOptions& options);

struct CorpusStats {
  std::size_t poses = 0;
  double uncertain_fraction = 0.0;
  AngleHistogram histogram;
  std::vector<int> degenerate_bones;  // count per bone
  nlohmann::json to_json() const;
};

CorpusStats corpus_statistics(const std::vector<Pose3D>& poses, double alpha, double bucket_deg = 10.0);

// ---- file-level commands ---------------------------------------------------

nlohmann::json run_synth(const SynthOptions& options, const std::string& out_path);

// pose3d -> fbi-annotation records labelled by thresholding at alpha.
nlohmann::json run_convert_fbi(const std::string& pose3d_path, const std::string& out_path, double alpha);

struct LiftFileOptions {
  bool use_record_scale = false;
  std::optional<int> spine_sign;
  UncertainPolicy policy = UncertainPolicy::kZeroClamp;
  std::optional<BoneLengthPrior> priors;
};

// synthetic-sample (pose2d + fbi) -> pose3d file of lifted poses.
nlohmann::json run_lift(const std::string& synthetic_path, const std::string& out_path, const LiftFileOptions& options);

// All candidates for one record of a synthetic-sample file.
nlohmann::json run_enumerate(const std::string& synthetic_path, const std::string& record_id,
                             const std::string& out_path, const LiftFileOptions& options, int max_uncertain);

nlohmann::json run_train(const std::string& train_path, const TrainConfig& config, const std::string& checkpoint_out,
                         bool pretrain_head);

nlohmann::json run_finetune_weak(const std::string& checkpoint_in, const std::string& weak_path,
                                 const std::string& supervised_path, const TrainConfig& config,
                                 const std::string& checkpoint_out);

nlohmann::json run_eval(const std::string& checkpoint, const std::string& test_path, const EvalOptions& options,
                        const std::string& csv_out);

nlohmann::json run_sweep_alpha(const SweepOptions& options, const std::string& csv_out);

// Uncertain-angle histogram of a pose3d or synthetic-sample file.
nlohmann::json run_hist(const std::string& path, double alpha, double bucket_deg);

// Replays an annotation log (against an optional task list) and writes the
// selected records, ordered by (created_at, task_id).
nlohmann::json run_export(const std::string& log_path, const std::optional<std::string>& annotator,
                          const std::string& out_path);

// Task stream for the annotation service: pose2d records as regular tasks
// and synthetic-sample records as gold tasks, mixed at gold_fraction.
std::vector<TaskDefinition> load_task_stream(const std::string& tasks_path, const std::string& gold_path,
                                             double gold_fraction, std::uint64_t seed);

}  // namespace fbipose
