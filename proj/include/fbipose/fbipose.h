/* fbipose: FBI-based monocular 3D human pose lifting.
 *
 * Plain C interface over the C++ core. Every call returns an fbi_status;
 * on failure fbi_last_error() holds a message for the calling thread.
 * Poses are flat arrays of doubles in joint order: 16 x (x, y) for 2D
 * poses (pixels), 16 x (X, Y, Z) for 3D poses (camera frame, millimetres,
 * +Z away from the camera). FBI labels are 14 bytes, 0 = forward (child end
 * closer to the camera), 1 = backward, 2 = uncertain. Probability tables are
 * 14 rows of 3, row-major.
 */
#ifndef FBIPOSE_FBIPOSE_H
#define FBIPOSE_FBIPOSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(FBIPOSE_BUILDING_LIBRARY)
#define FBI_API __attribute__((visibility("default")))
#else
#define FBI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define FBI_NUM_JOINTS 16
#define FBI_NUM_TREE_EDGES 15
#define FBI_NUM_BONES 14
#define FBI_NUM_STATES 3

typedef enum fbi_status {
  FBI_OK = 0,
  FBI_E_INVALID_ARGUMENT = 1,
  FBI_E_DEGENERATE_BONE = 2,
  FBI_E_ZERO_SCALE = 3,
  FBI_E_TOPOLOGY_MISMATCH = 4,
  FBI_E_CAP_EXCEEDED = 5,
  FBI_E_NUMERIC_FAILURE = 6,
  FBI_E_UNDEFINED_RATIO = 7,
  FBI_E_IO = 8,
  FBI_E_PARSE = 9,
  FBI_E_SCHEMA_VERSION = 10,
  FBI_E_NOT_FOUND = 11,
  FBI_E_CONFLICT = 12,
  FBI_E_EMPTY_DATASET = 13,
  FBI_E_DIVERGENCE = 14,
  FBI_E_POOL_EXHAUSTED = 15,
  FBI_E_INTERNAL = 16
} fbi_status;

typedef enum fbi_uncertain_policy {
  FBI_UNCERTAIN_DEFAULT_FORWARD = 0,
  FBI_UNCERTAIN_DEFAULT_BACKWARD = 1,
  FBI_UNCERTAIN_ZERO_CLAMP = 2
} fbi_uncertain_policy;

FBI_API const char* fbi_version(void);
FBI_API const char* fbi_status_name(fbi_status status);
/* Message of the last failed call on this thread; "" after a success. */
FBI_API const char* fbi_last_error(void);

/* ---- owned text (JSON / JSONL) ------------------------------------------ */

typedef struct fbi_text fbi_text;
FBI_API const char* fbi_text_data(const fbi_text* text);
FBI_API size_t fbi_text_size(const fbi_text* text);
FBI_API void fbi_text_free(fbi_text* text);

/* The versioned skeleton topology document. */
FBI_API fbi_status fbi_topology_json(fbi_text** out);
/* Default bone lengths (mm), one per tree edge. */
FBI_API fbi_status fbi_default_bone_lengths(double* lengths15);

/* ---- skeleton ------------------------------------------------------------ */

FBI_API fbi_status fbi_out_of_plane_angle(const double* pose3d, int bone, double* angle_deg);
/* degenerate_count may be NULL. */
FBI_API fbi_status fbi_convert_pose(const double* pose3d, double alpha_deg, uint8_t* labels14, int* degenerate_count);

/* ---- lifting ------------------------------------------------------------- */

typedef struct fbi_lift_options {
  double scale;      /* pixels per mm; <= 0 estimates it from the 2D pose */
  int spine_sign;    /* +1 or -1; 0 = default +1, reported as ambiguous */
  int uncertain_policy; /* fbi_uncertain_policy */
  double cx, cy;     /* principal point, pixels */
} fbi_lift_options;

FBI_API void fbi_lift_options_init(fbi_lift_options* options);

FBI_API fbi_status fbi_project(const double* pose3d, double scale, double cx, double cy, double* pose2d_out);
/* lengths15 may be NULL for the default prior. */
FBI_API fbi_status fbi_estimate_scale(const double* pose2d, const double* lengths15, double* scale);
FBI_API fbi_status fbi_lift(const double* pose2d, const uint8_t* labels14, const double* lengths15,
                            const fbi_lift_options* options, double* pose3d_out, double* scale_used,
                            int* radicand_clamps);

typedef struct fbi_lift_set fbi_lift_set;
/* All 2^k sign assignments of the k ambiguous edges. options->uncertain_policy
 * is ignored; spine_sign 0 enumerates the spine too. */
FBI_API fbi_status fbi_enumerate_lifts(const double* pose2d, const uint8_t* labels14, const double* lengths15,
                                       const fbi_lift_options* options, int max_uncertain, fbi_lift_set** out);
FBI_API size_t fbi_lift_set_size(const fbi_lift_set* set);
FBI_API fbi_status fbi_lift_set_pose(const fbi_lift_set* set, size_t index, double* pose3d_out);
/* Tree-edge indices whose sign was enumerated; count receives the total. */
FBI_API fbi_status fbi_lift_set_ambiguous_edges(const fbi_lift_set* set, int* edges, size_t capacity, size_t* count);
FBI_API void fbi_lift_set_free(fbi_lift_set* set);

/* ---- synthetic data ------------------------------------------------------ */

FBI_API fbi_status fbi_synthetic_pose(uint64_t seed, double* pose3d_out);
FBI_API fbi_status fbi_simulate_probabilities(const double* pose3d, double alpha_deg, double concentration,
                                              uint64_t seed, double* p_fws42, double* p_aws42);

/* ---- losses -------------------------------------------------------------- */

FBI_API fbi_status fbi_focal_loss(const double* probs42, const uint8_t* labels14, double gamma, double* loss);
FBI_API fbi_status fbi_fixed_weight_loss(const double* probs42, const uint8_t* labels14, double w_clear,
                                         double w_uncertain, double* loss);
FBI_API fbi_status fbi_pose_l2_loss(const double* pred, const double* gt, size_t n, double* loss);

/* ---- metrics ------------------------------------------------------------- */

FBI_API fbi_status fbi_mpjpe_p1(const double* pred3d, const double* gt3d, double* mm);
FBI_API fbi_status fbi_mpjpe_p2(const double* pred3d, const double* gt3d, int with_scale, double* mm);
/* gt ~= scale * R * pred + t; rotation9 is row-major. */
FBI_API fbi_status fbi_procrustes_align(const double* pred3d, const double* gt3d, int with_scale, double* rotation9,
                                        double* scale, double* translation3);
/* n poses (n * 48 doubles) against n label rows (n * 14 bytes). */
FBI_API fbi_status fbi_correctness_ratio(const double* pred3d, const uint8_t* gt_labels, size_t n, double alpha_deg,
                                         double* ratio);

/* ---- regressor ----------------------------------------------------------- */

typedef struct fbi_regressor fbi_regressor;
FBI_API fbi_status fbi_regressor_load(const char* checkpoint_path, fbi_regressor** out);
/* Eval-mode prediction of a root-relative 3D pose (mm). The probability
 * tables may be NULL for uniform rows. */
FBI_API fbi_status fbi_regressor_predict(const fbi_regressor* model, const double* pose2d, const double* p_fws42,
                                         const double* p_aws42, double* pose3d_out);
FBI_API void fbi_regressor_free(fbi_regressor* model);

/* ---- file-level commands --------------------------------------------------
 * Each writes its outputs and returns a JSON summary in *summary (which may
 * be NULL when not wanted). Training configuration is a JSON object string
 * (NULL for defaults) with keys such as learning_rate, iterations,
 * batch_size, hidden, fbi_inputs, weak_fbi_weight. */

typedef struct fbi_synth_options {
  size_t count;
  uint64_t seed;
  double alpha;
  double concentration;
  double pixel_noise;
  int mirrored_pairs;
  int weak;
  const char* id_prefix;             /* NULL = "s" */
  const char* generator_config_json; /* NULL = built-in generator config */
} fbi_synth_options;

FBI_API void fbi_synth_options_init(fbi_synth_options* options);
FBI_API fbi_status fbi_run_synth(const fbi_synth_options* options, const char* out_path, fbi_text** summary);
FBI_API fbi_status fbi_run_convert_fbi(const char* pose3d_path, const char* out_path, double alpha_deg,
                                       fbi_text** summary);

typedef struct fbi_lift_file_options {
  int use_record_scale;
  int spine_sign; /* 0 = default */
  int uncertain_policy;
  const char* priors_json; /* NULL = default; object keyed by child joint name */
} fbi_lift_file_options;

FBI_API void fbi_lift_file_options_init(fbi_lift_file_options* options);
FBI_API fbi_status fbi_run_lift(const char* synthetic_path, const char* out_path, const fbi_lift_file_options* options,
                                fbi_text** summary);
FBI_API fbi_status fbi_run_enumerate(const char* synthetic_path, const char* record_id, const char* out_path,
                                     const fbi_lift_file_options* options, int max_uncertain, fbi_text** summary);
FBI_API fbi_status fbi_run_train(const char* train_path, const char* config_json, const char* checkpoint_out,
                                 int pretrain_head, fbi_text** summary);
/* supervised_path may be NULL. */
FBI_API fbi_status fbi_run_finetune_weak(const char* checkpoint_in, const char* weak_path, const char* supervised_path,
                                         const char* config_json, const char* checkpoint_out, fbi_text** summary);
/* csv_out may be NULL. */
FBI_API fbi_status fbi_run_eval(const char* checkpoint, const char* test_path, double alpha_deg, int procrustes_scale,
                                double bucket_deg, const char* csv_out, fbi_text** summary);
/* sweep_json: {alphas, train_count, test_count, concentration, seed, train:{...}}; NULL for defaults. */
FBI_API fbi_status fbi_run_sweep_alpha(const char* sweep_json, const char* csv_out, fbi_text** summary);
FBI_API fbi_status fbi_run_hist(const char* path, double alpha_deg, double bucket_deg, fbi_text** summary);
/* annotator may be NULL for all records. */
FBI_API fbi_status fbi_run_export(const char* log_path, const char* annotator, const char* out_path,
                                  fbi_text** summary);

/* ---- annotation service -------------------------------------------------- */

typedef struct fbi_hub fbi_hub;

typedef struct fbi_hub_options {
  const char* tasks_path; /* pose2d file of regular tasks, may be NULL */
  const char* gold_path;  /* synthetic-sample file of gold tasks, may be NULL */
  double gold_fraction;
  uint64_t seed;
  const char* log_path; /* append-only annotation log; NULL keeps records in memory */
  const char* ui_dir;   /* static files served at /, may be NULL */
} fbi_hub_options;

FBI_API void fbi_hub_options_init(fbi_hub_options* options);
FBI_API fbi_status fbi_hub_open(const fbi_hub_options* options, fbi_hub** out);
/* {"done": true} when the stream is exhausted, else {"done": false, "task": {...}}. */
FBI_API fbi_status fbi_hub_next_task(fbi_hub* hub, const char* annotator, fbi_text** out);
FBI_API fbi_status fbi_hub_submit(fbi_hub* hub, const char* annotator, const char* task_id, const int* labels,
                                  size_t n_labels, int64_t duration_ms, fbi_text** response);
FBI_API fbi_status fbi_hub_stats(fbi_hub* hub, const char* annotator, fbi_text** out);
FBI_API fbi_status fbi_hub_export(fbi_hub* hub, const char* annotator, fbi_text** jsonl);
/* Serves HTTP in the background; port 0 picks a free port. */
FBI_API fbi_status fbi_hub_serve_start(fbi_hub* hub, const char* host, int port, int* bound_port);
/* Serves HTTP on the calling thread until fbi_hub_serve_stop(). */
FBI_API fbi_status fbi_hub_serve(fbi_hub* hub, const char* host, int port);
FBI_API fbi_status fbi_hub_serve_stop(fbi_hub* hub);
FBI_API void fbi_hub_close(fbi_hub* hub);

#ifdef __cplusplus
}
#endif

#endif
