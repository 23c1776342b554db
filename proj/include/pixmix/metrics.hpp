#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pixmix/image.hpp"
#include "pixmix/rng.hpp"

namespace pixmix {

struct PredictionTags {
  std::string split;
  std::optional<std::string> corruption;
  std::optional<int> severity;  // 1..5
  std::optional<std::string> sequence_id;
  std::optional<int> frame_index;  // 1-based, contiguous per sequence
  std::optional<bool> temporal;    // defaults to true for sequence metrics
  bool anomaly = false;
};

// One model prediction. probs are nonnegative and sum to 1 (logits are
// converted on ingest); anomaly records may omit the label.
struct PredictionRecord {
  std::string id;
  std::optional<int> label;
  Eigen::VectorXd probs;
  PredictionTags tags;
};

// Reads a JSON Lines prediction log. Logits are converted via a
// max-subtracted softmax. Malformed lines raise DecodeError with the line
// number; invariant violations raise SchemaError.
std::vector<PredictionRecord> ingest_predictions(
    const std::filesystem::path& path);

// Argmax with ties broken toward the smallest class index.
int predicted_class(const Eigen::VectorXd& probs);

// Fraction of records whose predicted class differs from the label.
double classification_error(const std::vector<PredictionRecord>& records);

// normalizers[corruption][severity] = reference error.
using Normalizers = std::map<std::string, std::map<int, double>>;
Normalizers load_normalizers(const std::filesystem::path& path);

struct MceResult {
  double value = 0.0;
  bool normalized = false;
  std::map<std::string, double> per_corruption;
};

// Mean corruption error. Unnormalized: mean over corruptions of the
// mean-over-severities error. Normalized: per corruption the severity-sum
// of errors divided by the severity-sum of reference errors, then averaged
// over corruptions.
MceResult mce(const std::vector<PredictionRecord>& records,
              const std::optional<Normalizers>& normalizers = std::nullopt);

// Flip rate of one sequence (sorted internally by frame_index). Temporal
// sequences compare adjacent frames; non-temporal ones compare every frame
// to the first.
double flip_rate(std::vector<PredictionRecord> sequence);

struct ConsistencyResult {
  double value = 0.0;
  std::map<std::string, double> per_perturbation;
};

// Mean flip rate: flip_rate per (corruption, sequence_id) group, averaged
// per perturbation type, then macro-averaged over perturbation types.
ConsistencyResult mfr(const std::vector<PredictionRecord>& records);

// Top-5 displacement between two probability vectors: ranks capped at 6,
// summed |rank difference| over the union of the two top-5 sets. Zero iff
// the capped top-5 rankings agree; at most 30 for >= 6 classes.
double t5d(const Eigen::VectorXd& prev_probs, const Eigen::VectorXd& cur_probs);

// Mean top-5 displacement, aggregated exactly like mfr.
ConsistencyResult mt5d(const std::vector<PredictionRecord>& records);

// RMS calibration error under equal-mass (adaptive) binning. The default
// bin count is floor(sqrt(n)), clamped to [1, n].
double rms_calibration_error(const std::vector<PredictionRecord>& records,
                             std::optional<int> bins = std::nullopt);

// Maximum softmax probability: the in-distribution confidence score.
double msp_score(const PredictionRecord& record);

// Rank statistics for anomaly detection. In-distribution examples are
// expected to score higher; the detection-positive class is the anomaly.
// AUROC uses midranks for ties; AUPR is average precision over the
// anomaly-positive ranking.
double auroc(const std::vector<double>& in_scores,
             const std::vector<double>& anomaly_scores);
double aupr(const std::vector<double>& in_scores,
            const std::vector<double>& anomaly_scores);

struct EvalOptions {
  std::optional<Normalizers> normalizers;
  std::optional<int> bins;
};

struct EvalCounts {
  std::size_t records = 0;
  std::size_t anomalies = 0;
  Eigen::Index class_count = 0;
  std::map<std::string, std::size_t> per_split;
};

struct EvalReport {
  std::optional<double> clean_error;
  std::optional<MceResult> mce;
  std::optional<ConsistencyResult> mfr;
  std::optional<ConsistencyResult> mt5d;
  std::map<std::string, double> rms_calibration;  // per split
  std::optional<double> auroc;
  std::optional<double> aupr;
  EvalCounts counts;
};

// Computes every metric the log supports. Split conventions: "clean" feeds
// the clean error and the in-distribution scores, "corruptions" feeds mCE,
// "perturbations" feeds mFR/mT5D; records tagged anomaly=true feed the
// detection scores regardless of split.
EvalReport evaluate(const std::vector<PredictionRecord>& records,
                    const EvalOptions& options = {});

// Serialized report document. Rates are reported as percentages; mT5D is
// reported as a raw rank displacement.
std::string report_to_json_string(const EvalReport& report);

// Optional per-corruption CSV: corruption,severity,error rows.
void write_per_corruption_csv(const std::vector<PredictionRecord>& records,
                              const std::filesystem::path& path);

// --- Synthetic anomaly generators -----------------------------------------

enum class AnomalyKind { kGaussian, kRademacher, kBlobs };
AnomalyKind parse_anomaly_kind(std::string_view name);
std::string_view anomaly_kind_name(AnomalyKind kind);

// One synthetic outlier image. gaussian: per-channel N(0.5, 0.25^2) clipped
// to [0,1]; rademacher: per-channel fair draws from {0,1}; blobs: box-blurred
// uniform noise binarized at its median.
ImageTensor synth_anomaly(AnomalyKind kind, RngStream& stream,
                          Eigen::Index size);

// Writes count PNGs named <kind>_%06d.png under out_dir, one substream per
// image index.
void gen_synthetic_anomalies(AnomalyKind kind, const RngStream& stream,
                             int count, Eigen::Index size,
                             const std::filesystem::path& out_dir);

}  // namespace pixmix
