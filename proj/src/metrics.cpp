#include "pixmix/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pixmix/errors.hpp"

namespace pixmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Eigen::VectorXd softmax_stable(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

PredictionRecord parse_record(const json& doc, std::size_t line_no) {
  auto fail = [line_no](const std::string& msg) -> SchemaError {
    return SchemaError("line " + std::to_string(line_no) + ": " + msg);
  };
  PredictionRecord rec;
  if (!doc.contains("id") || !doc["id"].is_string()) {
    throw fail("missing string field 'id'");
  }
  rec.id = doc["id"].get<std::string>();

  const bool has_probs = doc.contains("probs");
  const bool has_logits = doc.contains("logits");
  if (has_probs == has_logits) {
    throw fail("exactly one of 'probs' or 'logits' is required");
  }
  const json& values = has_probs ? doc["probs"] : doc["logits"];
  if (!values.is_array() || values.empty()) {
    throw fail("'probs'/'logits' must be a nonempty array");
  }
  Eigen::VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw fail("non-numeric probability entry");
    v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
  }
  if (has_logits) {
    rec.probs = softmax_stable(v);
  } else {
    if ((v.array() < 0.0).any()) throw fail("negative probability");
    if (std::abs(v.sum() - 1.0) > 1e-6) {
      throw fail("probabilities must sum to 1 within 1e-6");
    }
    rec.probs = v;
  }

  if (doc.contains("label") && !doc["label"].is_null()) {
    if (!doc["label"].is_number_integer()) throw fail("label must be integer");
    rec.label = doc["label"].get<int>();
    if (*rec.label < 0 || *rec.label >= rec.probs.size()) {
      throw fail("label out of range");
    }
  }

  if (!doc.contains("tags") || !doc["tags"].is_object()) {
    throw fail("missing object field 'tags'");
  }
  const json& tags = doc["tags"];
  if (!tags.contains("split") || !tags["split"].is_string()) {
    throw fail("tags.split is required");
  }
  rec.tags.split = tags["split"].get<std::string>();
  if (tags.contains("corruption") && !tags["corruption"].is_null()) {
    rec.tags.corruption = tags["corruption"].get<std::string>();
  }
  if (tags.contains("severity") && !tags["severity"].is_null()) {
    const int s = tags["severity"].get<int>();
    if (s < 1 || s > 5) throw fail("severity must be in 1..5");
    rec.tags.severity = s;
  }
  if (tags.contains("sequence_id") && !tags["sequence_id"].is_null()) {
    rec.tags.sequence_id = tags["sequence_id"].get<std::string>();
  }
  if (tags.contains("frame_index") && !tags["frame_index"].is_null()) {
    const int f = tags["frame_index"].get<int>();
    if (f < 1) throw fail("frame_index must be >= 1");
    rec.tags.frame_index = f;
  }
  if (tags.contains("temporal") && !tags["temporal"].is_null()) {
    rec.tags.temporal = tags["temporal"].get<bool>();
  }
  if (tags.contains("anomaly") && !tags["anomaly"].is_null()) {
    rec.tags.anomaly = tags["anomaly"].get<bool>();
  }

  if (!rec.tags.anomaly && !rec.label.has_value()) {
    throw fail("in-distribution record without label");
  }
  return rec;
}

}  // namespace

std::vector<PredictionRecord> ingest_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prediction log: " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw DecodeError("prediction log " + path.string() + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(parse_record(doc, line_no));
    if (records.size() > 1 &&
        records.back().probs.size() != records.front().probs.size()) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": class count differs from earlier records");
    }
  }
  return records;
}

int predicted_class(const Eigen::VectorXd& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;  // ties keep the smaller index
  }
  return best;
}

double classification_error(const std::vector<PredictionRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("classification_error: empty record list");
  }
  std::size_t wrong = 0;
  for (const auto& rec : records) {
    if (!rec.label.has_value()) {
      throw std::invalid_argument(
          "classification_error: unlabeled record '" + rec.id + "'");
    }
    if (predicted_class(rec.probs) != *rec.label) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(records.size());
}

Normalizers load_normalizers(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open normalizers file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DecodeError("malformed normalizers " + path.string() + ": " +
                      e.what());
  }
  Normalizers out;
  for (const auto& [corruption, by_severity] : doc.items()) {
    for (const auto& [severity, value] : by_severity.items()) {
      out[corruption][std::stoi(severity)] = value.get<double>();
    }
  }
  return out;
}

MceResult mce(const std::vector<PredictionRecord>& records,
              const std::optional<Normalizers>& normalizers) {
  if (records.empty()) throw std::invalid_argument("mce: empty record list");
  // (corruption, severity) -> error
  std::map<std::string, std::map<int, std::pair<std::size_t, std::size_t>>>
      cells;  // corruption -> severity -> (wrong, total)
  for (const auto& rec : records) {
    if (!rec.tags.corruption.has_value() || !rec.tags.severity.has_value()) {
      throw SchemaError("mce: record '" + rec.id +
                        "' lacks corruption/severity tags");
    }
    if (!rec.label.has_value()) {
      throw SchemaError("mce: unlabeled record '" + rec.id + "'");
    }
    auto& cell = cells[*rec.tags.corruption][*rec.tags.severity];
    if (predicted_class(rec.probs) != *rec.label) ++cell.first;
    ++cell.second;
  }

  MceResult result;
  result.normalized = normalizers.has_value();
  double total = 0.0;
  for (const auto& [corruption, by_severity] : cells) {
    double ce;
    if (normalizers.has_value()) {
      const auto ref_it = normalizers->find(corruption);
      double err_sum = 0.0;
      double ref_sum = 0.0;
      for (const auto& [severity, cell] : by_severity) {
        if (ref_it == normalizers->end() ||
            ref_it->second.find(severity) == ref_it->second.end()) {
          throw std::invalid_argument("mce: normalizers missing " + corruption +
                                      "/" + std::to_string(severity));
        }
        const double ref = ref_it->second.at(severity);
        if (!(ref > 0.0)) {
          throw std::invalid_argument("mce: zero reference error for " +
                                      corruption + "/" +
                                      std::to_string(severity));
        }
        err_sum += static_cast<double>(cell.first) / cell.second;
        ref_sum += ref;
      }
      ce = err_sum / ref_sum;
    } else {
      double sum = 0.0;
      for (const auto& [severity, cell] : by_severity) {
        sum += static_cast<double>(cell.first) / cell.second;
      }
      ce = sum / static_cast<double>(by_severity.size());
    }
    result.per_corruption[corruption] = ce;
    total += ce;
  }
  result.value = total / static_cast<double>(result.per_corruption.size());
  return result;
}

namespace {

// Sorted, validated view of one sequence.
std::vector<PredictionRecord> prepare_sequence(
    std::vector<PredictionRecord> sequence) {
  if (sequence.size() < 2) {
    throw SchemaError("sequence metrics need at least 2 frames");
  }
  for (const auto& rec : sequence) {
    if (!rec.tags.frame_index.has_value()) {
      throw SchemaError("sequence record '" + rec.id + "' lacks frame_index");
    }
  }
  std::sort(sequence.begin(), sequence.end(),
            [](const PredictionRecord& a, const PredictionRecord& b) {
              return *a.tags.frame_index < *b.tags.frame_index;
            });
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (*sequence[i].tags.frame_index != static_cast<int>(i) + 1) {
      throw SchemaError("sequence frame indices must be contiguous from 1");
    }
  }
  const bool temporal = sequence.front().tags.temporal.value_or(true);
  for (const auto& rec : sequence) {
    if (rec.tags.temporal.value_or(true) != temporal) {
      throw SchemaError("sequence mixes temporal and non-temporal flags");
    }
  }
  return sequence;
}

template <typename PairMetric>
double sequence_mean(const std::vector<PredictionRecord>& sorted,
                     PairMetric&& metric) {
  const bool temporal = sorted.front().tags.temporal.value_or(true);
  double sum = 0.0;
  const std::size_t comparisons = sorted.size() - 1;
  for (std::size_t j = 1; j < sorted.size(); ++j) {
    const auto& base = temporal ? sorted[j - 1] : sorted.front();
    sum += metric(base, sorted[j]);
  }
  return sum / static_cast<double>(comparisons);
}

template <typename PairMetric>
ConsistencyResult grouped_sequence_metric(
    const std::vector<PredictionRecord>& records, PairMetric&& metric) {
  if (records.empty()) {
    throw std::invalid_argument("sequence metric: empty record list");
  }
  std::map<std::string, std::map<std::string, std::vector<PredictionRecord>>>
      groups;  // corruption -> sequence_id -> records
  for (const auto& rec : records) {
    if (!rec.tags.corruption.has_value() ||
        !rec.tags.sequence_id.has_value()) {
      throw SchemaError("sequence record '" + rec.id +
                        "' lacks corruption/sequence_id tags");
    }
    groups[*rec.tags.corruption][*rec.tags.sequence_id].push_back(rec);
  }
  ConsistencyResult result;
  double total = 0.0;
  for (auto& [corruption, sequences] : groups) {
    double sum = 0.0;
    for (auto& [sequence_id, seq] : sequences) {
      sum += sequence_mean(prepare_sequence(std::move(seq)), metric);
    }
    const double mean = sum / static_cast<double>(sequences.size());
    result.per_perturbation[corruption] = mean;
    total += mean;
  }
  result.value = total / static_cast<double>(result.per_perturbation.size());
  return result;
}

}  // namespace

double flip_rate(std::vector<PredictionRecord> sequence) {
  const auto sorted = prepare_sequence(std::move(sequence));
  return sequence_mean(sorted, [](const PredictionRecord& a,
                                  const PredictionRecord& b) {
    return predicted_class(a.probs) != predicted_class(b.probs) ? 1.0 : 0.0;
  });
}

ConsistencyResult mfr(const std::vector<PredictionRecord>& records) {
  return grouped_sequence_metric(
      records, [](const PredictionRecord& a, const PredictionRecord& b) {
        return predicted_class(a.probs) != predicted_class(b.probs) ? 1.0 : 0.0;
      });
}

namespace {

// 1-based descending-probability ranks; ties go to the smaller class index.
std::vector<int> probability_ranks(const Eigen::VectorXd& probs) {
  std::vector<int> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  std::vector<int> ranks(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ranks[order[i]] = static_cast<int>(i) + 1;
  }
  return ranks;
}

}  // namespace

double t5d(const Eigen::VectorXd& prev_probs,
           const Eigen::VectorXd& cur_probs) {
  if (prev_probs.size() != cur_probs.size()) {
    throw std::invalid_argument("t5d: class counts differ");
  }
  if (prev_probs.size() < 5) {
    throw std::invalid_argument("t5d: needs at least 5 classes");
  }
  const auto prev_ranks = probability_ranks(prev_probs);
  const auto cur_ranks = probability_ranks(cur_probs);
  double sum = 0.0;
  for (std::size_t c = 0; c < prev_ranks.size(); ++c) {
    if (prev_ranks[c] > 5 && cur_ranks[c] > 5) continue;
    const int capped_prev = std::min(prev_ranks[c], 6);
    const int capped_cur = std::min(cur_ranks[c], 6);
    sum += std::abs(capped_prev - capped_cur);
  }
  return sum;
}

ConsistencyResult mt5d(const std::vector<PredictionRecord>& records) {
  return grouped_sequence_metric(
      records, [](const PredictionRecord& a, const PredictionRecord& b) {
        return t5d(a.probs, b.probs);
      });
}

double rms_calibration_error(const std::vector<PredictionRecord>& records,
                             std::optional<int> bins) {
  if (records.empty()) {
    throw std::invalid_argument("rms_calibration_error: empty record list");
  }
  if (bins.has_value() && *bins < 1) {
    throw std::invalid_argument("rms_calibration_error: bins must be >= 1");
  }
  struct Point {
    double confidence;
    bool correct;
  };
  std::vector<Point> points;
  points.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.label.has_value()) {
      throw std::invalid_argument("rms_calibration_error: unlabeled record '" +
                                  rec.id + "'");
    }
    const int pred = predicted_class(rec.probs);
    points.push_back({rec.probs[pred], pred == *rec.label});
  }
  // Tie order pinned so the result is permutation invariant.
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    if (a.confidence != b.confidence) return a.confidence < b.confidence;
    return a.correct < b.correct;
  });

  const std::size_t n = points.size();
  std::size_t bin_count =
      bins.has_value() ? static_cast<std::size_t>(*bins)
                       : static_cast<std::size_t>(std::floor(std::sqrt(
                             static_cast<double>(n))));
  bin_count = std::clamp<std::size_t>(bin_count, 1, n);

  double acc = 0.0;
  for (std::size_t b = 0; b < bin_count; ++b) {
    const std::size_t lo = b * n / bin_count;
    const std::size_t hi = (b + 1) * n / bin_count;
    if (hi == lo) continue;
    double conf_sum = 0.0;
    double correct_sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      conf_sum += points[i].confidence;
      correct_sum += points[i].correct ? 1.0 : 0.0;
    }
    const double gap =
        correct_sum / (hi - lo) - conf_sum / (hi - lo);
    acc += (static_cast<double>(hi - lo) / n) * gap * gap;
  }
  return std::sqrt(acc);
}

double msp_score(const PredictionRecord& record) {
  return record.probs.maxCoeff();
}

double auroc(const std::vector<double>& in_scores,
             const std::vector<double>& anomaly_scores) {
  if (in_scores.empty() || anomaly_scores.empty()) {
    throw std::invalid_argument("auroc: both score lists must be nonempty");
  }
  struct Scored {
    double score;
    bool in_dist;
  };
  std::vector<Scored> all;
  all.reserve(in_scores.size() + anomaly_scores.size());
  for (double s : in_scores) all.push_back({s, true});
  for (double s : anomaly_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Midranks over tie blocks; rank sum of the in-distribution side.
  double rank_sum_in = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].in_dist) rank_sum_in += midrank;
    }
    i = j;
  }
  const double n_in = static_cast<double>(in_scores.size());
  const double n_anom = static_cast<double>(anomaly_scores.size());
  return (rank_sum_in - n_in * (n_in + 1.0) / 2.0) / (n_in * n_anom);
}

double aupr(const std::vector<double>& in_scores,
            const std::vector<double>& anomaly_scores) {
  if (in_scores.empty() || anomaly_scores.empty()) {
    throw std::invalid_argument("aupr: both score lists must be nonempty");
  }
  struct Scored {
    double score;
    bool positive;  // anomaly
  };
  std::vector<Scored> all;
  all.reserve(in_scores.size() + anomaly_scores.size());
  for (double s : in_scores) all.push_back({s, false});
  for (double s : anomaly_scores) all.push_back({s, true});
  // Most anomalous (lowest MSP) first; equal scores form one threshold step.
  std::sort(all.begin(), all.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });

  const double positives = static_cast<double>(anomaly_scores.size());
  double tp = 0.0;
  double fp = 0.0;
  double ap = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    double block_tp = 0.0;
    double block_fp = 0.0;
    while (j < all.size() && all[j].score == all[i].score) {
      if (all[j].positive) {
        block_tp += 1.0;
      } else {
        block_fp += 1.0;
      }
      ++j;
    }
    tp += block_tp;
    fp += block_fp;
    if (block_tp > 0.0) {
      const double precision = tp / (tp + fp);
      ap += (block_tp / positives) * precision;
    }
    i = j;
  }
  return ap;
}

EvalReport evaluate(const std::vector<PredictionRecord>& records,
                    const EvalOptions& options) {
  EvalReport report;
  report.counts.records = records.size();
  if (!records.empty()) report.counts.class_count = records.front().probs.size();

  std::map<std::string, std::vector<PredictionRecord>> by_split;
  std::vector<double> in_scores;
  std::vector<double> anomaly_scores;
  for (const auto& rec : records) {
    ++report.counts.per_split[rec.tags.split];
    if (rec.tags.anomaly) {
      ++report.counts.anomalies;
      anomaly_scores.push_back(msp_score(rec));
      continue;
    }
    by_split[rec.tags.split].push_back(rec);
    if (rec.tags.split == "clean") in_scores.push_back(msp_score(rec));
  }

  if (auto it = by_split.find("clean"); it != by_split.end()) {
    report.clean_error = classification_error(it->second);
  }
  if (auto it = by_split.find("corruptions"); it != by_split.end()) {
    report.mce = mce(it->second, options.normalizers);
  }
  if (auto it = by_split.find("perturbations"); it != by_split.end()) {
    report.mfr = mfr(it->second);
    if (it->second.front().probs.size() >= 5) {
      report.mt5d = mt5d(it->second);
    }
  }
  for (const auto& [split, recs] : by_split) {
    report.rms_calibration[split] = rms_calibration_error(recs, options.bins);
  }
  if (!in_scores.empty() && !anomaly_scores.empty()) {
    report.auroc = auroc(in_scores, anomaly_scores);
    report.aupr = aupr(in_scores, anomaly_scores);
  }
  return report;
}

std::string report_to_json_string(const EvalReport& report) {
  json doc;
  doc["conventions"] = {
      {"rates_unit", "percent"},
      {"aupr_positive_class", "anomaly"},
      {"msp_convention", "in_distribution_scores_higher"},
      {"mt5d_unit", "rank_displacement"},
  };
  doc["counts"] = {
      {"records", report.counts.records},
      {"anomalies", report.counts.anomalies},
      {"class_count", report.counts.class_count},
      {"per_split", report.counts.per_split},
  };
  auto pct = [](double v) { return 100.0 * v; };
  doc["clean_error"] =
      report.clean_error ? json(pct(*report.clean_error)) : json(nullptr);
  if (report.mce) {
    json per;
    for (const auto& [k, v] : report.mce->per_corruption) per[k] = pct(v);
    doc["mce"] = {{"value", pct(report.mce->value)},
                  {"normalized", report.mce->normalized},
                  {"per_corruption", per}};
  } else {
    doc["mce"] = nullptr;
  }
  if (report.mfr) {
    json per;
    for (const auto& [k, v] : report.mfr->per_perturbation) per[k] = pct(v);
    doc["mfr"] = {{"value", pct(report.mfr->value)},
                  {"per_perturbation", per}};
  } else {
    doc["mfr"] = nullptr;
  }
  if (report.mt5d) {
    json per;
    for (const auto& [k, v] : report.mt5d->per_perturbation) per[k] = v;
    doc["mt5d"] = {{"value", report.mt5d->value},
                   {"per_perturbation", per}};
  } else {
    doc["mt5d"] = nullptr;
  }
  json rms;
  for (const auto& [split, v] : report.rms_calibration) rms[split] = pct(v);
  doc["rms_calibration"] = rms;
  doc["auroc"] = report.auroc ? json(pct(*report.auroc)) : json(nullptr);
  doc["aupr"] = report.aupr ? json(pct(*report.aupr)) : json(nullptr);
  return doc.dump(2) + "\n";
}

void write_per_corruption_csv(const std::vector<PredictionRecord>& records,
                              const fs::path& path) {
  std::map<std::string, std::map<int, std::pair<std::size_t, std::size_t>>>
      cells;
  for (const auto& rec : records) {
    if (!rec.tags.corruption.has_value() || !rec.tags.severity.has_value() ||
        !rec.label.has_value()) {
      continue;
    }
    auto& cell = cells[*rec.tags.corruption][*rec.tags.severity];
    if (predicted_class(rec.probs) != *rec.label) ++cell.first;
    ++cell.second;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path.string());
  out << "corruption,severity,error\n";
  for (const auto& [corruption, by_severity] : cells) {
    for (const auto& [severity, cell] : by_severity) {
      out << corruption << "," << severity << ","
          << static_cast<double>(cell.first) / cell.second << "\n";
    }
  }
}

}  // namespace pixmix
