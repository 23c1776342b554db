#include "pixmix/adversary.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pixmix/errors.hpp"
#include "pixmix/parallel.hpp"

namespace pixmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("ToyModel: non-finite ") + what);
  }
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

ToyModel make_linear(Eigen::MatrixXd w, Eigen::VectorXd b) {
  if (w.rows() < 2 || w.rows() != b.size()) {
    throw std::invalid_argument("make_linear: need >= 2 classes and matching bias");
  }
  check_finite(w, "weights");
  check_finite(b, "bias");
  ToyModel model;
  model.kind = ModelKind::kLinear;
  model.w1 = std::move(w);
  model.b1 = std::move(b);
  return model;
}

ToyModel make_mlp2(Eigen::MatrixXd w1, Eigen::VectorXd b1, Eigen::MatrixXd w2,
                   Eigen::VectorXd b2) {
  if (w2.rows() < 2 || w2.rows() != b2.size() || w1.rows() != b1.size() ||
      w2.cols() != w1.rows()) {
    throw std::invalid_argument("make_mlp2: inconsistent layer shapes");
  }
  check_finite(w1, "weights");
  check_finite(b1, "bias");
  check_finite(w2, "weights");
  check_finite(b2, "bias");
  ToyModel model;
  model.kind = ModelKind::kMlp2;
  model.w1 = std::move(w1);
  model.b1 = std::move(b1);
  model.w2 = std::move(w2);
  model.b2 = std::move(b2);
  return model;
}

ToyModel random_model(RngStream& stream, ModelKind kind,
                      Eigen::Index input_dim, Eigen::Index class_count) {
  auto normal_matrix = [&stream](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = scale * stream.next_normal();
      }
    }
    return m;
  };
  if (kind == ModelKind::kLinear) {
    return make_linear(normal_matrix(class_count, input_dim),
                       normal_matrix(class_count, 1).col(0));
  }
  return make_mlp2(normal_matrix(kMlp2HiddenWidth, input_dim),
                   normal_matrix(kMlp2HiddenWidth, 1).col(0),
                   normal_matrix(class_count, kMlp2HiddenWidth),
                   normal_matrix(class_count, 1).col(0));
}

Eigen::VectorXd forward(const ToyModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  if (model.kind == ModelKind::kLinear) {
    return model.w1 * x + model.b1;
  }
  const Eigen::VectorXd hidden = (model.w1 * x + model.b1).array().tanh();
  return model.w2 * hidden + model.b2;
}

double loss_ce(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument("loss_ce: label out of range");
  }
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits[label];
}

Eigen::VectorXd grad_input(const ToyModel& model, const Eigen::VectorXd& x,
                           int label) {
  if (label < 0 || label >= model.class_count()) {
    throw std::invalid_argument("grad_input: label out of range");
  }
  if (model.kind == ModelKind::kLinear) {
    const Eigen::VectorXd logits = model.w1 * x + model.b1;
    const double m = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - m).exp();
    p /= p.sum();
    p[label] -= 1.0;
    return model.w1.transpose() * p;
  }
  const Eigen::VectorXd pre = model.w1 * x + model.b1;
  const Eigen::VectorXd hidden = pre.array().tanh();
  const Eigen::VectorXd logits = model.w2 * hidden + model.b2;
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  p /= p.sum();
  p[label] -= 1.0;
  const Eigen::VectorXd d_hidden = model.w2.transpose() * p;
  const Eigen::VectorXd d_pre =
      d_hidden.array() * (1.0 - hidden.array().square());
  return model.w1.transpose() * d_pre;
}

Eigen::VectorXd pgd_attack(const ToyModel& model, const Eigen::VectorXd& x,
                           int label, const AttackConfig& config,
                           RngStream& stream) {
  if (config.epsilon < 0.0) {
    throw std::invalid_argument("pgd_attack: epsilon must be >= 0");
  }
  if (config.steps < 0) {
    throw std::invalid_argument("pgd_attack: steps must be >= 0");
  }
  const double step = config.resolved_step_size();
  if (config.steps > 0 && !(step > 0.0)) {
    throw std::invalid_argument("pgd_attack: step_size must be > 0");
  }
  const auto [lo, hi] = config.input_range;
  const double eps = config.epsilon;

  Eigen::VectorXd x_adv = x;
  if (config.random_start && eps > 0.0) {
    for (Eigen::Index i = 0; i < x_adv.size(); ++i) {
      x_adv[i] += eps * (2.0 * stream.next_uniform() - 1.0);
    }
    x_adv = x_adv.cwiseMax(lo).cwiseMin(hi);
  }
  for (int s = 0; s < config.steps; ++s) {
    const Eigen::VectorXd g = grad_input(model, x_adv, label);
    x_adv += step * g.array().sign().matrix();
    x_adv = x_adv.cwiseMax((x.array() - eps).matrix()).cwiseMin((x.array() + eps).matrix());
    x_adv = x_adv.cwiseMax(lo).cwiseMin(hi);
  }
  return x_adv;
}

double clean_error(const ToyModel& model, const Dataset& dataset) {
  if (dataset.empty()) {
    throw std::invalid_argument("clean_error: empty dataset");
  }
  std::size_t wrong = 0;
  for (const auto& ex : dataset) {
    if (argmax(forward(model, ex.x)) != ex.label) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

double adversarial_error(const ToyModel& model, const Dataset& dataset,
                         const AttackConfig& config, const RngStream& stream,
                         int workers) {
  if (dataset.empty()) {
    throw std::invalid_argument("adversarial_error: empty dataset");
  }
  std::atomic<std::size_t> wrong{0};
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    RngStream sub = stream.split(static_cast<std::uint64_t>(i));
    const Eigen::VectorXd x_adv =
        pgd_attack(model, dataset[i].x, dataset[i].label, config, sub);
    if (argmax(forward(model, x_adv)) != dataset[i].label) {
      wrong.fetch_add(1);
    }
  });
  return static_cast<double>(wrong.load()) /
         static_cast<double>(dataset.size());
}

namespace {

Eigen::MatrixXd matrix_from_json(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
    throw SchemaError(std::string("model file: ") + what +
                      " must be a nonempty 2d array");
  }
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw SchemaError(std::string("model file: ragged rows in ") + what);
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(r, c) = rows[r][c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& values, const char* what) {
  if (!values.is_array() || values.empty()) {
    throw SchemaError(std::string("model file: ") + what +
                      " must be a nonempty array");
  }
  Eigen::VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json values = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) values.push_back(v[i]);
  return values;
}

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(std::string("cannot open ") + what + ": " + path.string());
  }
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed ") + what + " " + path.string() +
                      ": " + e.what());
  }
}

}  // namespace

ToyModel load_model(const fs::path& path) {
  const json doc = read_json_file(path, "model file");
  const std::string kind = doc.value("kind", "");
  if (kind == "linear") {
    return make_linear(matrix_from_json(doc.at("W"), "W"),
                       vector_from_json(doc.at("b"), "b"));
  }
  if (kind == "mlp2") {
    return make_mlp2(matrix_from_json(doc.at("W1"), "W1"),
                     vector_from_json(doc.at("b1"), "b1"),
                     matrix_from_json(doc.at("W2"), "W2"),
                     vector_from_json(doc.at("b2"), "b2"));
  }
  throw SchemaError("model file " + path.string() +
                    ": kind must be 'linear' or 'mlp2'");
}

void save_model(const ToyModel& model, const fs::path& path) {
  json doc;
  if (model.kind == ModelKind::kLinear) {
    doc = {{"kind", "linear"},
           {"W", matrix_to_json(model.w1)},
           {"b", vector_to_json(model.b1)}};
  } else {
    doc = {{"kind", "mlp2"},
           {"W1", matrix_to_json(model.w1)},
           {"b1", vector_to_json(model.b1)},
           {"W2", matrix_to_json(model.w2)},
           {"b2", vector_to_json(model.b2)}};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path.string());
  out << doc.dump(2) << "\n";
}

Dataset load_dataset(const fs::path& path) {
  const json doc = read_json_file(path, "data file");
  if (!doc.contains("examples") || !doc["examples"].is_array() ||
      doc["examples"].empty()) {
    throw SchemaError("data file " + path.string() +
                      ": needs a nonempty 'examples' array");
  }
  Dataset dataset;
  for (const auto& e : doc["examples"]) {
    Example ex;
    ex.x = vector_from_json(e.at("x"), "x");
    ex.label = e.at("label").get<int>();
    if (ex.label < 0) {
      throw SchemaError("data file " + path.string() + ": negative label");
    }
    if (!dataset.empty() && ex.x.size() != dataset.front().x.size()) {
      throw SchemaError("data file " + path.string() +
                        ": inconsistent feature dimensions");
    }
    dataset.push_back(std::move(ex));
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
  json examples = json::array();
  for (const auto& ex : dataset) {
    examples.push_back({{"x", vector_to_json(ex.x)}, {"label", ex.label}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write data file: " + path.string());
  out << json{{"examples", examples}}.dump(2) << "\n";
}

}  // namespace pixmix
