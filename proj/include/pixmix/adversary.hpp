#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "pixmix/rng.hpp"

namespace pixmix {

enum class ModelKind { kLinear, kMlp2 };

inline constexpr int kMlp2HiddenWidth = 32;

// Small differentiable classifier: either logits = W1 x + b1, or a
// one-hidden-layer tanh network logits = W2 tanh(W1 x + b1) + b2.
struct ToyModel {
  ModelKind kind = ModelKind::kLinear;
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // mlp2 only
  Eigen::VectorXd b2;  // mlp2 only

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index class_count() const {
    return kind == ModelKind::kLinear ? w1.rows() : w2.rows();
  }
};

ToyModel make_linear(Eigen::MatrixXd w, Eigen::VectorXd b);
ToyModel make_mlp2(Eigen::MatrixXd w1, Eigen::VectorXd b1, Eigen::MatrixXd w2,
                   Eigen::VectorXd b2);

// Random model with N(0,1)/sqrt(fan_in) weights; mlp2 uses the pinned
// 32-unit hidden layer.
ToyModel random_model(RngStream& stream, ModelKind kind,
                      Eigen::Index input_dim, Eigen::Index class_count);

Eigen::VectorXd forward(const ToyModel& model, const Eigen::VectorXd& x);

// Cross-entropy in the stable logsumexp form.
double loss_ce(const Eigen::VectorXd& logits, int label);

// Exact gradient of loss_ce(forward(model, x), label) with respect to x.
Eigen::VectorXd grad_input(const ToyModel& model, const Eigen::VectorXd& x,
                           int label);

struct AttackConfig {
  double epsilon = 2.0 / 255.0;
  int steps = 20;
  std::optional<double> step_size;  // defaults to 2.5 * epsilon / steps
  bool random_start = true;
  std::pair<double, double> input_range = {0.0, 1.0};

  double resolved_step_size() const {
    if (step_size.has_value()) return *step_size;
    return steps > 0 ? 2.5 * epsilon / steps : 0.0;
  }
};

// Untargeted l_inf PGD: optional uniform start in [-eps, eps], then
// steps of x += step * sign(grad) projected onto the epsilon ball and the
// input range. sign(0) = 0, so a zero gradient is a fixed point.
Eigen::VectorXd pgd_attack(const ToyModel& model, const Eigen::VectorXd& x,
                           int label, const AttackConfig& config,
                           RngStream& stream);

struct Example {
  Eigen::VectorXd x;
  int label = 0;
};
using Dataset = std::vector<Example>;

double clean_error(const ToyModel& model, const Dataset& dataset);

// Error rate after attacking each example with its own substream
// split(stream, index); parallel runs reproduce the serial result.
double adversarial_error(const ToyModel& model, const Dataset& dataset,
                         const AttackConfig& config, const RngStream& stream,
                         int workers = 1);

// JSON model file: {"kind":"linear","W":[[..]],"b":[..]} or
// {"kind":"mlp2","W1":[[..]],"b1":[..],"W2":[[..]],"b2":[..]}.
ToyModel load_model(const std::filesystem::path& path);
void save_model(const ToyModel& model, const std::filesystem::path& path);

// JSON dataset file: {"examples":[{"x":[..],"label":0}, ...]}.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace pixmix
