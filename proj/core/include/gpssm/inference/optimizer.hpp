#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace gpssm::inference {

/// Adam ascent on a fixed list of parameter blocks.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  explicit Adam(Options options) : options_(options) {}

  /// Moves every block along its gradient. Block count and shapes must stay
  /// the same between calls.
  void ascend(std::span<Eigen::Map<Eigen::MatrixXd>> params,
              std::span<const Eigen::MatrixXd> grads);

  [[nodiscard]] double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  [[nodiscard]] long steps() const { return step_; }

 private:
  Options options_;
  long step_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

/// Rescales `grads` in place so their joint Euclidean norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(std::span<Eigen::MatrixXd> grads, double max_norm);

}  // namespace gpssm::inference
