#include "gpssm/inference/optimizer.hpp"

#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::inference {

void Adam::ascend(std::span<Eigen::Map<Eigen::MatrixXd>> params,
                  std::span<const Eigen::MatrixXd> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed");
  ++step_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols() ||
        m_[i].rows() != params[i].rows() || m_[i].cols() != params[i].cols()) {
      throw ShapeError("adam: block " + std::to_string(i) + " changed shape");
    }
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * grads[i];
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * grads[i].cwiseAbs2();
    params[i].array() += options_.learning_rate * (m_[i].array() / c1) /
                         ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
}

double clip_global_norm(std::span<Eigen::MatrixXd> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    for (auto& g : grads) g *= max_norm / norm;
  }
  return norm;
}

}  // namespace gpssm::inference
