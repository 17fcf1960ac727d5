#include "gpssm/gp/kernel.hpp"

#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::gp {

Kernel Kernel::se_ard(double variance, const Eigen::RowVectorXd& lengthscales) {
  if (!(variance > 0.0) || !(lengthscales.array() > 0.0).all()) {
    throw ConfigError("kernel: variance and lengthscales must be positive");
  }
  Kernel k;
  k.log_variance = std::log(variance);
  k.log_lengthscales = lengthscales.array().log().matrix();
  return k;
}

Kernel Kernel::se_ard(double variance, double lengthscale, int input_dim) {
  return se_ard(variance, Eigen::RowVectorXd::Constant(input_dim, lengthscale));
}

double Kernel::variance() const { return std::exp(log_variance); }

Eigen::RowVectorXd Kernel::lengthscales() const {
  return log_lengthscales.array().exp().matrix();
}

KernelVars bind(ad::Binder& binder, const Kernel& kernel, const std::string& prefix) {
  return {binder.bind(prefix + ".log_variance", kernel.log_variance),
          binder.bind(prefix + ".log_lengthscales", kernel.log_lengthscales)};
}

ad::Var kernel_matrix(const KernelVars& kernel, ad::Var x, ad::Var x2) {
  const Eigen::Index d = kernel.log_lengthscales.cols();
  if (x.cols() != d || x2.cols() != d) {
    throw ShapeError("kernel_matrix: inputs have " + std::to_string(x.cols()) + " and " +
                     std::to_string(x2.cols()) + " columns, kernel expects " + std::to_string(d));
  }
  const ad::Var inv_ls = ad::exp(-kernel.log_lengthscales);
  const ad::Var xs = x * ad::repeat_rows(inv_ls, x.rows());
  const ad::Var x2s = x2.id() == x.id() ? xs : x2 * ad::repeat_rows(inv_ls, x2.rows());
  return ad::exp(kernel.log_variance) * ad::exp(ad::sq_dist(xs, x2s) * -0.5);
}

ad::Var kernel_diag(const KernelVars& kernel, Eigen::Index n) {
  const ad::Var var = ad::exp(kernel.log_variance);
  return ad::repeat_rows(var, n);
}

Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x2) {
  ad::Tape tape;
  ad::Binder binder(tape, false);
  const KernelVars vars = gp::bind(binder, kernel, "k");
  return kernel_matrix(vars, tape.constant(x), tape.constant(x2)).value();
}

double kernel_value(const Kernel& kernel, const Eigen::RowVectorXd& a,
                    const Eigen::RowVectorXd& b) {
  if (a.size() != kernel.input_dim() || b.size() != kernel.input_dim()) {
    throw ShapeError("kernel_value: dimension mismatch");
  }
  const Eigen::RowVectorXd scaled = (a - b).array() / kernel.lengthscales().array();
  return kernel.variance() * std::exp(-0.5 * scaled.squaredNorm());
}

Eigen::VectorXd MeanFunction::evaluate(const Eigen::MatrixXd& x) const {
  switch (kind) {
    case Kind::Zero:
      return Eigen::VectorXd::Zero(x.rows());
    case Kind::Constant:
      return Eigen::VectorXd::Constant(x.rows(), constant);
    case Kind::Identity:
      if (input_index < 0 || input_index >= x.cols()) {
        throw ShapeError("mean function: identity index out of range");
      }
      return x.col(input_index);
    case Kind::Linear:
      if (weights.size() != x.cols()) throw ShapeError("mean function: linear weight count");
      return x * weights;
  }
  return {};
}

ad::Var mean_values(const MeanFunction& mean, ad::Var x) {
  ad::Tape& tape = *x.tape();
  switch (mean.kind) {
    case MeanFunction::Kind::Zero:
      return tape.constant(Eigen::MatrixXd::Zero(x.rows(), 1));
    case MeanFunction::Kind::Constant:
      return tape.constant(Eigen::MatrixXd::Constant(x.rows(), 1, mean.constant));
    case MeanFunction::Kind::Identity:
      if (mean.input_index < 0 || mean.input_index >= x.cols()) {
        throw ShapeError("mean function: identity index out of range");
      }
      return ad::col(x, mean.input_index);
    case MeanFunction::Kind::Linear:
      if (mean.weights.size() != x.cols()) {
        throw ShapeError("mean function: linear weight count");
      }
      return ad::matmul(x, tape.constant(Eigen::MatrixXd(mean.weights)));
  }
  return {};
}

}  // namespace gpssm::gp
