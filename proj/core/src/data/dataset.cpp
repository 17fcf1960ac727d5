#include "gpssm/data/dataset.hpp"

#include <cmath>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::data {

void Trajectory::validate() const {
  const auto t = y.rows();
  if (t < 2) {
    throw DataError("trajectory '" + source + "': needs at least 2 steps, has " +
                    std::to_string(t));
  }
  if (u.rows() != t) {
    throw DataError("trajectory '" + source + "': " + std::to_string(u.rows()) +
                    " control rows vs " + std::to_string(t) + " output rows");
  }
  if (x.size() > 0 && x.rows() != t) {
    throw DataError("trajectory '" + source + "': latent length differs from outputs");
  }
  if (!y.allFinite() || !u.allFinite() || !x.allFinite()) {
    throw DataError("trajectory '" + source + "': non-finite values");
  }
}

namespace {

void channel_stats(const std::vector<const Eigen::MatrixXd*>& blocks, Eigen::Index cols,
                   Eigen::RowVectorXd& mean, Eigen::RowVectorXd& std) {
  mean = Eigen::RowVectorXd::Zero(cols);
  std = Eigen::RowVectorXd::Constant(cols, kStdFloor);
  long n = 0;
  for (const auto* b : blocks) {
    mean += b->colwise().sum();
    n += b->rows();
  }
  if (n == 0 || cols == 0) return;
  mean /= static_cast<double>(n);
  Eigen::RowVectorXd ss = Eigen::RowVectorXd::Zero(cols);
  for (const auto* b : blocks) ss += (b->rowwise() - mean).array().square().colwise().sum().matrix();
  std = (ss / static_cast<double>(n)).array().sqrt().max(kStdFloor).matrix();
}

}  // namespace

NormalizationStats compute_stats(const std::vector<Trajectory>& train) {
  if (train.empty()) throw DataError("normalization: empty training split");
  std::vector<const Eigen::MatrixXd*> us;
  std::vector<const Eigen::MatrixXd*> ys;
  for (const Trajectory& t : train) {
    us.push_back(&t.u);
    ys.push_back(&t.y);
  }
  NormalizationStats s;
  channel_stats(us, train.front().u.cols(), s.u_mean, s.u_std);
  channel_stats(ys, train.front().y.cols(), s.y_mean, s.y_std);
  return s;
}

void Dataset::validate() const {
  if (train.empty()) throw DataError("dataset '" + meta.name + "': no training trajectories");
  for (const auto* split : {&train, &test}) {
    for (const Trajectory& t : *split) {
      t.validate();
      if (t.d_u() != meta.d_u || t.d_y() != meta.d_y) {
        throw DataError("dataset '" + meta.name + "': trajectory '" + t.source +
                        "' has dimensions (d_u=" + std::to_string(t.d_u()) +
                        ", d_y=" + std::to_string(t.d_y()) + ")");
      }
    }
  }
  if (meta.lag < 1) throw ConfigError("dataset '" + meta.name + "': lag must be >= 1");
}

long Dataset::train_steps() const {
  long n = 0;
  for (const Trajectory& t : train) n += t.length();
  return n;
}

Dataset make_dataset(std::vector<Trajectory> train, std::vector<Trajectory> test,
                     DatasetMeta meta) {
  Dataset d;
  d.train = std::move(train);
  d.test = std::move(test);
  d.meta = std::move(meta);
  d.validate();
  d.stats = compute_stats(d.train);
  return d;
}

Trajectory normalize(const Trajectory& traj, const NormalizationStats& s) {
  Trajectory out = traj;
  if (traj.d_u() > 0) {
    out.u = ((traj.u.rowwise() - s.u_mean).array().rowwise() / s.u_std.array()).matrix();
  }
  out.y = ((traj.y.rowwise() - s.y_mean).array().rowwise() / s.y_std.array()).matrix();
  return out;
}

Trajectory denormalize(const Trajectory& traj, const NormalizationStats& s) {
  Trajectory out = traj;
  if (traj.d_u() > 0) {
    out.u = ((traj.u.array().rowwise() * s.u_std.array()).matrix().rowwise() + s.u_mean);
  }
  out.y = denormalize_mean(traj.y, s);
  return out;
}

Dataset normalize(const Dataset& dataset) {
  if (dataset.normalized) return dataset;
  Dataset out = dataset;
  for (Trajectory& t : out.train) t = normalize(t, dataset.stats);
  for (Trajectory& t : out.test) t = normalize(t, dataset.stats);
  out.normalized = true;
  return out;
}

Eigen::MatrixXd denormalize_mean(const Eigen::MatrixXd& mean, const NormalizationStats& s) {
  if (mean.cols() != s.y_std.size()) throw ShapeError("denormalize: output width mismatch");
  return (mean.array().rowwise() * s.y_std.array()).matrix().rowwise() + s.y_mean;
}

Eigen::MatrixXd denormalize_variance(const Eigen::MatrixXd& var, const NormalizationStats& s) {
  if (var.cols() != s.y_std.size()) throw ShapeError("denormalize: output width mismatch");
  return (var.array().rowwise() * s.y_std.array().square()).matrix();
}

}  // namespace gpssm::data
