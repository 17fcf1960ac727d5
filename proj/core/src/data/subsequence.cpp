#include "gpssm/data/subsequence.hpp"

#include <algorithm>
#include <string>

#include "gpssm/error.hpp"

namespace gpssm::data {

Window make_window(const std::vector<Trajectory>& trajectories, int trajectory, int start,
                   int length) {
  const Trajectory& t = trajectories.at(static_cast<std::size_t>(trajectory));
  if (start < 0 || length < 1 || start + length > t.length()) {
    throw ShapeError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside trajectory of length " + std::to_string(t.length()));
  }
  return {trajectory, start, t.u.middleRows(start, length), t.y.middleRows(start, length)};
}

SubsequenceSampler::SubsequenceSampler(const std::vector<Trajectory>& trajectories, int length,
                                       int batch, std::uint64_t seed)
    : trajectories_(&trajectories), length_(length), batch_(batch), rng_(make_rng(seed, 5)) {
  if (trajectories.empty()) throw DataError("subsequences: no trajectories");
  if (length < 2 || batch < 1) throw ConfigError("subsequences: need length >= 2 and batch >= 1");
  offsets_.push_back(0);
  int shortest = trajectories.front().length();
  for (const Trajectory& t : trajectories) {
    shortest = std::min(shortest, t.length());
    offsets_.push_back(offsets_.back() + std::max(0, t.length() - length + 1));
  }
  if (length > shortest) {
    throw ConfigError("subsequences: length " + std::to_string(length) +
                      " exceeds the shortest trajectory (" + std::to_string(shortest) + ")");
  }
}

std::vector<Window> SubsequenceSampler::next() {
  std::uniform_int_distribution<long> pick(0, offsets_.back() - 1);
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(batch_));
  for (int b = 0; b < batch_; ++b) {
    const long k = pick(rng_);
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
    const int traj = static_cast<int>(it - offsets_.begin()) - 1;
    out.push_back(
        make_window(*trajectories_, traj, static_cast<int>(k - offsets_[traj]), length_));
  }
  return out;
}

}  // namespace gpssm::data
