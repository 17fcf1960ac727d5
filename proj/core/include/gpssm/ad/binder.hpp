#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gpssm/ad/tape.hpp"

namespace gpssm::ad {

/// Places model parameters on a tape, either as differentiable leaves or as
/// constants, and remembers where each parameter lives so an optimizer can
/// write updates back in binding order.
class Binder {
 public:
  struct Slot {
    std::string name;
    const double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Var var;
  };

  explicit Binder(Tape& tape, bool trainable = true) : tape_(&tape), trainable_(trainable) {}

  Var bind(const std::string& name, const double& value) { return bind(name, &value, 1, 1); }

  template <typename Derived>
  Var bind(const std::string& name, const Eigen::PlainObjectBase<Derived>& value) {
    return bind(name, value.data(), value.rows(), value.cols());
  }

  Var bind(const std::string& name, const double* data, Eigen::Index rows, Eigen::Index cols) {
    // Eigen storage is column-major for every parameter we bind.
    Array value = Eigen::Map<const Array>(data, rows, cols);
    const Var var = trainable_ ? tape_->leaf(std::move(value)) : tape_->constant(std::move(value));
    if (trainable_) slots_.push_back({name, data, rows, cols, var});
    return var;
  }

  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] bool trainable() const { return trainable_; }
  [[nodiscard]] const std::vector<Slot>& slots() const { return slots_; }

  [[nodiscard]] std::vector<Var> leaves() const {
    std::vector<Var> out;
    out.reserve(slots_.size());
    for (const Slot& s : slots_) out.push_back(s.var);
    return out;
  }

 private:
  Tape* tape_;
  bool trainable_;
  std::vector<Slot> slots_;
};

}  // namespace gpssm::ad
