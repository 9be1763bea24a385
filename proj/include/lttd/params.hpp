#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lttd/num/rng.hpp"
#include "lttd/num/tape.hpp"

namespace lttd {

using num::Shape;
using num::Tensor;
using num::Var;

// Fan-in inits draw a truncated normal with std 1/sqrt(fan_in): linear
// weights are [in, out] (fan_in = dim 0), conv kernels are [out, in, k...]
// (fan_in = numel / dim 0).
enum class Init { kTruncNormal, kLinearFanIn, kConvFanIn, kZeros, kOnes };

struct ParamEntry {
  std::string name;
  Shape shape;
  Init init;
};

// Ordered catalogue of named learnable tensors. Order is fixed at
// construction and defines iteration, checkpoint, and reduction order.
class ParamLayout {
 public:
  void add(std::string name, Shape shape, Init init);
  const std::vector<ParamEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  // Index of `name`; throws ParameterError naming it when absent.
  size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;
  int64_t total_elements() const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// One tensor per layout entry. Also used for gradients and optimizer moments.
template <typename T>
struct ParamSet {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<Tensor<T>> tensors;

  static ParamSet zeros(std::shared_ptr<const ParamLayout> layout);
  // Truncated normal (σ = init_std) / zeros / ones per entry.
  static ParamSet initialized(std::shared_ptr<const ParamLayout> layout, uint64_t seed,
                              double init_std = 0.02);

  Tensor<T>& operator[](std::string_view name) { return tensors[layout->index(name)]; }
  const Tensor<T>& operator[](std::string_view name) const { return tensors[layout->index(name)]; }
  size_t size() const { return tensors.size(); }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.layout = layout;
    for (const Tensor<T>& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }

  // FNV-1a over the raw bytes of every tensor, in layout order.
  uint64_t checksum() const;
};

// Parameters registered as leaves on one tape.
template <typename T>
class BoundParams {
 public:
  BoundParams(num::Tape<T>& tape, const ParamSet<T>& params, bool requires_grad);

  Var<T> operator()(std::string_view name) const { return vars_[layout_->index(name)]; }
  const std::vector<Var<T>>& vars() const { return vars_; }
  const ParamLayout& layout() const { return *layout_; }

  // Gradients accumulated on the tape, in layout order (zeros where none).
  ParamSet<T> gradients() const;

 private:
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<Var<T>> vars_;
};

}  // namespace lttd
