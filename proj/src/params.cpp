#include "lttd/params.hpp"

#include <cmath>
#include <cstring>

namespace lttd {

void ParamLayout::add(std::string name, Shape shape, Init init) {
  if (index_.count(name)) throw ParameterError("duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(shape), init});
}

size_t ParamLayout::index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ParameterError("unknown parameter " + std::string(name));
  return it->second;
}

bool ParamLayout::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

int64_t ParamLayout::total_elements() const {
  int64_t n = 0;
  for (const ParamEntry& e : entries_) n += num::shape_numel(e.shape);
  return n;
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros(std::shared_ptr<const ParamLayout> layout) {
  ParamSet<T> out;
  out.layout = std::move(layout);
  for (const ParamEntry& e : out.layout->entries()) out.tensors.emplace_back(e.shape);
  return out;
}

template <typename T>
ParamSet<T> ParamSet<T>::initialized(std::shared_ptr<const ParamLayout> layout, uint64_t seed,
                                     double init_std) {
  ParamSet<T> out = zeros(std::move(layout));
  num::Rng rng(seed);
  for (size_t i = 0; i < out.tensors.size(); ++i) {
    Tensor<T>& t = out.tensors[i];
    switch (out.layout->entries()[i].init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        t.fill(T(1));
        break;
      case Init::kTruncNormal:
        for (int64_t j = 0; j < t.numel(); ++j) t[j] = static_cast<T>(rng.truncated_normal(init_std));
        break;
      case Init::kLinearFanIn:
      case Init::kConvFanIn: {
        const int64_t fan_in =
            out.layout->entries()[i].init == Init::kLinearFanIn ? t.dim(0) : t.numel() / t.dim(0);
        const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int64_t j = 0; j < t.numel(); ++j) t[j] = static_cast<T>(rng.truncated_normal(std));
        break;
      }
    }
  }
  return out;
}

template <typename T>
uint64_t ParamSet<T>::checksum() const {
  uint64_t h = 1469598103934665603ULL;
  for (const Tensor<T>& t : tensors) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (size_t i = 0; i < static_cast<size_t>(t.numel()) * sizeof(T); ++i) {
      h = (h ^ bytes[i]) * 1099511628211ULL;
    }
  }
  return h;
}

template <typename T>
BoundParams<T>::BoundParams(num::Tape<T>& tape, const ParamSet<T>& params, bool requires_grad)
    : layout_(params.layout) {
  vars_.reserve(params.tensors.size());
  for (const Tensor<T>& t : params.tensors) vars_.push_back(tape.leaf(t, requires_grad));
}

template <typename T>
ParamSet<T> BoundParams<T>::gradients() const {
  ParamSet<T> out;
  out.layout = layout_;
  for (const Var<T>& v : vars_) out.tensors.push_back(v.tape->grad(v));
  return out;
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template class BoundParams<float>;
template class BoundParams<double>;

}  // namespace lttd
