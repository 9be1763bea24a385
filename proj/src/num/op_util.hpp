#pragma once

#include <string>

#include "lttd/errors.hpp"
#include "lttd/num/tape.hpp"

namespace lttd::num::detail {

template <typename T>
Tape<T>& tape_of(Var<T> v, const char* op) {
  if (!v.valid()) throw std::logic_error(std::string(op) + ": invalid operand");
  return *v.tape;
}

template <typename T>
void same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape) throw std::logic_error(std::string(op) + ": operands on different tapes");
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// g_in += g (same shape).
template <typename T>
void add_into(Tensor<T>* g_in, const Tensor<T>& g) {
  if (g_in == nullptr) return;
  T* dst = g_in->data();
  const T* src = g.data();
  const int64_t n = g.numel();
  for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace lttd::num::detail

#define LTTD_INSTANTIATE_FLOATING(MACRO) \
  MACRO(float)                           \
  MACRO(double)
