#pragma once

#include <functional>
#include <string>

#include "lttd/num/gradcheck.hpp"
#include "lttd/params.hpp"

namespace lttd {

// Scalar loss built on a fresh tape from bound parameters.
using ParamFunction =
    std::function<Var<double>(num::Tape<double>& tape, const BoundParams<double>& params)>;

struct ParamGradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int64_t probed = 0;
};

// Central-difference check of every parameter tensor. `options.max_coords`
// bounds the probes per tensor (chosen with `options.seed`).
ParamGradCheckReport param_gradient_check(const ParamFunction& f, const ParamSet<double>& params,
                                          const num::GradCheckOptions& options = {});

}  // namespace lttd

namespace lttd {

// Adds N(0, scale²) noise to every element, so that zero-initialized
// projections stop masking upstream gradients.
template <typename T>
ParamSet<T> jittered(const ParamSet<T>& params, uint64_t seed, double scale) {
  ParamSet<T> out = params;
  num::Rng rng(seed);
  for (Tensor<T>& t : out.tensors) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] += static_cast<T>(rng.normal() * scale);
  }
  return out;
}

}  // namespace lttd
