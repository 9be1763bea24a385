#pragma once

#include <cstdint>
#include <functional>

#include "lttd/num/tape.hpp"

namespace lttd::num {

// Scalar-valued map evaluated on a fresh tape; `x` is a leaf that requires a
// gradient.
using ScalarFunction = std::function<Var<double>(Tape<double>& tape, Var<double> x)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor for the relative error, times max(1, |f(x)|), so
  // coordinates with vanishing gradients are compared on an absolute scale.
  double denominator_floor = 1e-6;
  // Probe at most this many coordinates (chosen by `seed`); <= 0 probes all.
  int64_t max_coords = 0;
  uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int64_t probed = 0;
};

// Compares the reverse-mode gradient of f at x against central differences
// coordinate by coordinate. Throws ParameterError for eps outside
// [1e-7, 1e-3] and NumericError if any evaluation is non-finite.
GradCheckReport gradient_check_report(const ScalarFunction& f, const Tensor<double>& x,
                                      const GradCheckOptions& options = {});

inline double gradient_check(const ScalarFunction& f, const Tensor<double>& x, double eps = 1e-5) {
  GradCheckOptions o;
  o.eps = eps;
  return gradient_check_report(f, x, o).max_rel_err;
}

}  // namespace lttd::num
