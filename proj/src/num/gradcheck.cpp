#include "lttd/num/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lttd/num/rng.hpp"

namespace lttd::num {

namespace {

double evaluate(const ScalarFunction& f, const Tensor<double>& x) {
  Tape<double> tape;
  Var<double> xv = tape.leaf(x, false);
  const double v = f(tape, xv).value().item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport gradient_check_report(const ScalarFunction& f, const Tensor<double>& x,
                                      const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ParameterError("gradient_check: eps must lie in [1e-7, 1e-3]");
  }
  Tensor<double> analytic;
  double value = 0.0;
  {
    Tape<double> tape;
    Var<double> xv = tape.leaf(x, true);
    Var<double> y = f(tape, xv);
    if (y.numel() != 1) throw DimensionError("gradient_check: f must be scalar-valued");
    if (!std::isfinite(y.value()[0])) throw NumericError("gradient_check: non-finite value");
    tape.backward(y);
    analytic = tape.grad(xv);
    value = y.value()[0];
  }

  std::vector<int64_t> coords(static_cast<size_t>(x.numel()));
  std::iota(coords.begin(), coords.end(), 0);
  if (options.max_coords > 0 && options.max_coords < x.numel()) {
    Rng rng(options.seed);
    for (size_t i = coords.size(); i > 1; --i) std::swap(coords[i - 1], coords[rng.below(i)]);
    coords.resize(static_cast<size_t>(options.max_coords));
    std::sort(coords.begin(), coords.end());
  }

  // Central-difference roundoff grows with |f|, so the floor does too.
  const double floor = options.denominator_floor * std::max(1.0, std::abs(value));
  GradCheckReport report;
  Tensor<double> probe = x;
  for (int64_t i : coords) {
    const double orig = probe[i];
    probe[i] = orig + options.eps;
    const double up = evaluate(f, probe);
    probe[i] = orig - options.eps;
    const double down = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.probed;
    if (rel > report.max_rel_err || report.worst_index < 0) {
      report.max_rel_err = std::max(rel, report.max_rel_err);
      report.worst_index = i;
      report.analytic = a;
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace lttd::num
