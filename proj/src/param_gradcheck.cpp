#include "lttd/param_gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lttd {

namespace {

double evaluate(const ParamFunction& f, const ParamSet<double>& params) {
  num::Tape<double> tape;
  BoundParams<double> bound(tape, params, false);
  const double v = f(tape, bound).value().item();
  if (!std::isfinite(v)) throw NumericError("param_gradient_check: non-finite function value");
  return v;
}

}  // namespace

ParamGradCheckReport param_gradient_check(const ParamFunction& f, const ParamSet<double>& params,
                                          const num::GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ParameterError("param_gradient_check: eps must lie in [1e-7, 1e-3]");
  }
  ParamSet<double> analytic;
  double value = 0.0;
  {
    num::Tape<double> tape;
    BoundParams<double> bound(tape, params, true);
    Var<double> y = f(tape, bound);
    if (y.numel() != 1) throw DimensionError("param_gradient_check: f must be scalar-valued");
    tape.backward(y);
    analytic = bound.gradients();
    value = y.value()[0];
  }

  // Central-difference roundoff grows with |f|, so the floor does too.
  const double floor = options.denominator_floor * std::max(1.0, std::abs(value));
  ParamGradCheckReport report;
  ParamSet<double> probe = params;
  num::Rng rng(options.seed);
  for (size_t p = 0; p < probe.size(); ++p) {
    Tensor<double>& tensor = probe.tensors[p];
    std::vector<int64_t> coords(static_cast<size_t>(tensor.numel()));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords > 0 && options.max_coords < tensor.numel()) {
      for (size_t i = coords.size(); i > 1; --i) std::swap(coords[i - 1], coords[rng.below(i)]);
      coords.resize(static_cast<size_t>(options.max_coords));
      std::sort(coords.begin(), coords.end());
    }
    for (int64_t i : coords) {
      const double orig = tensor[i];
      tensor[i] = orig + options.eps;
      const double up = evaluate(f, probe);
      tensor[i] = orig - options.eps;
      const double down = evaluate(f, probe);
      tensor[i] = orig;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic.tensors[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.probed;
      if (rel > report.max_rel_err || report.worst_index < 0) {
        report.max_rel_err = std::max(rel, report.max_rel_err);
        report.worst_param = params.layout->entries()[p].name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace lttd
