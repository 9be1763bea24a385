#include "lttd/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lttd/num/ops.hpp"
#include "lttd/parallel.hpp"

namespace lttd {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ParameterError(std::string("TrainConfig: ") + what);
  };
  require(lr > 0.0, "lr must be positive");
  require(decay_factor > 0.0 && decay_factor < 1.0, "decay_factor must lie in (0,1)");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(max_steps >= 0, "max_steps must be non-negative");
  require(plateau_patience >= 1, "plateau_patience must be at least 1");
  require(max_decays >= 0, "max_decays must be non-negative");
  require(min_improvement >= 0.0, "min_improvement must be non-negative");
  require(lambda_cpi >= 0.0, "lambda_cpi must be non-negative");
  require(eval_every >= 1, "eval_every must be at least 1");
  require(eval_clips_per_video >= 1, "eval_clips_per_video must be at least 1");
  require(clip_norm >= 0.0, "clip_norm must be non-negative");
  require(init_std > 0.0, "init_std must be positive");
  cpi.validate();
  model.validate();
}

template <typename T>
OptimizerState<T> OptimizerState<T>::zeros(std::shared_ptr<const ParamLayout> layout,
                                           AdamConfig adam) {
  OptimizerState s;
  s.adam = adam;
  s.m = ParamSet<T>::zeros(layout);
  s.v = ParamSet<T>::zeros(layout);
  return s;
}

template <typename T>
void adam_update(ParamSet<T>& params, const ParamSet<T>& grads, OptimizerState<T>& opt,
                 double lr) {
  if (grads.size() != params.size() || opt.m.size() != params.size()) {
    throw DimensionError("adam_update: parameter, gradient and moment sets differ in size");
  }
  const double b1 = opt.adam.beta1, b2 = opt.adam.beta2, eps = opt.adam.eps;
  opt.step += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params.tensors[i];
    const Tensor<T>& g = grads.tensors[i];
    Tensor<T>& m = opt.m.tensors[i];
    Tensor<T>& v = opt.v.tensors[i];
    if (g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape()) {
      throw DimensionError("adam_update: shape mismatch for '" + params.layout->entries()[i].name + "'");
    }
    for (int64_t k = 0; k < p.numel(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + eps));
    }
  }
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void adam_update(ParamSet<float>&, const ParamSet<float>&, OptimizerState<float>&, double);
template void adam_update(ParamSet<double>&, const ParamSet<double>&, OptimizerState<double>&,
                          double);

PlateauState plateau_start(const TrainConfig& cfg) {
  PlateauState s;
  s.base_lr = s.lr = cfg.lr;
  return s;
}

double lr_schedule(PlateauState& state, double val_auc, const TrainConfig& cfg) {
  if (!state.best || val_auc >= *state.best + cfg.min_improvement) {
    state.best = val_auc;
    state.stale = 0;
    return state.lr;
  }
  state.stale += 1;
  if (state.stale < cfg.plateau_patience) return state.lr;
  state.stale = 0;
  if (state.decays < cfg.max_decays) {
    state.decays += 1;
    state.lr = state.base_lr * std::pow(cfg.decay_factor, static_cast<double>(state.decays));
  } else {
    state.converged = true;
  }
  return state.lr;
}

Clip slice_clip(const Clip& video, int64_t start, int64_t frames) {
  validate_clip(video);
  const int64_t len = video.length();
  if (frames <= 0 || start < 0 || start + frames > len) {
    throw DataError("video '" + video.video_id + "' has " + std::to_string(len) +
                    " frames; cannot take " + std::to_string(frames) + " from index " +
                    std::to_string(start));
  }
  const int64_t hw = video.height() * video.width();
  Clip c;
  c.label = video.label;
  c.video_id = video.video_id;
  c.clip_start = video.clip_start + start;
  c.frames = TensorF({video.channels(), frames, video.height(), video.width()});
  for (int64_t ch = 0; ch < video.channels(); ++ch) {
    const float* src = video.frames.data() + (ch * len + start) * hw;
    std::copy(src, src + frames * hw, c.frames.data() + ch * frames * hw);
  }
  if (video.mask) {
    c.mask = TensorF({frames, video.height(), video.width()});
    const float* src = video.mask->data() + start * hw;
    std::copy(src, src + frames * hw, c.mask->data());
  }
  return c;
}

Clip sample_clip(const Clip& video, int64_t frames, num::Rng& rng) {
  validate_clip(video);
  if (video.length() < frames) {
    throw DataError("video '" + video.video_id + "' has " + std::to_string(video.length()) +
                    " frames, fewer than the clip length " + std::to_string(frames));
  }
  const auto start = static_cast<int64_t>(rng.below(static_cast<uint64_t>(video.length() - frames + 1)));
  return slice_clip(video, start, frames);
}

namespace {

struct ClipResult {
  double bce = 0.0, cpi = 0.0;
  ParamSet<float> grads;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

StepMetrics batch_gradients(const std::vector<Clip>& batch, const ParamSet<float>& params,
                            const TrainConfig& cfg, ParamSet<float>* grads, int64_t step) {
  if (batch.empty()) throw DataError("train step: empty batch");
  const double lambda = cfg.lambda_cpi;
  std::vector<ClipResult> results(batch.size());
  parallel_for(static_cast<int64_t>(batch.size()), [&](int64_t i) {
    const Clip& clip = batch[static_cast<size_t>(i)];
    num::Tape<float> tape;
    BoundParams<float> bound(tape, params, grads != nullptr);
    LossTerms<float> terms;
    try {
      terms = clip_loss(cfg.model, bound, clip, lambda, cfg.cpi);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": forward of clip '" + clip.video_id +
                         "' failed: " + e.what());
    }
    ClipResult& r = results[static_cast<size_t>(i)];
    r.bce = terms.bce.value()[0];
    r.cpi = terms.cpi.valid() ? static_cast<double>(terms.cpi.value()[0]) : 0.0;
    if (grads && std::isfinite(r.bce) && std::isfinite(r.cpi)) {
      tape.backward(terms.total);
      r.grads = bound.gradients();
    }
  });
  StepMetrics m;
  for (const ClipResult& r : results) {
    m.bce += r.bce;
    m.cpi += r.cpi;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  m.bce *= inv;
  m.cpi *= inv;
  m.loss = m.bce + lambda * m.cpi;
  if (!std::isfinite(m.loss)) {
    throw NumericError("step " + std::to_string(step) + ": non-finite loss " + fmt(m.loss) +
                       " (bce " + fmt(m.bce) + ", cpi " + fmt(m.cpi) + ", lambda " + fmt(lambda) +
                       ")");
  }
  if (!grads) return m;
  *grads = ParamSet<float>::zeros(params.layout);
  for (const ClipResult& r : results) {
    for (size_t p = 0; p < grads->size(); ++p) {
      Tensor<float>& g = grads->tensors[p];
      const Tensor<float>& s = r.grads.tensors[p];
      for (int64_t k = 0; k < g.numel(); ++k) g[k] += s[k];
    }
  }
  double sq = 0.0;
  for (Tensor<float>& g : grads->tensors) {
    for (int64_t k = 0; k < g.numel(); ++k) {
      g[k] = static_cast<float>(g[k] * inv);
      sq += static_cast<double>(g[k]) * g[k];
    }
  }
  m.grad_norm = std::sqrt(sq);
  return m;
}

StepMetrics train_step(const std::vector<Clip>& batch, ParamSet<float>& params,
                       OptimizerState<float>& opt, const TrainConfig& cfg, double lr) {
  ParamSet<float> grads;
  const StepMetrics m = batch_gradients(batch, params, cfg, &grads, opt.step + 1);
  if (!std::isfinite(m.grad_norm)) {
    throw NumericError("step " + std::to_string(opt.step + 1) + ": non-finite gradient norm (loss " +
                       fmt(m.loss) + ", bce " + fmt(m.bce) + ", cpi " + fmt(m.cpi) + ")");
  }
  if (cfg.clip_norm > 0.0 && m.grad_norm > cfg.clip_norm) {
    const float s = static_cast<float>(cfg.clip_norm / m.grad_norm);
    for (Tensor<float>& g : grads.tensors)
      for (float& v : g.values()) v *= s;
  }
  adam_update(params, grads, opt, lr);
  return m;
}

std::vector<std::string> parameter_audit(const std::vector<Clip>& batch,
                                         const ParamSet<float>& params, const TrainConfig& cfg) {
  ParamSet<float> grads;
  batch_gradients(batch, params, cfg, &grads);
  std::vector<std::string> dead;
  for (size_t p = 0; p < grads.size(); ++p) {
    const auto& g = grads.tensors[p];
    for (int64_t k = 0; k < g.numel(); ++k) {
      if (g[k] == 0.0f) {
        dead.push_back(params.layout->entries()[p].name);
        break;
      }
    }
  }
  return dead;
}

TrainState TrainState::fresh(const TrainConfig& cfg) {
  cfg.validate();
  const auto layout = make_layout(cfg.model);
  TrainState s;
  s.params = ParamSet<float>::initialized(layout, num::mix_seed(cfg.seed, 1), cfg.init_std);
  s.opt = OptimizerState<float>::zeros(layout);
  s.plateau = plateau_start(cfg);
  s.rng = num::Rng(num::mix_seed(cfg.seed, 2));
  s.best_params = s.params;
  return s;
}

}  // namespace lttd
