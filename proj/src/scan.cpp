#include "dgm/scan.hpp"

#include <cmath>

namespace dgm {

namespace {

std::vector<double> draw_uniform(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Scan parameters with a chosen state horizon: decay magnitudes from
// [a_lo, a_hi), step projection from [wd_lo, wd_hi), fixed step bias.
ScanParams profiled_scan_params(int channels, int state_size, Rng& rng, double a_lo,
                                double a_hi, double wd_lo, double wd_hi, double b_delta) {
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t cs = c * state_size;
  ScanParams p;
  p.channels = channels;
  p.state_size = state_size;
  p.a_log.resize(cs);
  for (double& a : p.a_log) a = std::log(rng.uniform(a_lo, a_hi));
  p.w_delta = draw_uniform(rng, c, wd_lo, wd_hi);
  p.b_delta.assign(c, b_delta);
  p.w_b = draw_uniform(rng, cs, -1.0, 1.0);
  p.w_c = draw_uniform(rng, cs, -1.0, 1.0);
  p.d_skip.assign(c, 1.0);
  return p;
}

}  // namespace

ScanParams make_scan_params(int channels, int state_size, Rng& rng) {
  if (channels <= 0 || state_size <= 0) throw ConfigError("make_scan_params: empty shape");
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t cs = c * state_size;
  ScanParams p;
  p.channels = channels;
  p.state_size = state_size;
  p.a_log.resize(cs);
  for (double& a : p.a_log) a = std::log(rng.uniform(0.5, 1.5));
  p.w_delta = draw_uniform(rng, c, -1.0, 1.0);
  // softplus(b_delta) = 0.5 at zero input
  p.b_delta.assign(c, std::log(std::expm1(0.5)));
  p.w_b = draw_uniform(rng, cs, -1.0, 1.0);
  p.w_c = draw_uniform(rng, cs, -1.0, 1.0);
  p.d_skip.assign(c, 1.0);
  return p;
}

CascadeConfig make_cascade_config(int channels, int state_size, Rng& rng) {
  if (channels <= 0 || state_size <= 0) throw ConfigError("make_cascade_config: empty shape");
  CascadeConfig cfg;
  const std::size_t c = static_cast<std::size_t>(channels);
  for (int layer = 0; layer < 3; ++layer) {
    // Graded state horizons: the two warmup layers start with fast decay and
    // a large base step, so their recurrence reaches only a few pixels and
    // they act as local mixers. The guided layer starts with slow decay and
    // a small base step, so its state is long-range by default and the prior
    // gate, which scales the scan input, can push the step into the steep
    // part of softplus and cut the horizon where the priors mark a boundary.
    cfg.layers[layer] =
        layer < 2 ? profiled_scan_params(channels, state_size, rng, 3.0, 4.0, -0.25, 0.25,
                                         std::log(std::expm1(3.0)))
                  : profiled_scan_params(channels, state_size, rng, 0.2, 0.5, 2.5, 3.5, -4.0);
    cfg.dw_kernels[layer] = draw_uniform(rng, c * 9, -1.0 / 9.0, 1.0 / 9.0);
  }
  // The guided layer's depthwise conv starts near identity: its scan input
  // then tracks the sign of the features instead of zero-mean mixing noise,
  // which keeps the step gate monotone in the prior modulation.
  for (std::size_t ch = 0; ch < c; ++ch) cfg.dw_kernels[2][ch * 9 + 4] += 1.0;
  const double lim1 = 1.0 / std::sqrt(static_cast<double>(channels));
  const double lim2 = 1.0 / std::sqrt(9.0 * channels);
  cfg.refiner.w1 = draw_uniform(rng, c * c, -lim1, lim1);
  cfg.refiner.b1.assign(c, 0.0);
  cfg.refiner.w2 = draw_uniform(rng, c * 9, -lim2, lim2);
  cfg.refiner.b2.assign(1, 0.0);
  cfg.validate();
  return cfg;
}

}  // namespace dgm
