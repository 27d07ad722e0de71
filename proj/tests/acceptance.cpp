// Acceptance gate: end-to-end checks of the shipped behavior, one verdict
// line per criterion. Usage: acceptance <path-to-cli>.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dgm/distance.hpp"
#include "dgm/field_io.hpp"
#include "dgm/goad.hpp"
#include "dgm/gradcheck.hpp"
#include "dgm/losses.hpp"
#include "dgm/metrics.hpp"
#include "dgm/priors.hpp"
#include "dgm/rng.hpp"
#include "dgm/scan.hpp"
#include "dgm/stencils.hpp"
#include "dgm/toy.hpp"

namespace fs = std::filesystem;
using namespace dgm;

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int wait_status = pclose(pipe);
  if (WIFEXITED(wait_status)) r.status = WEXITSTATUS(wait_status);
  return r;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::ostringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

// ---- brute-force oracles for the exact discrete geometry ----

// Squared distance from each foreground pixel to the nearest pixel outside
// the foreground set; zero elsewhere, capped when no outside pixel exists.
ScalarGrid<int64_t> brute_dt2(const LabelMask& mask, int32_t fg) {
  const int h = mask.height, w = mask.width;
  const int64_t cap = static_cast<int64_t>(h) * h + static_cast<int64_t>(w) * w;
  ScalarGrid<int64_t> out(h, w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) != fg) continue;
      int64_t best = cap;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          if (mask.at(yy, xx) == fg) continue;
          const int64_t dy = y - yy, dx = x - xx;
          best = std::min(best, dy * dy + dx * dx);
        }
      out.at(y, x) = best;
    }
  return out;
}

LabelMask brute_ccl(const LabelMask& mask) {
  const int h = mask.height, w = mask.width;
  LabelMask out(h, w);
  int32_t next = 1;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (mask.at(sy, sx) == 0 || out.at(sy, sx) != 0) continue;
      const int32_t id = next++;
      std::vector<std::pair<int, int>> stack = {{sy, sx}};
      out.at(sy, sx) = id;
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = y + dy[k], nx = x + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (mask.at(ny, nx) == mask.at(y, x) && out.at(ny, nx) == 0) {
            out.at(ny, nx) = id;
            stack.emplace_back(ny, nx);
          }
        }
      }
    }
  return out;
}

ScalarField brute_vmap(const LabelMask& instances) {
  const int h = instances.height, w = instances.width;
  ScalarField out(h, w, 0.0);
  std::set<int32_t> ids(instances.labels.begin(), instances.labels.end());
  ids.erase(0);
  for (int32_t id : ids) {
    LabelMask one(h, w);
    for (std::size_t i = 0; i < one.size(); ++i)
      one.labels[i] = instances.labels[i] == id ? 1 : 0;
    const ScalarGrid<int64_t> d2 = brute_dt2(one, 1);
    int64_t max_d2 = 0;
    for (std::size_t i = 0; i < d2.size(); ++i)
      if (instances.labels[i] == id) max_d2 = std::max(max_d2, d2.data[i]);
    for (std::size_t i = 0; i < d2.size(); ++i)
      if (instances.labels[i] == id)
        out.data[i] = std::sqrt(static_cast<double>(d2.data[i]) / static_cast<double>(max_d2));
  }
  return out;
}

ScalarField brute_morphgrad(const LabelMask& mask) {
  const int h = mask.height, w = mask.width;
  ScalarField out(h, w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool differs = false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = std::clamp(y + dy, 0, h - 1);
          const int nx = std::clamp(x + dx, 0, w - 1);
          differs = differs || mask.at(ny, nx) != mask.at(y, x);
        }
      out.at(y, x) = differs ? 1.0 : 0.0;
    }
  return out;
}

// Level-set form of the convex boundary surrogate: for each present class,
// integrate the set loss of {i : margin_i > t} over t in [0, 1].
double lovasz_reference(const FeatureMap& probs, const LabelMask& labels) {
  const int k = probs.channels;
  const std::size_t n = labels.size();
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    bool has = false;
    for (int32_t l : labels.labels) has = has || l == c;
    if (!has) continue;
    ++present;
    std::vector<double> margins(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = probs.plane(c)[i];
      margins[i] = labels.labels[i] == c ? 1.0 - p : p;
    }
    std::vector<double> cuts(margins);
    cuts.push_back(0.0);
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    double integral = 0.0;
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
      const double lo = std::max(0.0, cuts[j]);
      const double hi = std::min(1.0, cuts[j + 1]);
      if (hi <= lo) continue;
      const double mid = 0.5 * (lo + hi);
      // error set S = {i : m_i > mid}: kept foreground is G \ S, the union of
      // the mistaken prediction with the foreground is G union S
      double kept = 0.0, uni = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool in_set = margins[i] > mid;
        const bool is_gt = labels.labels[i] == c;
        if (is_gt && !in_set) kept += 1.0;
        if (is_gt || in_set) uni += 1.0;
      }
      integral += (1.0 - kept / uni) * (hi - lo);
    }
    sum += integral;
  }
  return present == 0 ? 0.0 : sum / present;
}

LabelMask random_mask(Rng& rng, int max_side, int num_labels) {
  const int h = rng.uniform_int(1, max_side), w = rng.uniform_int(1, max_side);
  LabelMask m(h, w);
  for (int32_t& l : m.labels) l = static_cast<int32_t>(rng.uniform_int(0, num_labels - 1));
  return m;
}

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> fn;
};

// ---- criteria ----

bool linear_cost_scaling(const std::string& cli, std::string& detail) {
  const CmdResult r = run_cmd(
      cli + " bench --sizes 32x32,32x64,64x64,64x128,128x128 --seed 0 --repeats 5 2>/dev/null");
  if (r.status != 0) {
    detail = "bench exited " + std::to_string(r.status);
    return false;
  }
  std::vector<double> pixels, madds, secs;
  for (const std::string& line : split(r.out, '\n')) {
    if (line.empty() || line[0] == 'h') continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5) continue;
    pixels.push_back(std::stod(f[2]));
    madds.push_back(std::stod(f[3]));
    secs.push_back(std::stod(f[4]));
  }
  if (pixels.size() != 5) {
    detail = "expected 5 rows, got " + std::to_string(pixels.size());
    return false;
  }
  bool ok = true;
  std::ostringstream d;
  for (int i = 0; i + 1 < 5; ++i) {
    const double mr = madds[i + 1] / madds[i];
    ok = ok && std::fabs(mr - 2.0) <= 0.02;
  }
  for (int i : {0, 2}) {
    const double mr = madds[i + 2] / madds[i];
    ok = ok && std::fabs(mr - 4.0) <= 0.04;
    d << "madds x4 ratio " << mr << " ";
  }
  d << "| wall ratios";
  for (int i = 0; i + 1 < 5; ++i) {
    const double wr = secs[i + 1] / secs[i];
    ok = ok && wr >= 1.5 && wr <= 2.5;
    d << " " << wr;
  }
  detail = d.str();
  return ok;
}

bool exact_geometry(const std::string&, std::string& detail) {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMask m = random_mask(rng, 8, 4);
    for (int32_t fg = 0; fg < 3; ++fg) {
      const ScalarGrid<int64_t> got = distance_transform_squared(m, fg);
      const ScalarGrid<int64_t> ref = brute_dt2(m, fg);
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got.data[i] != ref.data[i]) {
          detail = "squared distance mismatch, trial " + std::to_string(trial);
          return false;
        }
    }
    const LabelMask inst = connected_components(m);
    const LabelMask inst_ref = brute_ccl(m);
    for (std::size_t i = 0; i < inst.size(); ++i)
      if (inst.labels[i] != inst_ref.labels[i]) {
        detail = "component labeling mismatch, trial " + std::to_string(trial);
        return false;
      }
    const ScalarField vm = compute_vmap(inst);
    const ScalarField vm_ref = brute_vmap(inst);
    for (std::size_t i = 0; i < vm.size(); ++i)
      if (std::fabs(vm.data[i] - vm_ref.data[i]) > 1e-12) {
        detail = "interior coordinate mismatch, trial " + std::to_string(trial);
        return false;
      }
    const ScalarField mg = morphological_gradient(m);
    const ScalarField mg_ref = brute_morphgrad(m);
    for (std::size_t i = 0; i < mg.size(); ++i)
      if (mg.data[i] != mg_ref.data[i]) {
        detail = "boundary map mismatch, trial " + std::to_string(trial);
        return false;
      }
    ++checked;
  }
  detail = std::to_string(checked) + " random masks, all transforms exact";
  return true;
}

bool scan_equivalences(const std::string&, std::string& detail) {
  // Hand-unrolled three-step recurrence with unit parameters: delta is
  // softplus(0) = ln 2, the decay is exp(-ln 2) = 1/2, so the state walks
  // ln2, 1.5 ln2, 1.75 ln2 on constant unit input.
  ScanParamsT<double> p;
  p.channels = 1;
  p.state_size = 1;
  p.a_log = {0.0};
  p.w_delta = {0.0};
  p.b_delta = {0.0};
  p.w_b = {1.0};
  p.w_c = {1.0};
  p.d_skip = {0.0};
  const double l2 = std::log(2.0);
  const std::vector<double> x = {1.0, 1.0, 1.0};
  std::vector<double> y(3);
  selective_scan_1d<double>(x, p, 0, y, nullptr);
  double max_err = 0.0;
  const double expect[3] = {l2, 1.5 * l2, 1.75 * l2};
  for (int i = 0; i < 3; ++i) max_err = std::max(max_err, std::fabs(y[i] - expect[i]));
  if (max_err > 1e-12) {
    detail = "hand-unrolled recurrence error " + std::to_string(max_err);
    return false;
  }

  Rng rng(23);
  ScanParams rp = make_scan_params(3, 2, rng);
  FeatureMap f(3, 5, 7);
  for (double& v : f.data) v = rng.uniform(-1.0, 1.0);

  // left-to-right on the mirrored image equals mirrored right-to-left
  FeatureMap mirror(3, 5, 7);
  for (int c = 0; c < 3; ++c)
    for (int yy = 0; yy < 5; ++yy)
      for (int xx = 0; xx < 7; ++xx) mirror.at(c, yy, xx) = f.at(c, yy, 6 - xx);
  const FeatureMap lr = directional_scan(f, rp, ScanDirection::LeftRight, nullptr);
  const FeatureMap rl = directional_scan(mirror, rp, ScanDirection::RightLeft, nullptr);
  for (int c = 0; c < 3; ++c)
    for (int yy = 0; yy < 5; ++yy)
      for (int xx = 0; xx < 7; ++xx)
        if (lr.at(c, yy, xx) != rl.at(c, yy, 6 - xx)) {
          detail = "mirror symmetry broken";
          return false;
        }

  // unit prompt (no boundary evidence) leaves the guided block bit-identical
  GeometricPriors zero;
  zero.d_coarse = ScalarField(5, 7, 0.0);
  zero.flow = VectorField2(5, 7);
  for (double& v : zero.flow.y.data) v = 0.4;
  for (double& v : zero.flow.x.data) v = -0.6;
  std::vector<double> dw(3 * 9, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 9; ++k) dw[static_cast<std::size_t>(c) * 9 + k] = rng.uniform(-0.3, 0.3);
  const FeatureMap guided = gmamba_block<double>(f, rp, dw, &zero, nullptr);
  const FeatureMap plain = gmamba_block<double>(f, rp, dw, nullptr, nullptr);
  for (std::size_t i = 0; i < guided.size(); ++i)
    if (guided.data[i] != plain.data[i]) {
      detail = "guided block with zero boundary map diverges from the plain block";
      return false;
    }

  // worker count must not change a single bit
  setenv("DGM_THREADS", "6", 1);
  const FeatureMap threaded = directional_scan(f, rp, ScanDirection::TopBottom, nullptr);
  unsetenv("DGM_THREADS");
  const FeatureMap serial = directional_scan(f, rp, ScanDirection::TopBottom, nullptr);
  for (std::size_t i = 0; i < threaded.size(); ++i)
    if (threaded.data[i] != serial.data[i]) {
      detail = "thread count changed the result";
      return false;
    }

  detail = "recurrence fixture err " + std::to_string(max_err) + ", identities bitwise";
  return true;
}

bool gradient_checks(const std::string& cli, std::string& detail) {
  const CmdResult r = run_cmd(cli + " gradcheck --scope all --seed 1 --instances 20 2>/dev/null");
  double max_err = -1.0;
  for (const std::string& line : split(r.out, '\n')) {
    const std::size_t pos = line.find("max_rel_err=");
    if (pos == std::string::npos || line.find("tol=") == std::string::npos) continue;
    max_err = std::stod(line.substr(pos + 12));
  }
  detail = "exit " + std::to_string(r.status) + ", max_rel_err " + std::to_string(max_err);
  return r.status == 0 && max_err >= 0.0 && max_err < kGradTol;
}

bool convex_surrogate(const std::string&, std::string& detail) {
  const double grid[3] = {0.0, 0.25, 0.75};
  double max_err = 0.0;
  long cases = 0;
  for (int n = 1; n <= 6; ++n) {
    long combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    for (int gt_bits = 0; gt_bits < (1 << n); ++gt_bits) {
      LabelMask labels(1, n);
      for (int i = 0; i < n; ++i) labels.at(0, i) = (gt_bits >> i) & 1;
      for (long pc = 0; pc < combos; ++pc) {
        FeatureMap probs(2, 1, n);
        long rem = pc;
        for (int i = 0; i < n; ++i) {
          const double p = grid[rem % 3];
          rem /= 3;
          probs.at(1, 0, i) = p;
          probs.at(0, 0, i) = 1.0 - p;
        }
        const double got = lovasz_softmax<double>(probs, labels);
        const double ref = lovasz_reference(probs, labels);
        max_err = std::max(max_err, std::fabs(got - ref));
        ++cases;
        if (max_err > 1e-10) {
          detail = "mismatch vs level-set integral, err " + std::to_string(max_err);
          return false;
        }
      }
    }
  }
  std::ostringstream d;
  d << cases << " exhaustive cases, max err " << max_err;
  detail = d.str();
  return true;
}

bool offset_identities(const std::string&, std::string& detail) {
  Rng rng(31);
  FeatureMap f_low(3, 6, 7), f_up(3, 6, 7);
  for (double& v : f_low.data) v = rng.uniform(-2.0, 2.0);
  for (double& v : f_up.data) v = rng.uniform(-2.0, 2.0);
  VectorField2 zero_flow(6, 7);
  ScalarField d_final(6, 7);
  for (double& v : d_final.data) v = rng.uniform(0.0, 1.0);
  Psi psi = make_psi(rng);

  const FeatureMap fused = goad_forward<double>(f_low, f_up, zero_flow, d_final, psi);
  if (fused.channels != 6) {
    detail = "fused channel count";
    return false;
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 7; ++x) {
        if (fused.at(c, y, x) != f_up.at(c, y, x) * (d_final.at(y, x) + 1.0)) {
          detail = "gate identity broken";
          return false;
        }
        if (fused.at(c + 3, y, x) != f_low.at(c, y, x)) {
          detail = "zero offsets did not sample the identity";
          return false;
        }
      }

  double max_w_err = 0.0;
  for (int t = 0; t < 300; ++t) {
    const BilinearPoint bp = bilinear_weights(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 5, 8);
    double s = 0.0;
    for (double w : {bp.w00, bp.w01, bp.w10, bp.w11}) {
      if (w < 0.0) {
        detail = "negative interpolation weight";
        return false;
      }
      s += w;
    }
    max_w_err = std::max(max_w_err, std::fabs(s - 1.0));
  }
  if (max_w_err > 1e-15) {
    detail = "interpolation weights sum error " + std::to_string(max_w_err);
    return false;
  }

  double max_off = 0.0;
  for (int t = 0; t < 20; ++t) {
    VectorField2 flow(6, 7);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 7; ++x) {
        const double ang = rng.uniform(0.0, 6.283185307179586);
        const double mag = rng.uniform(0.0, 1.0);
        flow.y.at(y, x) = mag * std::sin(ang);
        flow.x.at(y, x) = mag * std::cos(ang);
      }
    ScalarField d(6, 7);
    for (double& v : d.data) v = rng.uniform(0.0, 1.0);
    Psi p2 = make_psi(rng);
    const ScalarField alpha = compute_alpha<double>(flow, p2);
    const VectorField2 delta = offset_field<double>(flow, d, alpha);
    for (double v : delta.y.data) max_off = std::max(max_off, std::fabs(v));
    for (double v : delta.x.data) max_off = std::max(max_off, std::fabs(v));
  }
  if (max_off > 0.2) {
    detail = "offset bound exceeded: " + std::to_string(max_off);
    return false;
  }
  std::ostringstream d;
  d << "weights sum err " << max_w_err << ", max offset " << max_off;
  detail = d.str();
  return true;
}

bool transport_control(const std::string&, std::string& detail) {
  std::vector<double> ratios;
  LeakagePair seed0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const LeakagePair pair = run_leakage(seed, 32, 8, 4);
    if (seed == 0) seed0 = pair;
    if (!(pair.isotropic > 0.0)) {
      detail = "degenerate isotropic transport at seed " + std::to_string(seed);
      return false;
    }
    ratios.push_back(pair.guided / pair.isotropic);
  }
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[4] + sorted[5]);
  std::ostringstream d;
  d << "seed 0 guided " << seed0.guided << " vs isotropic " << seed0.isotropic << ", median ratio "
    << median;
  detail = d.str();
  return seed0.guided < seed0.isotropic && median < 1.0;
}

bool schedule_and_report(const std::string&, std::string& detail) {
  if (std::fabs(gamma_geo(0.0) - 2.2) > 1e-15 || std::fabs(gamma_geo(1.0) - 0.2) > 1e-15) {
    detail = "schedule endpoints";
    return false;
  }
  // single boundary pixel at probability one half: weighted binary
  // cross-entropy with positive weight 20 gives exactly 20 ln 2
  ScalarField d_pred(1, 1, 0.5), d_gt(1, 1, 1.0);
  const double dl = d_loss<double>(d_pred, d_gt, 20.0);
  if (std::fabs(dl - 20.0 * std::log(2.0)) > 1e-12) {
    detail = "boundary cross-entropy fixture";
    return false;
  }
  Rng rng(41);
  const int k = 3, h = 4, w = 5;
  FeatureMap probs(k, h, w), aux(k, h, w);
  LabelMask labels(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      labels.at(y, x) = static_cast<int32_t>(rng.uniform_int(0, k - 1));
      double s = 0.0;
      std::vector<double> raw(k);
      for (int c = 0; c < k; ++c) {
        raw[static_cast<std::size_t>(c)] = rng.uniform(0.05, 1.0);
        s += raw[static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < k; ++c) {
        probs.at(c, y, x) = raw[static_cast<std::size_t>(c)] / s;
        aux.at(c, y, x) = raw[static_cast<std::size_t>((c + 1) % k)] / s;
      }
    }
  LabelMask inst(h, w);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 4; ++x) inst.at(y, x) = 1;
  const GeometricPriors target = make_priors(inst);
  PriorPred pred;
  pred.vmap = ScalarField(h, w);
  pred.flow = VectorField2(h, w);
  pred.curv = ScalarField(h, w);
  for (double& v : pred.vmap.data) v = rng.uniform(0.0, 1.0);
  for (double& v : pred.flow.y.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : pred.flow.x.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : pred.curv.data) v = rng.uniform(-1.0, 1.0);
  ScalarField dp(h, w);
  for (double& v : dp.data) v = rng.uniform(0.1, 0.9);
  const double t = 0.3;
  const LossReport rep =
      total_loss<double>(probs, aux, labels, target.d_coarse, pred, target, dp, t, LossOptions{});
  const double seg = rep.ce_ohem + 0.8 * rep.lovasz + 0.1 * rep.boundary;
  const double total = rep.seg + rep.gamma_geo * (rep.vg + rep.d) + 0.4 * rep.aux;
  if (std::fabs(rep.seg - seg) > 1e-12 || std::fabs(rep.total - total) > 1e-12 ||
      rep.gamma_geo != gamma_geo(t)) {
    detail = "report identities";
    return false;
  }
  detail = "endpoints 2.2/0.2, report identities within 1e-12";
  return true;
}

bool toy_overfit(const std::string&, std::string& detail) {
  OverfitOptions opt;  // seed 0, 200 steps, lr 0.02, 32x32, 8 channels
  const OverfitResult res = run_overfit(opt);
  const double start = res.rows.front().report.total;
  const double end = res.rows.back().report.total;
  for (const OverfitRow& row : res.rows)
    if (!std::isfinite(row.report.total)) {
      detail = "non-finite loss at step " + std::to_string(row.step);
      return false;
    }
  const double reduction = (start - end) / start;
  std::ostringstream d;
  d << "total " << start << " -> " << end << " (reduction " << reduction * 100.0 << "%, final mIoU "
    << res.final_miou << ")";
  detail = d.str();
  return reduction >= 0.5;
}

bool deterministic_reruns(const std::string& cli, std::string& detail) {
  const fs::path base = fs::temp_directory_path() / ("dgm_accept_" + std::to_string(getpid()));
  fs::create_directories(base);
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };

  LabelMask mask(16, 16);
  for (int y = 2; y < 9; ++y)
    for (int x = 3; x < 8; ++x) mask.at(y, x) = 1;
  for (int y = 9; y < 14; ++y)
    for (int x = 10; x < 15; ++x) mask.at(y, x) = 2;
  write_mask((base / "mask.dgmf").string(), mask);
  Rng rng(42);
  FeatureMap feat(3, 16, 16);
  for (double& v : feat.data) v = rng.uniform(-1.0, 1.0);
  write_field((base / "feat.dgmf").string(), feat, FieldDtype::F64);

  int compared = 0;
  bool ok = true;
  std::string first_diff;
  const auto expect_same = [&](const fs::path& a, const fs::path& b) {
    ++compared;
    if (!same_bytes(a, b) && ok) {
      ok = false;
      first_diff = a.filename().string();
    }
  };
  const auto run_ok = [&](const std::string& cmd) {
    const CmdResult r = run_cmd(cmd + " >/dev/null 2>&1");
    if (r.status != 0 && ok) {
      ok = false;
      first_diff = "command failed: " + cmd;
    }
  };

  run_ok(cli + " priors " + q(base / "mask.dgmf") + " --out " + q(base / "p1"));
  run_ok(cli + " priors " + q(base / "mask.dgmf") + " --out " + q(base / "p2"));
  for (const char* f : {"vmap.dgmf", "flow.dgmf", "curv.dgmf", "dcoarse.dgmf", "run_config.json"})
    expect_same(base / "p1" / f, base / "p2" / f);

  const std::string scan_args = " scan " + q(base / "feat.dgmf") + " --priors " + q(base / "p1") +
                                " --mode geo --seed 5 --out ";
  run_ok(cli + scan_args + q(base / "s1"));
  run_ok(cli + scan_args + q(base / "s2"));
  run_ok("DGM_THREADS=3 " + cli + scan_args + q(base / "s3"));
  for (const char* f : {"context.dgmf", "delta_d.dgmf", "run_config.json"}) {
    expect_same(base / "s1" / f, base / "s2" / f);
    expect_same(base / "s1" / f, base / "s3" / f);
  }

  const std::string leak_args = " leakage --seed 0 --size 16 --channels 4 --state-size 2 --out ";
  run_ok(cli + leak_args + q(base / "l1"));
  run_ok(cli + leak_args + q(base / "l2"));
  expect_same(base / "l1" / "leakage.csv", base / "l2" / "leakage.csv");

  const std::string fit_args =
      " overfit --seed 0 --steps 3 --lr 5e-4 --size 32 --channels 4 --state-size 2 --out ";
  run_ok(cli + fit_args + q(base / "o1"));
  run_ok(cli + fit_args + q(base / "o2"));
  expect_same(base / "o1" / "losses.csv", base / "o2" / "losses.csv");
  expect_same(base / "o1" / "pred.dgmf", base / "o2" / "pred.dgmf");

  std::error_code ec;
  fs::remove_all(base, ec);
  detail = ok ? std::to_string(compared) + " files byte-identical across reruns"
              : "diverged: " + first_diff;
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = "\"" + std::string(argv[1]) + "\"";

  const std::vector<Criterion> criteria = {
      {"linear cost scaling", [&](std::string& d) { return linear_cost_scaling(cli, d); }},
      {"exact discrete geometry", [&](std::string& d) { return exact_geometry(cli, d); }},
      {"scan recurrence identities", [&](std::string& d) { return scan_equivalences(cli, d); }},
      {"gradient checks", [&](std::string& d) { return gradient_checks(cli, d); }},
      {"convex boundary surrogate", [&](std::string& d) { return convex_surrogate(cli, d); }},
      {"offset decoding identities", [&](std::string& d) { return offset_identities(cli, d); }},
      {"directional transport control", [&](std::string& d) { return transport_control(cli, d); }},
      {"schedule and loss reporting", [&](std::string& d) { return schedule_and_report(cli, d); }},
      {"toy scene overfit", [&](std::string& d) { return toy_overfit(cli, d); }},
      {"bit-identical reruns", [&](std::string& d) { return deterministic_reruns(cli, d); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = criteria[i].fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %02zu %s (%s) [%.2fs]\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  if (failures == 0) {
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
  }
  std::printf("%d criteria FAILED\n", failures);
  return 1;
}
