#include "dgm/distance.hpp"

#include <cmath>
#include <vector>

namespace dgm {

namespace {

// Lower-envelope pass over one line of squared offsets, after Felzenszwalb &
// Huttenlocher. f holds per-site base costs, d receives min_p (q-p)^2 + f[p].
// All inputs are integers small enough that the intersection arithmetic below
// is exact in double precision.
void envelope_1d(const int64_t* f, int n, int64_t* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -1e30;
  z[1] = 1e30;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      int p = v[k];
      s = (static_cast<double>(f[q] - f[p]) + static_cast<double>(q) * q -
           static_cast<double>(p) * p) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = 1e30;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    int p = v[k];
    d[q] = static_cast<int64_t>(q - p) * (q - p) + f[p];
  }
}

}  // namespace

ScalarGrid<int64_t> distance_transform_squared(const LabelMask& mask, int32_t foreground_label) {
  check_nonempty(mask.height, mask.width, "distance_transform");
  const int h = mask.height, w = mask.width;
  const int64_t cap = static_cast<int64_t>(h) * h + static_cast<int64_t>(w) * w;
  const int none = h + w;  // sentinel linear distance, larger than any real one

  // Vertical pass: linear distance to the nearest non-foreground pixel in the
  // same column, then squared (capped when the column has none).
  ScalarGrid<int64_t> g(h, w);
  std::vector<int> lin(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    int d = none;
    for (int y = 0; y < h; ++y) {
      d = (mask.at(y, x) != foreground_label) ? 0 : (d >= none ? none : d + 1);
      lin[y] = d;
    }
    d = none;
    for (int y = h - 1; y >= 0; --y) {
      d = (mask.at(y, x) != foreground_label) ? 0 : (d >= none ? none : d + 1);
      if (d < lin[y]) lin[y] = d;
      g.at(y, x) = lin[y] >= none ? cap : static_cast<int64_t>(lin[y]) * lin[y];
    }
  }

  // Horizontal pass: combine with squared offsets along the row.
  ScalarGrid<int64_t> out(h, w);
  std::vector<int64_t> f(static_cast<std::size_t>(w)), d(static_cast<std::size_t>(w));
  std::vector<int> v(static_cast<std::size_t>(w));
  std::vector<double> z(static_cast<std::size_t>(w) + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = g.at(y, x);
    envelope_1d(f.data(), w, d.data(), v.data(), z.data());
    for (int x = 0; x < w; ++x) out.at(y, x) = d[x] > cap ? cap : d[x];
  }
  return out;
}

ScalarField distance_transform(const LabelMask& mask, int32_t foreground_label) {
  auto d2 = distance_transform_squared(mask, foreground_label);
  ScalarField out(mask.height, mask.width);
  for (std::size_t i = 0; i < d2.size(); ++i) {
    out.data[i] = std::sqrt(static_cast<double>(d2.data[i]));
  }
  return out;
}

LabelMask connected_components(const LabelMask& mask) {
  check_nonempty(mask.height, mask.width, "connected_components");
  const int h = mask.height, w = mask.width;
  LabelMask out(h, w, 0);
  std::vector<std::pair<int, int>> stack;
  int32_t next_id = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x) == 0 || out.at(y, x) != 0) continue;
      const int32_t src = mask.at(y, x);
      ++next_id;
      out.at(y, x) = next_id;
      stack.push_back({y, x});
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        constexpr int dy[4] = {-1, 1, 0, 0};
        constexpr int dx[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int ny = cy + dy[k], nx = cx + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (mask.at(ny, nx) == src && out.at(ny, nx) == 0) {
            out.at(ny, nx) = next_id;
            stack.push_back({ny, nx});
          }
        }
      }
    }
  }
  return out;
}

}  // namespace dgm
