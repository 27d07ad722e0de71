#include "dgm/stencils.hpp"

namespace dgm {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_min3(const ScalarField& f, const char* who) {
  check_nonempty(f.height, f.width, who);
  if (f.height < 3 || f.width < 3)
    throw DimensionError(std::string(who) + ": field smaller than kernel");
}

}  // namespace

VectorField2 sobel_gradient(const ScalarField& f) {
  check_min3(f, "sobel_gradient");
  const int h = f.height, w = f.width;
  VectorField2 out(h, w);
  for (int y = 0; y < h; ++y) {
    const int ym = y - 1 < 0 ? 0 : y - 1;
    const int yp = y + 1 > h - 1 ? h - 1 : y + 1;
    for (int x = 0; x < w; ++x) {
      const int xm = x - 1 < 0 ? 0 : x - 1;
      const int xp = x + 1 > w - 1 ? w - 1 : x + 1;
      const double a = f.at(ym, xm), b = f.at(ym, x), c = f.at(ym, xp);
      const double d = f.at(y, xm), e = f.at(y, xp);
      const double g = f.at(yp, xm), i = f.at(yp, x), j = f.at(yp, xp);
      out.x.at(y, x) = ((c + 2.0 * e + j) - (a + 2.0 * d + g)) / 8.0;
      out.y.at(y, x) = ((g + 2.0 * i + j) - (a + 2.0 * b + c)) / 8.0;
    }
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  check_min3(f, "laplacian");
  const int h = f.height, w = f.width;
  ScalarField out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double up = f.at(clampi(y - 1, 0, h - 1), x);
      const double dn = f.at(clampi(y + 1, 0, h - 1), x);
      const double lf = f.at(y, clampi(x - 1, 0, w - 1));
      const double rt = f.at(y, clampi(x + 1, 0, w - 1));
      out.at(y, x) = up + dn + lf + rt - 4.0 * f.at(y, x);
    }
  }
  return out;
}

ScalarField morphological_gradient(const LabelMask& mask) {
  check_nonempty(mask.height, mask.width, "morphological_gradient");
  const int h = mask.height, w = mask.width;
  ScalarField out(h, w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int32_t center = mask.at(y, x);
      bool differs = false;
      for (int dy = -1; dy <= 1 && !differs; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (mask.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1)) != center) {
            differs = true;
            break;
          }
        }
      }
      out.at(y, x) = differs ? 1.0 : 0.0;
    }
  }
  return out;
}

ScalarField box_filter3(const ScalarField& f) {
  check_nonempty(f.height, f.width, "box_filter3");
  const int h = f.height, w = f.width;
  ScalarField out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          acc += f.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
        }
      }
      out.at(y, x) = acc / 9.0;
    }
  }
  return out;
}

}  // namespace dgm
