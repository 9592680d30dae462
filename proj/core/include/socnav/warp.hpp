#pragma once

#include <cmath>

namespace socnav {

// Affine map from output cell coordinates to fractional input cell
// coordinates: (rf, cf) = M * (r, c) + o. Identity when m00=m11=1 and the
// rest is 0, which keeps identity warps bit-exact.
struct CellAffine {
  double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
  double or_ = 0.0, oc_ = 0.0;

  bool is_identity() const {
    return m00 == 1.0 && m01 == 0.0 && m10 == 0.0 && m11 == 1.0 && or_ == 0.0 &&
           oc_ == 0.0;
  }
};

// Inverse-mapped bilinear resampling; out-of-bounds samples read 0.
template <typename T>
void warp_bilinear(const T* src, T* dst, int h, int w, const CellAffine& m) {
  if (m.is_identity()) {
    for (int i = 0; i < h * w; ++i) dst[i] = src[i];
    return;
  }
  for (int r = 0; r < h; ++r) {
    const double rf_base = m.m00 * r + m.or_;
    const double cf_base = m.m10 * r + m.oc_;
    for (int c = 0; c < w; ++c) {
      const double rf = rf_base + m.m01 * c;
      const double cf = cf_base + m.m11 * c;
      const int r0 = static_cast<int>(std::floor(rf));
      const int c0 = static_cast<int>(std::floor(cf));
      const double ar = rf - r0, ac = cf - c0;
      double acc = 0.0;
      for (int dr = 0; dr < 2; ++dr) {
        const int rr = r0 + dr;
        if (rr < 0 || rr >= h) continue;
        const double wr = dr ? ar : 1.0 - ar;
        for (int dc = 0; dc < 2; ++dc) {
          const int cc = c0 + dc;
          if (cc < 0 || cc >= w) continue;
          const double wc = dc ? ac : 1.0 - ac;
          acc += wr * wc * static_cast<double>(src[rr * w + cc]);
        }
      }
      dst[r * w + c] = static_cast<T>(acc);
    }
  }
}

// Scatter-adjoint of warp_bilinear with respect to the source image.
template <typename T>
void warp_bilinear_backward(const T* dst_grad, T* src_grad, int h, int w,
                            const CellAffine& m) {
  if (m.is_identity()) {
    for (int i = 0; i < h * w; ++i) src_grad[i] += dst_grad[i];
    return;
  }
  for (int r = 0; r < h; ++r) {
    const double rf_base = m.m00 * r + m.or_;
    const double cf_base = m.m10 * r + m.oc_;
    for (int c = 0; c < w; ++c) {
      const double rf = rf_base + m.m01 * c;
      const double cf = cf_base + m.m11 * c;
      const int r0 = static_cast<int>(std::floor(rf));
      const int c0 = static_cast<int>(std::floor(cf));
      const double ar = rf - r0, ac = cf - c0;
      const double g = static_cast<double>(dst_grad[r * w + c]);
      for (int dr = 0; dr < 2; ++dr) {
        const int rr = r0 + dr;
        if (rr < 0 || rr >= h) continue;
        const double wr = dr ? ar : 1.0 - ar;
        for (int dc = 0; dc < 2; ++dc) {
          const int cc = c0 + dc;
          if (cc < 0 || cc >= w) continue;
          const double wc = dc ? ac : 1.0 - ac;
          src_grad[rr * w + cc] += static_cast<T>(g * wr * wc);
        }
      }
    }
  }
}

}  // namespace socnav
