#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

// Low-level compute kernels shared by the tape ops and the tape-free forward
// paths. Convolutions run as per-sample im2col plus a small GEMM whose inner
// loop runs over independent output-channel accumulators: that keeps the
// reductions in double (deterministic, fixed order) while still vectorizing.

namespace socnav::kernels {

// ----- dense -----------------------------------------------------------

template <typename T>
void dense_fwd(const T* x, const T* w, const T* b, T* y, int n, int in, int out) {
  std::vector<double> acc(out);
  for (int i = 0; i < n; ++i) {
    const T* xi = x + static_cast<int64_t>(i) * in;
    T* yi = y + static_cast<int64_t>(i) * out;
    if (b)
      for (int o = 0; o < out; ++o) acc[o] = static_cast<double>(b[o]);
    else
      std::fill(acc.begin(), acc.end(), 0.0);
    for (int k = 0; k < in; ++k) {
      const double xv = xi[k];
      const T* wk = w + static_cast<int64_t>(k) * out;
      for (int o = 0; o < out; ++o) acc[o] += xv * static_cast<double>(wk[o]);
    }
    for (int o = 0; o < out; ++o) yi[o] = static_cast<T>(acc[o]);
  }
}

template <typename T>
void dense_bwd_x(const T* dy, const T* w, T* dx, int n, int in, int out) {
  for (int i = 0; i < n; ++i) {
    const T* dyi = dy + static_cast<int64_t>(i) * out;
    T* dxi = dx + static_cast<int64_t>(i) * in;
    for (int k = 0; k < in; ++k) {
      double acc = 0.0;
      const T* wk = w + static_cast<int64_t>(k) * out;
      for (int o = 0; o < out; ++o)
        acc += static_cast<double>(dyi[o]) * static_cast<double>(wk[o]);
      dxi[k] += static_cast<T>(acc);
    }
  }
}

template <typename T>
void dense_bwd_w(const T* x, const T* dy, T* dw, T* db, int n, int in, int out) {
  std::vector<double> wacc(static_cast<size_t>(in) * out, 0.0);
  std::vector<double> bacc(db ? out : 0, 0.0);
  for (int i = 0; i < n; ++i) {
    const T* xi = x + static_cast<int64_t>(i) * in;
    const T* dyi = dy + static_cast<int64_t>(i) * out;
    for (int k = 0; k < in; ++k) {
      const double xv = xi[k];
      double* row = wacc.data() + static_cast<int64_t>(k) * out;
      for (int o = 0; o < out; ++o) row[o] += xv * static_cast<double>(dyi[o]);
    }
    if (db)
      for (int o = 0; o < out; ++o) bacc[o] += static_cast<double>(dyi[o]);
  }
  for (size_t i = 0; i < wacc.size(); ++i) dw[i] += static_cast<T>(wacc[i]);
  if (db)
    for (int o = 0; o < out; ++o) db[o] += static_cast<T>(bacc[o]);
}

// ----- shared im2col machinery ------------------------------------------

struct Conv2dShape {
  int n, c, h, w;       // input
  int f, kh, kw;        // kernel
  int sh, sw, ph, pw;   // stride / padding
  int oh() const { return (h + 2 * ph - kh) / sh + 1; }
  int ow() const { return (w + 2 * pw - kw) / sw + 1; }
  int taps() const { return c * kh * kw; }
  int positions() const { return oh() * ow(); }
};

struct Conv3dShape {
  int n, c, d, h, w;
  int f, kd, kh, kw;
  int sd, sh, sw, pd, ph, pw;
  int od() const { return (d + 2 * pd - kd) / sd + 1; }
  int oh() const { return (h + 2 * ph - kh) / sh + 1; }
  int ow() const { return (w + 2 * pw - kw) / sw + 1; }
  int taps() const { return c * kd * kh * kw; }
  int positions() const { return od() * oh() * ow(); }
};

namespace detail {

// Patch matrix for one sample: [positions, taps], zero for padding.
template <typename T>
void im2col2d(const T* x, T* patch, const Conv2dShape& s) {
  const int oh = s.oh(), ow = s.ow(), taps = s.taps();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* prow = patch + (static_cast<int64_t>(oy) * ow + ox) * taps;
      int k = 0;
      for (int c = 0; c < s.c; ++c) {
        const T* xc = x + static_cast<int64_t>(c) * s.h * s.w;
        for (int ky = 0; ky < s.kh; ++ky) {
          const int iy = oy * s.sh - s.ph + ky;
          if (iy < 0 || iy >= s.h) {
            for (int kx = 0; kx < s.kw; ++kx) prow[k++] = T(0);
            continue;
          }
          const T* xrow = xc + static_cast<int64_t>(iy) * s.w;
          for (int kx = 0; kx < s.kw; ++kx) {
            const int ix = ox * s.sw - s.pw + kx;
            prow[k++] = (ix < 0 || ix >= s.w) ? T(0) : xrow[ix];
          }
        }
      }
    }
  }
}

// Adds patch rows back into the image (adjoint of im2col2d).
template <typename T>
void col2im2d_add(const T* patch, double* x, const Conv2dShape& s) {
  const int oh = s.oh(), ow = s.ow(), taps = s.taps();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const T* prow = patch + (static_cast<int64_t>(oy) * ow + ox) * taps;
      int k = 0;
      for (int c = 0; c < s.c; ++c) {
        double* xc = x + static_cast<int64_t>(c) * s.h * s.w;
        for (int ky = 0; ky < s.kh; ++ky) {
          const int iy = oy * s.sh - s.ph + ky;
          if (iy < 0 || iy >= s.h) {
            k += s.kw;
            continue;
          }
          double* xrow = xc + static_cast<int64_t>(iy) * s.w;
          for (int kx = 0; kx < s.kw; ++kx, ++k) {
            const int ix = ox * s.sw - s.pw + kx;
            if (ix >= 0 && ix < s.w) xrow[ix] += static_cast<double>(prow[k]);
          }
        }
      }
    }
  }
}

template <typename T>
void im2col3d(const T* x, T* patch, const Conv3dShape& s) {
  const int od = s.od(), oh = s.oh(), ow = s.ow(), taps = s.taps();
  const int64_t xplane = static_cast<int64_t>(s.h) * s.w;
  const int64_t xvol = static_cast<int64_t>(s.d) * xplane;
  for (int oz = 0; oz < od; ++oz) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* prow =
            patch + ((static_cast<int64_t>(oz) * oh + oy) * ow + ox) * taps;
        int k = 0;
        for (int c = 0; c < s.c; ++c) {
          const T* xc = x + static_cast<int64_t>(c) * xvol;
          for (int kz = 0; kz < s.kd; ++kz) {
            const int iz = oz * s.sd - s.pd + kz;
            if (iz < 0 || iz >= s.d) {
              for (int i = 0; i < s.kh * s.kw; ++i) prow[k++] = T(0);
              continue;
            }
            for (int ky = 0; ky < s.kh; ++ky) {
              const int iy = oy * s.sh - s.ph + ky;
              if (iy < 0 || iy >= s.h) {
                for (int kx = 0; kx < s.kw; ++kx) prow[k++] = T(0);
                continue;
              }
              const T* xrow = xc + iz * xplane + static_cast<int64_t>(iy) * s.w;
              for (int kx = 0; kx < s.kw; ++kx) {
                const int ix = ox * s.sw - s.pw + kx;
                prow[k++] = (ix < 0 || ix >= s.w) ? T(0) : xrow[ix];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3d_add(const T* patch, double* x, const Conv3dShape& s) {
  const int od = s.od(), oh = s.oh(), ow = s.ow(), taps = s.taps();
  const int64_t xplane = static_cast<int64_t>(s.h) * s.w;
  const int64_t xvol = static_cast<int64_t>(s.d) * xplane;
  for (int oz = 0; oz < od; ++oz) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* prow =
            patch + ((static_cast<int64_t>(oz) * oh + oy) * ow + ox) * taps;
        int k = 0;
        for (int c = 0; c < s.c; ++c) {
          double* xc = x + static_cast<int64_t>(c) * xvol;
          for (int kz = 0; kz < s.kd; ++kz) {
            const int iz = oz * s.sd - s.pd + kz;
            if (iz < 0 || iz >= s.d) {
              k += s.kh * s.kw;
              continue;
            }
            for (int ky = 0; ky < s.kh; ++ky) {
              const int iy = oy * s.sh - s.ph + ky;
              if (iy < 0 || iy >= s.h) {
                k += s.kw;
                continue;
              }
              double* xrow = xc + iz * xplane + static_cast<int64_t>(iy) * s.w;
              for (int kx = 0; kx < s.kw; ++kx, ++k) {
                const int ix = ox * s.sw - s.pw + kx;
                if (ix >= 0 && ix < s.w) xrow[ix] += static_cast<double>(prow[k]);
              }
            }
          }
        }
      }
    }
  }
}

// y[p, f] = bias[f] + sum_k patch[p, k] * wt[k, f]; y written strided so the
// caller keeps the [F, positions] layout. Positions run in blocks of eight so
// each tap broadcasts over eight independent double accumulators.
template <typename T>
void gemm_patch_fwd(const T* patch, const T* wt, const T* b, T* y, int positions,
                    int taps, int f, int64_t y_stride) {
  constexpr int kBlock = 8;
  std::vector<double> acc(static_cast<size_t>(f) * kBlock);
  for (int p0 = 0; p0 < positions; p0 += kBlock) {
    const int pn = std::min(kBlock, positions - p0);
    if (b) {
      for (int o = 0; o < f; ++o)
        std::fill(acc.begin() + o * kBlock, acc.begin() + o * kBlock + kBlock,
                  static_cast<double>(b[o]));
    } else {
      std::fill(acc.begin(), acc.end(), 0.0);
    }
    if (pn == kBlock) {
      for (int k = 0; k < taps; ++k) {
        double pv[kBlock];
        for (int j = 0; j < kBlock; ++j)
          pv[j] = patch[static_cast<int64_t>(p0 + j) * taps + k];
        const T* wrow = wt + static_cast<int64_t>(k) * f;
        for (int o = 0; o < f; ++o) {
          const double wv = wrow[o];
          double* a = acc.data() + o * kBlock;
          for (int j = 0; j < kBlock; ++j) a[j] += wv * pv[j];
        }
      }
    } else {
      for (int k = 0; k < taps; ++k) {
        const T* wrow = wt + static_cast<int64_t>(k) * f;
        for (int j = 0; j < pn; ++j) {
          const double pv = patch[static_cast<int64_t>(p0 + j) * taps + k];
          for (int o = 0; o < f; ++o) acc[o * kBlock + j] += pv * static_cast<double>(wrow[o]);
        }
      }
    }
    for (int o = 0; o < f; ++o)
      for (int j = 0; j < pn; ++j)
        y[static_cast<int64_t>(o) * y_stride + p0 + j] =
            static_cast<T>(acc[o * kBlock + j]);
  }
}

// dpatch[p, k] = sum_f dy[f, p] * w[f, k] (w in [F, taps] layout).
template <typename T>
void gemm_patch_bwd_x(const T* dy, const T* w, T* dpatch, int positions, int taps,
                      int f, int64_t dy_stride) {
  std::vector<double> acc(taps);
  for (int p = 0; p < positions; ++p) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int o = 0; o < f; ++o) {
      const double g = dy[static_cast<int64_t>(o) * dy_stride + p];
      const T* wrow = w + static_cast<int64_t>(o) * taps;
      for (int k = 0; k < taps; ++k) acc[k] += g * static_cast<double>(wrow[k]);
    }
    T* prow = dpatch + static_cast<int64_t>(p) * taps;
    for (int k = 0; k < taps; ++k) prow[k] = static_cast<T>(acc[k]);
  }
}

// wacc[f, k] += sum_p dy[f, p] * patch[p, k]; bacc[f] += sum_p dy[f, p].
template <typename T>
void gemm_patch_bwd_w(const T* patch, const T* dy, double* wacc, double* bacc,
                      int positions, int taps, int f, int64_t dy_stride) {
  for (int p = 0; p < positions; ++p) {
    const T* prow = patch + static_cast<int64_t>(p) * taps;
    for (int o = 0; o < f; ++o) {
      const double g = dy[static_cast<int64_t>(o) * dy_stride + p];
      if (bacc) bacc[o] += g;
      double* wrow = wacc + static_cast<int64_t>(o) * taps;
      for (int k = 0; k < taps; ++k) wrow[k] += g * static_cast<double>(prow[k]);
    }
  }
}

template <typename T>
std::vector<T> transpose_weights(const T* w, int f, int taps) {
  std::vector<T> wt(static_cast<size_t>(taps) * f);
  for (int o = 0; o < f; ++o)
    for (int k = 0; k < taps; ++k) wt[static_cast<int64_t>(k) * f + o] = w[o * taps + k];
  return wt;
}

}  // namespace detail

// ----- conv2d -----------------------------------------------------------

template <typename T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, const Conv2dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<T> wt = detail::transpose_weights(w, s.f, taps);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col2d(x + static_cast<int64_t>(n) * s.c * s.h * s.w, patch.data(), s);
    detail::gemm_patch_fwd(patch.data(), wt.data(), b,
                           y + static_cast<int64_t>(n) * s.f * positions,
                           positions, taps, s.f, positions);
  }
}

template <typename T>
void conv2d_bwd_x(const T* dy, const T* w, T* dx, const Conv2dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  std::vector<T> dpatch(static_cast<size_t>(positions) * taps);
  std::vector<double> plane(static_cast<size_t>(s.c) * s.h * s.w);
  for (int n = 0; n < s.n; ++n) {
    detail::gemm_patch_bwd_x(dy + static_cast<int64_t>(n) * s.f * positions, w,
                             dpatch.data(), positions, taps, s.f, positions);
    std::fill(plane.begin(), plane.end(), 0.0);
    detail::col2im2d_add(dpatch.data(), plane.data(), s);
    T* dxn = dx + static_cast<int64_t>(n) * s.c * s.h * s.w;
    for (size_t i = 0; i < plane.size(); ++i) dxn[i] += static_cast<T>(plane[i]);
  }
}

template <typename T>
void conv2d_bwd_w(const T* x, const T* dy, T* dw, T* db, const Conv2dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<double> wacc(static_cast<size_t>(s.f) * taps, 0.0);
  std::vector<double> bacc(db ? s.f : 0, 0.0);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col2d(x + static_cast<int64_t>(n) * s.c * s.h * s.w, patch.data(), s);
    detail::gemm_patch_bwd_w(patch.data(),
                             dy + static_cast<int64_t>(n) * s.f * positions,
                             wacc.data(), db ? bacc.data() : nullptr, positions,
                             taps, s.f, positions);
  }
  for (size_t i = 0; i < wacc.size(); ++i) dw[i] += static_cast<T>(wacc[i]);
  if (db)
    for (int f = 0; f < s.f; ++f) db[f] += static_cast<T>(bacc[f]);
}

// ----- deconv2d (transposed convolution) --------------------------------
// Weight layout [C_in, F_out, KH, KW]; OH = (H-1)*sh - 2*ph + kh. The output
// plays the role of the convolution input in the im2col geometry.

struct Deconv2dShape {
  int n, c, h, w;
  int f, kh, kw;
  int sh, sw, ph, pw;
  int oh() const { return (h - 1) * sh - 2 * ph + kh; }
  int ow() const { return (w - 1) * sw - 2 * pw + kw; }

  // Equivalent convolution mapping the output image back onto input positions.
  Conv2dShape conv_view() const {
    return Conv2dShape{n, f, oh(), ow(), c, kh, kw, sh, sw, ph, pw};
  }
};

template <typename T>
void deconv2d_fwd(const T* x, const T* w, const T* b, T* y, const Deconv2dShape& s) {
  const Conv2dShape cv = s.conv_view();  // positions = input cells of x
  const int positions = cv.positions(), taps = cv.taps();
  const int64_t in_plane = static_cast<int64_t>(s.h) * s.w;
  const int64_t out_size = static_cast<int64_t>(s.f) * s.oh() * s.ow();
  // w is [C_in, F*KH*KW] which is exactly the [positions-channel, taps] GEMM
  // operand for the scatter form.
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<double> out(static_cast<size_t>(out_size));
  for (int n = 0; n < s.n; ++n) {
    detail::gemm_patch_bwd_x(x + static_cast<int64_t>(n) * s.c * in_plane, w,
                             patch.data(), positions, taps, s.c, in_plane);
    if (b) {
      for (int f = 0; f < s.f; ++f)
        std::fill(out.begin() + static_cast<int64_t>(f) * s.oh() * s.ow(),
                  out.begin() + static_cast<int64_t>(f + 1) * s.oh() * s.ow(),
                  static_cast<double>(b[f]));
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
    detail::col2im2d_add(patch.data(), out.data(), cv);
    T* yn = y + static_cast<int64_t>(n) * out_size;
    for (int64_t i = 0; i < out_size; ++i) yn[i] = static_cast<T>(out[i]);
  }
}

template <typename T>
void deconv2d_bwd_x(const T* dy, const T* w, T* dx, const Deconv2dShape& s) {
  const Conv2dShape cv = s.conv_view();
  const int positions = cv.positions(), taps = cv.taps();
  const int64_t in_plane = static_cast<int64_t>(s.h) * s.w;
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<T> wt = detail::transpose_weights(w, s.c, taps);
  std::vector<T> dxn_tmp(static_cast<size_t>(s.c) * in_plane);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col2d(dy + static_cast<int64_t>(n) * s.f * s.oh() * s.ow(),
                     patch.data(), cv);
    detail::gemm_patch_fwd(patch.data(), wt.data(), static_cast<const T*>(nullptr),
                           dxn_tmp.data(), positions, taps, s.c, in_plane);
    T* dxn = dx + static_cast<int64_t>(n) * s.c * in_plane;
    for (size_t i = 0; i < dxn_tmp.size(); ++i) dxn[i] += dxn_tmp[i];
  }
}

template <typename T>
void deconv2d_bwd_w(const T* x, const T* dy, T* dw, T* db, const Deconv2dShape& s) {
  const Conv2dShape cv = s.conv_view();
  const int positions = cv.positions(), taps = cv.taps();
  const int64_t in_plane = static_cast<int64_t>(s.h) * s.w;
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<double> wacc(static_cast<size_t>(s.c) * taps, 0.0);
  std::vector<double> bacc(db ? s.f : 0, 0.0);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col2d(dy + static_cast<int64_t>(n) * s.f * s.oh() * s.ow(),
                     patch.data(), cv);
    detail::gemm_patch_bwd_w(patch.data(), x + static_cast<int64_t>(n) * s.c * in_plane,
                             wacc.data(), nullptr, positions, taps, s.c, in_plane);
    if (db) {
      const T* dyn = dy + static_cast<int64_t>(n) * s.f * s.oh() * s.ow();
      for (int f = 0; f < s.f; ++f) {
        double acc = 0.0;
        const T* dyf = dyn + static_cast<int64_t>(f) * s.oh() * s.ow();
        for (int i = 0; i < s.oh() * s.ow(); ++i) acc += static_cast<double>(dyf[i]);
        bacc[f] += acc;
      }
    }
  }
  for (size_t i = 0; i < wacc.size(); ++i) dw[i] += static_cast<T>(wacc[i]);
  if (db)
    for (int f = 0; f < s.f; ++f) db[f] += static_cast<T>(bacc[f]);
}

// ----- conv3d -----------------------------------------------------------

template <typename T>
void conv3d_fwd(const T* x, const T* w, const T* b, T* y, const Conv3dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  const int64_t xvol = static_cast<int64_t>(s.c) * s.d * s.h * s.w;
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<T> wt = detail::transpose_weights(w, s.f, taps);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col3d(x + n * xvol, patch.data(), s);
    detail::gemm_patch_fwd(patch.data(), wt.data(), b,
                           y + static_cast<int64_t>(n) * s.f * positions,
                           positions, taps, s.f, positions);
  }
}

template <typename T>
void conv3d_bwd_x(const T* dy, const T* w, T* dx, const Conv3dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  const int64_t xvol = static_cast<int64_t>(s.c) * s.d * s.h * s.w;
  std::vector<T> dpatch(static_cast<size_t>(positions) * taps);
  std::vector<double> vol(static_cast<size_t>(xvol));
  for (int n = 0; n < s.n; ++n) {
    detail::gemm_patch_bwd_x(dy + static_cast<int64_t>(n) * s.f * positions, w,
                             dpatch.data(), positions, taps, s.f, positions);
    std::fill(vol.begin(), vol.end(), 0.0);
    detail::col2im3d_add(dpatch.data(), vol.data(), s);
    T* dxn = dx + n * xvol;
    for (int64_t i = 0; i < xvol; ++i) dxn[i] += static_cast<T>(vol[i]);
  }
}

template <typename T>
void conv3d_bwd_w(const T* x, const T* dy, T* dw, T* db, const Conv3dShape& s) {
  const int positions = s.positions(), taps = s.taps();
  const int64_t xvol = static_cast<int64_t>(s.c) * s.d * s.h * s.w;
  std::vector<T> patch(static_cast<size_t>(positions) * taps);
  std::vector<double> wacc(static_cast<size_t>(s.f) * taps, 0.0);
  std::vector<double> bacc(db ? s.f : 0, 0.0);
  for (int n = 0; n < s.n; ++n) {
    detail::im2col3d(x + n * xvol, patch.data(), s);
    detail::gemm_patch_bwd_w(patch.data(),
                             dy + static_cast<int64_t>(n) * s.f * positions,
                             wacc.data(), db ? bacc.data() : nullptr, positions,
                             taps, s.f, positions);
  }
  for (size_t i = 0; i < wacc.size(); ++i) dw[i] += static_cast<T>(wacc[i]);
  if (db)
    for (int f = 0; f < s.f; ++f) db[f] += static_cast<T>(bacc[f]);
}

}  // namespace socnav::kernels
