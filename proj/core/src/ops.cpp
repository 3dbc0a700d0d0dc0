#include "cxrseg/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cxrseg/errors.hpp"

namespace cxrseg {

namespace {

struct Dims4 {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
};

Dims4 dims4(const Tensor& t, const char* what) {
  if (t.rank() != 4)
    throw ShapeError(std::string(what) + " expects an NCHW tensor, got " + shape_str(t.shape()));
  const auto& s = t.shape();
  return {s[0], s[1], s[2], s[3]};
}

long floor_div(long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
long ceil_div(long a, long b) { return -floor_div(-a, b); }

// Range of output columns whose input column ox*stride - pad + k lies in [0, in).
std::pair<long, long> valid_range(long in, long out, long k, long stride, long pad) {
  const long lo = std::max(0L, ceil_div(pad - k, stride));
  const long hi = std::min(out - 1, floor_div(in - 1 + pad - k, stride));
  return {lo, hi};
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
  const auto in = dims4(input, "conv2d input");
  if (kernel.rank() != 4)
    throw ShapeError("conv2d kernel must be [Cout,Cin,kh,kw], got " + shape_str(kernel.shape()));
  const auto& ks = kernel.shape();
  const std::size_t cout = ks[0], kh = ks[2], kw = ks[3];
  if (ks[1] != in.c)
    throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape()) + " vs kernel " +
                     shape_str(ks));
  if (stride < 1) throw UsageError("conv2d stride must be >= 1");
  if (padding < 0) throw UsageError("conv2d padding must be >= 0");
  const long s = stride, p = padding;
  if (static_cast<long>(kh) > static_cast<long>(in.h) + 2 * p ||
      static_cast<long>(kw) > static_cast<long>(in.w) + 2 * p)
    throw ShapeError("conv2d kernel " + shape_str(ks) + " larger than padded input " +
                     shape_str(input.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(cout) + " output channels");

  const long H = in.h, W = in.w;
  const long Ho = (H + 2 * p - static_cast<long>(kh)) / s + 1;
  const long Wo = (W + 2 * p - static_cast<long>(kw)) / s + 1;
  Tensor out({in.n, cout, static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});

  const auto x = input.values();
  const auto k = kernel.values();
  auto y = out.values();
  const std::size_t out_plane = static_cast<std::size_t>(Ho * Wo);

  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* yp = y.data() + (n * cout + co) * out_plane;
      if (bias.defined()) std::fill(yp, yp + out_plane, bias.values()[co]);
      for (std::size_t ci = 0; ci < in.c; ++ci) {
        const double* xp = x.data() + (n * in.c + ci) * in.plane();
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const auto [oy_lo, oy_hi] = valid_range(H, Ho, static_cast<long>(ky), s, p);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double wv = k[((co * in.c + ci) * kh + ky) * kw + kx];
            const auto [ox_lo, ox_hi] = valid_range(W, Wo, static_cast<long>(kx), s, p);
            for (long oy = oy_lo; oy <= oy_hi; ++oy) {
              const long iy = oy * s - p + static_cast<long>(ky);
              const double* xrow = xp + iy * W;
              double* yrow = yp + oy * Wo;
              for (long ox = ox_lo; ox <= ox_hi; ++ox)
                yrow[ox] += wv * xrow[ox * s - p + static_cast<long>(kx)];
            }
          }
        }
      }
    }
  }

  return Tensor::record(
      std::move(out), "conv2d", {input, kernel, bias},
      [input, kernel, bias, in, cout, kh, kw, s, p, H, W, Ho, Wo, out_plane](
          std::span<const double>, std::span<const double> gy) mutable {
        const bool want_x = input.requires_grad();
        const bool want_k = kernel.requires_grad();
        const bool want_b = bias.defined() && bias.requires_grad();
        const auto x = input.values();
        const auto k = kernel.values();
        std::vector<double> gx(want_x ? x.size() : 0), gk(want_k ? k.size() : 0),
            gb(want_b ? cout : 0);
        for (std::size_t n = 0; n < in.n; ++n) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gyp = gy.data() + (n * cout + co) * out_plane;
            if (want_b)
              for (std::size_t i = 0; i < out_plane; ++i) gb[co] += gyp[i];
            for (std::size_t ci = 0; ci < in.c; ++ci) {
              const std::size_t xoff = (n * in.c + ci) * in.plane();
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const auto [oy_lo, oy_hi] = valid_range(H, Ho, static_cast<long>(ky), s, p);
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::size_t kidx = ((co * in.c + ci) * kh + ky) * kw + kx;
                  const double wv = k[kidx];
                  const auto [ox_lo, ox_hi] = valid_range(W, Wo, static_cast<long>(kx), s, p);
                  double acc = 0.0;
                  for (long oy = oy_lo; oy <= oy_hi; ++oy) {
                    const long iy = oy * s - p + static_cast<long>(ky);
                    const double* gyrow = gyp + oy * Wo;
                    const long base = static_cast<long>(xoff) + iy * W - p + static_cast<long>(kx);
                    for (long ox = ox_lo; ox <= ox_hi; ++ox) {
                      const long xi = base + ox * s;
                      if (want_k) acc += gyrow[ox] * x[xi];
                      if (want_x) gx[xi] += wv * gyrow[ox];
                    }
                  }
                  if (want_k) gk[kidx] += acc;
                }
              }
            }
          }
        }
        if (want_x) input.accumulate_grad(gx);
        if (want_k) kernel.accumulate_grad(gk);
        if (want_b) bias.accumulate_grad(gb);
      });
}

// ---------------------------------------------------------------------------
// pooling / resampling / concatenation

Tensor max_pool2d(const Tensor& input, int window, int stride) {
  const auto d = dims4(input, "max_pool2d");
  if (window < 1 || stride < 1) throw UsageError("max_pool2d window and stride must be >= 1");
  const auto win = static_cast<std::size_t>(window), st = static_cast<std::size_t>(stride);
  if (d.h % st != 0 || d.w % st != 0)
    throw ShapeError("max_pool2d: extents of " + shape_str(input.shape()) +
                     " not divisible by stride " + std::to_string(stride));
  if (win > d.h || win > d.w)
    throw ShapeError("max_pool2d window larger than input " + shape_str(input.shape()));
  const std::size_t ho = (d.h - win) / st + 1, wo = (d.w - win) / st + 1;
  Tensor out({d.n, d.c, ho, wo});
  std::vector<std::size_t> argmax(out.numel());
  const auto x = input.values();
  auto y = out.values();
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = nc * d.plane();
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
        std::size_t best = base + (oy * st) * d.w + ox * st;
        for (std::size_t ky = 0; ky < win; ++ky)
          for (std::size_t kx = 0; kx < win; ++kx) {
            const std::size_t idx = base + (oy * st + ky) * d.w + ox * st + kx;
            if (x[idx] > x[best]) best = idx;  // strict: first maximum wins
          }
        argmax[o] = best;
        y[o] = x[best];
      }
    }
  }
  return Tensor::record(std::move(out), "max_pool2d", {input},
                        [input, argmax = std::move(argmax)](std::span<const double>,
                                                            std::span<const double> gy) mutable {
                          auto gx = input.grad_mut();
                          for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
                        });
}

Tensor upsample_nearest2x(const Tensor& input) {
  const auto d = dims4(input, "upsample_nearest2x");
  const std::size_t ho = 2 * d.h, wo = 2 * d.w;
  Tensor out({d.n, d.c, ho, wo});
  const auto x = input.values();
  auto y = out.values();
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        y[(nc * ho + oy) * wo + ox] = x[(nc * d.h + oy / 2) * d.w + ox / 2];
  return Tensor::record(std::move(out), "upsample_nearest2x", {input},
                        [input, d, ho, wo](std::span<const double>,
                                           std::span<const double> gy) mutable {
                          auto gx = input.grad_mut();
                          for (std::size_t nc = 0; nc < d.n * d.c; ++nc)
                            for (std::size_t oy = 0; oy < ho; ++oy)
                              for (std::size_t ox = 0; ox < wo; ++ox)
                                gx[(nc * d.h + oy / 2) * d.w + ox / 2] +=
                                    gy[(nc * ho + oy) * wo + ox];
                        });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const auto da = dims4(a, "concat_channels"), db = dims4(b, "concat_channels");
  if (da.n != db.n || da.h != db.h || da.w != db.w)
    throw ShapeError("concat_channels: " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ outside the channel axis");
  const std::size_t c = da.c + db.c, plane = da.plane();
  Tensor out({da.n, c, da.h, da.w});
  auto y = out.values();
  const auto xa = a.values(), xb = b.values();
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(xa.data() + n * da.c * plane, da.c * plane, y.data() + n * c * plane);
    std::copy_n(xb.data() + n * db.c * plane, db.c * plane, y.data() + (n * c + da.c) * plane);
  }
  return Tensor::record(
      std::move(out), "concat_channels", {a, b},
      [a, b, da, db, c, plane](std::span<const double>, std::span<const double> gy) mutable {
        for (std::size_t n = 0; n < da.n; ++n) {
          if (a.requires_grad()) {
            auto ga = a.grad_mut();
            for (std::size_t i = 0; i < da.c * plane; ++i)
              ga[n * da.c * plane + i] += gy[n * c * plane + i];
          }
          if (b.requires_grad()) {
            auto gb = b.grad_mut();
            for (std::size_t i = 0; i < db.c * plane; ++i)
              gb[n * db.c * plane + i] += gy[(n * c + da.c) * plane + i];
          }
        }
      });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto d = dims4(x, "slice_channels");
  if (count == 0 || begin + count > d.c)
    throw ShapeError("slice_channels [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of range for " + shape_str(x.shape()));
  const std::size_t plane = d.plane();
  Tensor out({d.n, count, d.h, d.w});
  auto y = out.values();
  const auto xv = x.values();
  for (std::size_t n = 0; n < d.n; ++n)
    std::copy_n(xv.data() + (n * d.c + begin) * plane, count * plane,
                y.data() + n * count * plane);
  return Tensor::record(std::move(out), "slice_channels", {x},
                        [x, d, begin, count, plane](std::span<const double>,
                                                    std::span<const double> gy) mutable {
                          auto gx = x.grad_mut();
                          for (std::size_t n = 0; n < d.n; ++n)
                            for (std::size_t i = 0; i < count * plane; ++i)
                              gx[(n * d.c + begin) * plane + i] += gy[n * count * plane + i];
                        });
}

// ---------------------------------------------------------------------------
// batch norm

BatchNormParams BatchNormParams::make(std::size_t channels) {
  return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true),
          Tensor::zeros({channels}), Tensor::full({channels}, 1.0)};
}

namespace {
void check_bn(const Dims4& d, const BatchNormParams& bn, const Tensor& input) {
  for (const Tensor* t : {&bn.scale, &bn.shift, &bn.running_mean, &bn.running_var})
    if (!t->defined() || t->numel() != d.c)
      throw ShapeError("batch_norm parameters do not match channels of " +
                       shape_str(input.shape()));
}
}  // namespace

Tensor batch_norm(const Tensor& input, BatchNormParams& bn, bool training) {
  if (!training) return batch_norm_eval(input, bn);
  const auto d = dims4(input, "batch_norm");
  check_bn(d, bn, input);
  const std::size_t plane = d.plane(), count = d.n * plane;
  const auto x = input.values();
  std::vector<double> mean(d.c, 0.0), inv_std(d.c, 0.0);
  for (std::size_t c = 0; c < d.c; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < d.n; ++n) {
      const double* xp = x.data() + (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) s += xp[i];
    }
    mean[c] = s / static_cast<double>(count);
    double v = 0.0;
    for (std::size_t n = 0; n < d.n; ++n) {
      const double* xp = x.data() + (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) v += (xp[i] - mean[c]) * (xp[i] - mean[c]);
    }
    const double var = v / static_cast<double>(count);
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
    const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : var;
    auto rm = bn.running_mean.values();
    auto rv = bn.running_var.values();
    rm[c] = kBatchNormMomentum * rm[c] + (1.0 - kBatchNormMomentum) * mean[c];
    rv[c] = kBatchNormMomentum * rv[c] + (1.0 - kBatchNormMomentum) * unbiased;
  }

  Tensor out(input.shape());
  std::vector<double> xhat(x.size());
  auto y = out.values();
  const auto g = bn.scale.values(), b = bn.shift.values();
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t off = (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[off + i] = (x[off + i] - mean[c]) * inv_std[c];
        y[off + i] = g[c] * xhat[off + i] + b[c];
      }
    }

  Tensor scale = bn.scale, shift = bn.shift;
  return Tensor::record(
      std::move(out), "batch_norm", {input, scale, shift},
      [input, scale, shift, d, plane, count, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](std::span<const double>, std::span<const double> gy) mutable {
        std::vector<double> sum_gy(d.c, 0.0), sum_gy_xhat(d.c, 0.0);
        for (std::size_t n = 0; n < d.n; ++n)
          for (std::size_t c = 0; c < d.c; ++c) {
            const std::size_t off = (n * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_gy[c] += gy[off + i];
              sum_gy_xhat[c] += gy[off + i] * xhat[off + i];
            }
          }
        if (scale.requires_grad()) scale.accumulate_grad(sum_gy_xhat);
        if (shift.requires_grad()) shift.accumulate_grad(sum_gy);
        if (!input.requires_grad()) return;
        auto gx = input.grad_mut();
        const auto g = scale.values();
        const double m = static_cast<double>(count);
        for (std::size_t n = 0; n < d.n; ++n)
          for (std::size_t c = 0; c < d.c; ++c) {
            const std::size_t off = (n * d.c + c) * plane;
            const double k = g[c] * inv_std[c] / m;
            for (std::size_t i = 0; i < plane; ++i)
              gx[off + i] += k * (m * gy[off + i] - sum_gy[c] - xhat[off + i] * sum_gy_xhat[c]);
          }
      });
}

Tensor batch_norm_eval(const Tensor& input, const BatchNormParams& bn) {
  const auto d = dims4(input, "batch_norm");
  check_bn(d, bn, input);
  const std::size_t plane = d.plane();
  std::vector<double> a(d.c), b(d.c);
  const auto g = bn.scale.values(), sh = bn.shift.values();
  const auto rm = bn.running_mean.values(), rv = bn.running_var.values();
  for (std::size_t c = 0; c < d.c; ++c) {
    a[c] = g[c] / std::sqrt(rv[c] + kBatchNormEps);
    b[c] = sh[c] - a[c] * rm[c];
  }
  Tensor out(input.shape());
  const auto x = input.values();
  auto y = out.values();
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t off = (n * d.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) y[off + i] = a[c] * x[off + i] + b[c];
    }
  Tensor scale = bn.scale, shift = bn.shift;
  std::vector<double> inv_std(d.c);
  for (std::size_t c = 0; c < d.c; ++c) inv_std[c] = 1.0 / std::sqrt(rv[c] + kBatchNormEps);
  const std::vector<double> mean(rm.begin(), rm.end());
  return Tensor::record(
      std::move(out), "batch_norm_eval", {input, scale, shift},
      [input, scale, shift, d, plane, a = std::move(a), inv_std = std::move(inv_std),
       mean](std::span<const double>, std::span<const double> gy) mutable {
        const auto x = input.values();
        std::vector<double> gs(d.c, 0.0), gb(d.c, 0.0);
        std::span<double> gx;
        if (input.requires_grad()) gx = input.grad_mut();
        for (std::size_t n = 0; n < d.n; ++n)
          for (std::size_t c = 0; c < d.c; ++c) {
            const std::size_t off = (n * d.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              gb[c] += gy[off + i];
              gs[c] += gy[off + i] * (x[off + i] - mean[c]) * inv_std[c];
              if (!gx.empty()) gx[off + i] += a[c] * gy[off + i];
            }
          }
        if (scale.requires_grad()) scale.accumulate_grad(gs);
        if (shift.requires_grad()) shift.accumulate_grad(gb);
      });
}

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
  Tensor out(a.shape());
  auto y = out.values();
  const auto xa = a.values(), xb = b.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
  return Tensor::record(std::move(out), "add", {a, b},
                        [a, b](std::span<const double>, std::span<const double> gy) mutable {
                          if (a.requires_grad()) a.accumulate_grad(gy);
                          if (b.requires_grad()) b.accumulate_grad(gy);
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    auto y = out.values();
    const auto xa = a.values(), xb = b.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
    return Tensor::record(std::move(out), "mul", {a, b},
                          [a, b](std::span<const double>, std::span<const double> gy) mutable {
                            const auto xa = a.values(), xb = b.values();
                            if (a.requires_grad()) {
                              auto ga = a.grad_mut();
                              for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * xb[i];
                            }
                            if (b.requires_grad()) {
                              auto gb = b.grad_mut();
                              for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * xa[i];
                            }
                          });
  }
  const auto da = dims4(a, "mul"), db = dims4(b, "mul");
  if (db.c != 1 || da.n != db.n || da.h != db.h || da.w != db.w)
    throw ShapeError("mul: cannot broadcast " + shape_str(b.shape()) + " onto " +
                     shape_str(a.shape()));
  const std::size_t plane = da.plane();
  Tensor out(a.shape());
  auto y = out.values();
  const auto xa = a.values(), xb = b.values();
  for (std::size_t n = 0; n < da.n; ++n)
    for (std::size_t c = 0; c < da.c; ++c)
      for (std::size_t i = 0; i < plane; ++i)
        y[(n * da.c + c) * plane + i] = xa[(n * da.c + c) * plane + i] * xb[n * plane + i];
  return Tensor::record(
      std::move(out), "mul_bcast", {a, b},
      [a, b, da, plane](std::span<const double>, std::span<const double> gy) mutable {
        const auto xa = a.values(), xb = b.values();
        std::span<double> ga, gb;
        if (a.requires_grad()) ga = a.grad_mut();
        if (b.requires_grad()) gb = b.grad_mut();
        for (std::size_t n = 0; n < da.n; ++n)
          for (std::size_t c = 0; c < da.c; ++c)
            for (std::size_t i = 0; i < plane; ++i) {
              const std::size_t ia = (n * da.c + c) * plane + i, ib = n * plane + i;
              if (!ga.empty()) ga[ia] += gy[ia] * xb[ib];
              if (!gb.empty()) gb[ib] += gy[ia] * xa[ia];
            }
      });
}

namespace {
// Unary op whose derivative is expressible through the output value.
template <class F, class DF>
Tensor unary_from_output(const Tensor& x, const char* name, F f, DF df_from_y) {
  Tensor out(x.shape());
  auto y = out.values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return Tensor::record(std::move(out), name, {x},
                        [x, df_from_y](std::span<const double> yv,
                                       std::span<const double> gy) mutable {
                          auto gx = x.grad_mut();
                          for (std::size_t i = 0; i < gy.size(); ++i)
                            gx[i] += gy[i] * df_from_y(yv[i]);
                        });
}
}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary_from_output(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_from_output(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary_from_output(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Tensor softmax_channels(const Tensor& x) {
  const auto d = dims4(x, "softmax_channels");
  const std::size_t plane = d.plane();
  Tensor out(x.shape());
  auto y = out.values();
  const auto xv = x.values();
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t base = n * d.c * plane + i;
      double mx = xv[base];
      for (std::size_t c = 1; c < d.c; ++c) mx = std::max(mx, xv[base + c * plane]);
      double s = 0.0;
      for (std::size_t c = 0; c < d.c; ++c) {
        y[base + c * plane] = std::exp(xv[base + c * plane] - mx);
        s += y[base + c * plane];
      }
      for (std::size_t c = 0; c < d.c; ++c) y[base + c * plane] /= s;
    }
  return Tensor::record(std::move(out), "softmax_channels", {x},
                        [x, d, plane](std::span<const double> yv,
                                      std::span<const double> gy) mutable {
                          auto gx = x.grad_mut();
                          for (std::size_t n = 0; n < d.n; ++n)
                            for (std::size_t i = 0; i < plane; ++i) {
                              const std::size_t base = n * d.c * plane + i;
                              double dot = 0.0;
                              for (std::size_t c = 0; c < d.c; ++c)
                                dot += yv[base + c * plane] * gy[base + c * plane];
                              for (std::size_t c = 0; c < d.c; ++c)
                                gx[base + c * plane] +=
                                    yv[base + c * plane] * (gy[base + c * plane] - dot);
                            }
                        });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::record(Tensor::scalar(s), "sum", {x},
                        [x](std::span<const double>, std::span<const double> gy) mutable {
                          auto gx = x.grad_mut();
                          for (auto& g : gx) g += gy[0];
                        });
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out(x.shape());
  auto y = out.values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * factor;
  return Tensor::record(std::move(out), "scale", {x},
                        [x, factor](std::span<const double>, std::span<const double> gy) mutable {
                          auto gx = x.grad_mut();
                          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor;
                        });
}

}  // namespace cxrseg
