#include "coopseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

using MatrixR = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatrixR>;
using ConstMapR = Eigen::Map<const MatrixR>;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

struct Dims4 {
  std::size_t n, c, h, w;
};

Dims4 dims4(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)}; }

// Unrolls one sample's receptive fields into a (C*Kh*Kw) x (Ho*Wo) matrix.
void im2col(const real* in, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, int stride, int pad, std::size_t ho, std::size_t wo, real* col) {
  for (std::size_t ci = 0; ci < c; ++ci) {
    const real* plane = in + ci * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        real* row = col + ((ci * kh + ky) * kw + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
          real* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, real(0));
            continue;
          }
          const real* src = plane + iy * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? real(0) : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into the input gradient.
void col2im(const real* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, int stride, int pad, std::size_t ho, std::size_t wo, real* in) {
  for (std::size_t ci = 0; ci < c; ++ci) {
    real* plane = in + ci * h * w;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const real* row = col + ((ci * kh + ky) * kw + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const real* src = row + oy * wo;
          real* dst = plane + iy * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct ResizeTap {
  std::size_t lo, hi;
  real frac;
};

std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<ResizeTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, static_cast<real>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, int stride, int padding) {
  if (stride <= 0) throw ShapeError("conv2d: stride must be positive");
  if (padding < 0) throw ShapeError("conv2d: padding must be non-negative");
  const auto span = static_cast<std::ptrdiff_t>(in) + 2 * padding - static_cast<std::ptrdiff_t>(kernel);
  if (span < 0 || span % stride != 0) {
    throw ShapeError("conv2d: (" + std::to_string(in) + " + 2*" + std::to_string(padding) + " - " +
                     std::to_string(kernel) + ") is not a non-negative multiple of stride " +
                     std::to_string(stride));
  }
  return static_cast<std::size_t>(span / stride) + 1;
}

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_rank(bias, 1, "conv2d", "bias");
  const auto [n, cin, h, w] = dims4(input);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (n == 0) throw ShapeError("conv2d: empty batch");
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but weight expects " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.dim(0) != cout) throw ShapeError("conv2d: bias length does not match output channels");
  const std::size_t ho = conv_out_size(h, kh, stride, padding);
  const std::size_t wo = conv_out_size(w, kw, stride, padding);

  const std::size_t patch = cin * kh * kw;
  const std::size_t pixels = ho * wo;
  const bool track = g.tracks({&input, &weight, &bias});

  std::vector<real> cols(track ? n * patch * pixels : patch * pixels);
  std::vector<real> out(n * cout * pixels);
  ConstMapR wmat(weight.data().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
  const real* bptr = bias.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    real* col = cols.data() + (track ? b * patch * pixels : 0);
    im2col(input.data().data() + b * cin * h * w, cin, h, w, kh, kw, stride, padding, ho, wo, col);
    MapR o(out.data() + b * cout * pixels, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(pixels));
    o.noalias() = wmat * ConstMapR(col, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(pixels));
    for (std::size_t co = 0; co < cout; ++co) o.row(static_cast<Eigen::Index>(co)).array() += bptr[co];
  }
  check_finite(out, "conv2d");
  Tensor result = Tensor::from({n, cout, ho, wo}, std::move(out), track);
  if (!track) return result;

  g.record("conv2d", {input, weight, bias}, result,
           [input, weight, bias, cols = std::move(cols), n, cin, h, w, cout, kh, kw, ho, wo, patch,
            pixels, stride, padding](const Tensor& output) mutable {
             auto gout = output.grad();
             if (bias.requires_grad()) {
               auto gb = bias.grad();
               for (std::size_t b = 0; b < n; ++b) {
                 for (std::size_t co = 0; co < cout; ++co) {
                   const real* row = gout.data() + (b * cout + co) * pixels;
                   real acc = 0;
                   for (std::size_t p = 0; p < pixels; ++p) acc += row[p];
                   gb[co] += acc;
                 }
               }
             }
             if (weight.requires_grad()) {
               MapR gw(weight.grad().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(patch));
               for (std::size_t b = 0; b < n; ++b) {
                 ConstMapR go(gout.data() + b * cout * pixels, static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(pixels));
                 ConstMapR col(cols.data() + b * patch * pixels, static_cast<Eigen::Index>(patch),
                               static_cast<Eigen::Index>(pixels));
                 gw.noalias() += go * col.transpose();
               }
             }
             if (input.requires_grad()) {
               auto gin = input.grad();
               ConstMapR wmat(weight.data().data(), static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(patch));
               MatrixR gcol(static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(pixels));
               for (std::size_t b = 0; b < n; ++b) {
                 ConstMapR go(gout.data() + b * cout * pixels, static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(pixels));
                 gcol.noalias() = wmat.transpose() * go;
                 col2im(gcol.data(), cin, h, w, kh, kw, stride, padding, ho, wo,
                        gin.data() + b * cin * h * w);
               }
             }
           });
  return result;
}

Tensor relu(Graph& g, const Tensor& input) {
  auto in = input.data();
  std::vector<real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > real(0) ? in[i] : real(0);
  check_finite(out, "relu");
  const bool track = g.tracks({&input});
  Tensor result = Tensor::from(input.shape(), std::move(out), track);
  if (!track) return result;
  g.record("relu", {input}, result, [input](const Tensor& output) mutable {
    auto gout = output.grad();
    auto x = input.data();
    auto gin = input.grad();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > real(0)) gin[i] += gout[i];
    }
  });
  return result;
}

Tensor max_pool2d(Graph& g, const Tensor& input, int k) {
  require_rank(input, 4, "max_pool2d", "input");
  if (k <= 0) throw ShapeError("max_pool2d: k must be positive");
  const auto [n, c, h, w] = dims4(input);
  const auto uk = static_cast<std::size_t>(k);
  if (h % uk != 0 || w % uk != 0) {
    throw ShapeError("max_pool2d: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by " + std::to_string(k));
  }
  const std::size_t ho = h / uk, wo = w / uk;
  std::vector<real> out(n * c * ho * wo);
  std::vector<std::uint32_t> argmax(out.size());
  auto in = input.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const real* src = in.data() + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (oy * uk) * w + ox * uk;
        for (std::size_t dy = 0; dy < uk; ++dy) {
          for (std::size_t dx = 0; dx < uk; ++dx) {
            const std::size_t idx = (oy * uk + dy) * w + ox * uk + dx;
            if (src[idx] > src[best]) best = idx;  // strict: first occurrence wins
          }
        }
        const std::size_t o = plane * ho * wo + oy * wo + ox;
        out[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  check_finite(out, "max_pool2d");
  const bool track = g.tracks({&input});
  Tensor result = Tensor::from({n, c, ho, wo}, std::move(out), track);
  if (!track) return result;
  g.record("max_pool2d", {input}, result,
           [input, argmax = std::move(argmax), h, w, ho, wo](const Tensor& output) mutable {
             auto gout = output.grad();
             auto gin = input.grad();
             const std::size_t planes = gout.size() / (ho * wo);
             for (std::size_t plane = 0; plane < planes; ++plane) {
               for (std::size_t o = 0; o < ho * wo; ++o) {
                 const std::size_t oi = plane * ho * wo + o;
                 gin[plane * h * w + argmax[oi]] += gout[oi];
               }
             }
           });
  return result;
}

Tensor upsample_bilinear(Graph& g, const Tensor& input, int out_h, int out_w) {
  require_rank(input, 4, "upsample_bilinear", "input");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("upsample_bilinear: zero-sized output");
  const auto [n, c, h, w] = dims4(input);
  if (h == 0 || w == 0) throw ShapeError("upsample_bilinear: empty input plane");
  const auto oh = static_cast<std::size_t>(out_h), ow = static_cast<std::size_t>(out_w);
  auto ys = resize_taps(h, oh);
  auto xs = resize_taps(w, ow);

  std::vector<real> out(n * c * oh * ow);
  auto in = input.data();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const real* src = in.data() + plane * h * w;
    real* dst = out.data() + plane * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const auto& ty = ys[oy];
      const real* r0 = src + ty.lo * w;
      const real* r1 = src + ty.hi * w;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const auto& tx = xs[ox];
        const real top = r0[tx.lo] + tx.frac * (r0[tx.hi] - r0[tx.lo]);
        const real bot = r1[tx.lo] + tx.frac * (r1[tx.hi] - r1[tx.lo]);
        dst[oy * ow + ox] = top + ty.frac * (bot - top);
      }
    }
  }
  check_finite(out, "upsample_bilinear");
  const bool track = g.tracks({&input});
  Tensor result = Tensor::from({n, c, oh, ow}, std::move(out), track);
  if (!track) return result;
  g.record("upsample_bilinear", {input}, result,
           [input, ys = std::move(ys), xs = std::move(xs), h, w, oh, ow](const Tensor& output) mutable {
             auto gout = output.grad();
             auto gin = input.grad();
             const std::size_t planes = gout.size() / (oh * ow);
             for (std::size_t plane = 0; plane < planes; ++plane) {
               const real* go = gout.data() + plane * oh * ow;
               real* gi = gin.data() + plane * h * w;
               for (std::size_t oy = 0; oy < oh; ++oy) {
                 const auto& ty = ys[oy];
                 for (std::size_t ox = 0; ox < ow; ++ox) {
                   const auto& tx = xs[ox];
                   const real gv = go[oy * ow + ox];
                   const real top = gv * (real(1) - ty.frac);
                   const real bot = gv * ty.frac;
                   gi[ty.lo * w + tx.lo] += top * (real(1) - tx.frac);
                   gi[ty.lo * w + tx.hi] += top * tx.frac;
                   gi[ty.hi * w + tx.lo] += bot * (real(1) - tx.frac);
                   gi[ty.hi * w + tx.hi] += bot * tx.frac;
                 }
               }
             }
           });
  return result;
}

Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels", "a");
  require_rank(b, 4, "concat_channels", "b");
  const auto da = dims4(a);
  const auto db = dims4(b);
  if (da.n != db.n || da.h != db.h || da.w != db.w) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t plane = da.h * da.w;
  const std::size_t sa = da.c * plane, sb = db.c * plane;
  std::vector<real> out(da.n * (sa + sb));
  auto pa = a.data();
  auto pb = b.data();
  for (std::size_t i = 0; i < da.n; ++i) {
    std::copy_n(pa.data() + i * sa, sa, out.data() + i * (sa + sb));
    std::copy_n(pb.data() + i * sb, sb, out.data() + i * (sa + sb) + sa);
  }
  const bool track = g.tracks({&a, &b});
  Tensor result = Tensor::from({da.n, da.c + db.c, da.h, da.w}, std::move(out), track);
  if (!track) return result;
  g.record("concat_channels", {a, b}, result, [a, b, sa, sb, n = da.n](const Tensor& output) mutable {
    auto gout = output.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const real* src = gout.data() + i * (sa + sb);
        for (std::size_t j = 0; j < sa; ++j) ga[i * sa + j] += src[j];
      }
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const real* src = gout.data() + i * (sa + sb) + sa;
        for (std::size_t j = 0; j < sb; ++j) gb[i * sb + j] += src[j];
      }
    }
  });
  return result;
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, const LabelMap& labels) {
  require_rank(logits, 4, "softmax_cross_entropy", "logits");
  const auto [n, k, h, w] = dims4(logits);
  if (labels.n != n || labels.h != h || labels.w != w || labels.values.size() != n * h * w) {
    throw ShapeError("softmax_cross_entropy: labels [" + std::to_string(labels.n) + "x" +
                     std::to_string(labels.h) + "x" + std::to_string(labels.w) +
                     "] do not match logits " + shape_str(logits.shape()));
  }
  if (n * h * w == 0) throw ShapeError("softmax_cross_entropy: no pixels");
  for (auto v : labels.values) {
    if (v >= k) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(v) + " out of range for " +
                      std::to_string(k) + " classes");
    }
  }
  const std::size_t plane = h * w;
  const std::size_t pixels = n * plane;
  auto x = logits.data();
  const bool track = g.tracks({&logits});
  std::vector<real> probs(track ? x.size() : 0);
  double total = 0;
  std::vector<double> e(k);
  for (std::size_t b = 0; b < n; ++b) {
    const real* base = x.data() + b * k * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double m = base[p];
      for (std::size_t c = 1; c < k; ++c) m = std::max(m, static_cast<double>(base[c * plane + p]));
      double s = 0;
      for (std::size_t c = 0; c < k; ++c) {
        e[c] = std::exp(static_cast<double>(base[c * plane + p]) - m);
        s += e[c];
      }
      const std::uint8_t y = labels.values[b * plane + p];
      total += -(static_cast<double>(base[y * plane + p]) - m - std::log(s));
      if (track) {
        for (std::size_t c = 0; c < k; ++c) {
          probs[b * k * plane + c * plane + p] = static_cast<real>(e[c] / s);
        }
      }
    }
  }
  const real loss = static_cast<real>(total / static_cast<double>(pixels));
  if (!std::isfinite(loss)) throw NumericalError("non-finite value in softmax_cross_entropy");
  Tensor result = Tensor::from(Shape{}, {loss}, track);
  if (!track) return result;
  g.record("softmax_cross_entropy", {logits}, result,
           [logits, probs = std::move(probs), labels = labels.values, n, k, plane,
            pixels](const Tensor& output) mutable {
             const real scale = output.grad()[0] / static_cast<real>(pixels);
             auto gin = logits.grad();
             for (std::size_t b = 0; b < n; ++b) {
               for (std::size_t c = 0; c < k; ++c) {
                 const std::size_t off = b * k * plane + c * plane;
                 for (std::size_t p = 0; p < plane; ++p) {
                   const real onehot = labels[b * plane + p] == c ? real(1) : real(0);
                   gin[off + p] += (probs[off + p] - onehot) * scale;
                 }
               }
             }
           });
  return result;
}

Tensor sum(Graph& g, const Tensor& input) {
  double acc = 0;
  for (real v : input.data()) acc += v;
  const bool track = g.tracks({&input});
  Tensor result = Tensor::from(Shape{}, {static_cast<real>(acc)}, track);
  if (!track) return result;
  g.record("sum", {input}, result, [input](const Tensor& output) mutable {
    const real go = output.grad()[0];
    for (real& v : input.grad()) v += go;
  });
  return result;
}

Tensor weighted_sum(Graph& g, const Tensor& input, std::span<const real> weights) {
  if (weights.size() != input.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(input.numel()) + " elements");
  }
  auto x = input.data();
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * weights[i];
  const bool track = g.tracks({&input});
  Tensor result = Tensor::from(Shape{}, {static_cast<real>(acc)}, track);
  if (!track) return result;
  g.record("weighted_sum", {input}, result,
           [input, wts = std::vector<real>(weights.begin(), weights.end())](const Tensor& output) mutable {
             const real go = output.grad()[0];
             auto gin = input.grad();
             for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += go * wts[i];
           });
  return result;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto pa = a.data();
  auto pb = b.data();
  std::vector<real> out(pa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  check_finite(out, "add");
  const bool track = g.tracks({&a, &b});
  Tensor result = Tensor::from(a.shape(), std::move(out), track);
  if (!track) return result;
  g.record("add", {a, b}, result, [a, b](const Tensor& output) mutable {
    auto gout = output.grad();
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gt = t->grad();
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += gout[i];
    }
  });
  return result;
}

Tensor softmax_channels(const Tensor& logits) {
  require_rank(logits, 4, "softmax_channels", "logits");
  const auto [n, k, h, w] = dims4(logits);
  const std::size_t plane = h * w;
  auto x = logits.data();
  std::vector<real> out(x.size());
  std::vector<double> e(k);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t off = b * k * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double m = x[off + p];
      for (std::size_t c = 1; c < k; ++c) m = std::max(m, static_cast<double>(x[off + c * plane + p]));
      double s = 0;
      for (std::size_t c = 0; c < k; ++c) {
        e[c] = std::exp(static_cast<double>(x[off + c * plane + p]) - m);
        s += e[c];
      }
      for (std::size_t c = 0; c < k; ++c) out[off + c * plane + p] = static_cast<real>(e[c] / s);
    }
  }
  return Tensor::from(logits.shape(), std::move(out));
}

COOPSEG_NAMESPACE_END
