#include "lamod/nn/ops.hpp"

#include <cmath>

#include "lamod/error.hpp"
#include "lamod/parallel.hpp"

namespace lamod::nn {

namespace {

struct Nchw {
  std::size_t n, c, h, w;
  std::size_t plane() const { return h * w; }
};

Nchw as_nchw(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + shape_string(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Nchw d = as_nchw(x, "conv2d");
  if (weight.rank() != 4 || weight.dim(1) != d.c || weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw ShapeError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                     shape_string(x.shape()));
  }
  const std::size_t cout = weight.dim(0);
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout) throw ShapeError("conv2d: bias size must equal output channels");

  const std::size_t H = d.h, W = d.w, P = d.plane(), Cin = d.c;
  std::vector<double> out(d.n * cout * P, 0.0);
  const double* in = x.values().data();
  const double* wt = weight.values().data();
  const double* bs = has_bias ? bias.values().data() : nullptr;

  parallel_for(d.n * cout, [&](std::size_t nc) {
    const std::size_t n = nc / cout, co = nc % cout;
    double* o = out.data() + nc * P;
    if (bs) std::fill(o, o + P, bs[co]);
    for (std::size_t ci = 0; ci < Cin; ++ci) {
      const double* src = in + (n * Cin + ci) * P;
      const double* k = wt + (co * Cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          if (wv == 0.0) continue;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? W - 1 : W;
          for (std::size_t y = 0; y < H; ++y) {
            const long yy = static_cast<long>(y) + ky - 1;
            if (yy < 0 || yy >= static_cast<long>(H)) continue;
            const double* srow = src + static_cast<std::size_t>(yy) * W;
            double* orow = o + y * W;
            const std::size_t off = static_cast<std::size_t>(kx);
            for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += wv * srow[xx + off - 1];
          }
        }
      }
    }
  });

  std::vector<Tensor> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result({d.n, cout, H, W}, std::move(out), std::move(parents), [d, cout, has_bias](Node& self) {
    const std::size_t H = d.h, W = d.w, P = d.plane(), Cin = d.c;
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    const double* g = self.grad.data();
    if (xn.requires_grad) {
      const double* wt = wn.value.data();
      double* gx = xn.grad.data();
      parallel_for(d.n * Cin, [&](std::size_t nci) {
        const std::size_t n = nci / Cin, ci = nci % Cin;
        double* dst = gx + nci * P;
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g + (n * cout + co) * P;
          const double* k = wt + (co * Cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const double wv = k[ky * 3 + kx];
              if (wv == 0.0) continue;
              const std::size_t x0 = kx == 0 ? 1 : 0;
              const std::size_t x1 = kx == 2 ? W - 1 : W;
              for (std::size_t y = 0; y < H; ++y) {
                const long yy = static_cast<long>(y) + ky - 1;
                if (yy < 0 || yy >= static_cast<long>(H)) continue;
                double* drow = dst + static_cast<std::size_t>(yy) * W;
                const double* grow = go + y * W;
                const std::size_t off = static_cast<std::size_t>(kx);
                for (std::size_t xx = x0; xx < x1; ++xx) drow[xx + off - 1] += wv * grow[xx];
              }
            }
          }
        }
      });
    }
    if (wn.requires_grad) {
      const double* in = xn.value.data();
      double* gw = wn.grad.data();
      parallel_for(cout, [&](std::size_t co) {
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          double* k = gw + (co * Cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const std::size_t x0 = kx == 0 ? 1 : 0;
              const std::size_t x1 = kx == 2 ? W - 1 : W;
              double acc = 0.0;
              for (std::size_t n = 0; n < d.n; ++n) {
                const double* go = g + (n * cout + co) * P;
                const double* src = in + (n * Cin + ci) * P;
                for (std::size_t y = 0; y < H; ++y) {
                  const long yy = static_cast<long>(y) + ky - 1;
                  if (yy < 0 || yy >= static_cast<long>(H)) continue;
                  const double* srow = src + static_cast<std::size_t>(yy) * W;
                  const double* grow = go + y * W;
                  const std::size_t off = static_cast<std::size_t>(kx);
                  for (std::size_t xx = x0; xx < x1; ++xx) acc += grow[xx] * srow[xx + off - 1];
                }
              }
              k[ky * 3 + kx] += acc;
            }
          }
        }
      });
    }
    if (has_bias && self.parents[2]->requires_grad) {
      double* gb = self.parents[2]->grad.data();
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t co = 0; co < cout; ++co) {
          const double* go = g + (n * cout + co) * P;
          double acc = 0.0;
          for (std::size_t k = 0; k < P; ++k) acc += go[k];
          gb[co] += acc;
        }
      }
    }
  });
}

Tensor avgpool2(const Tensor& x) {
  const Nchw d = as_nchw(x, "avgpool2");
  if (d.h % 2 || d.w % 2) throw ShapeError("avgpool2: spatial dims must be even, got " + shape_string(x.shape()));
  const std::size_t h2 = d.h / 2, w2 = d.w / 2;
  std::vector<double> out(d.n * d.c * h2 * w2);
  const double* in = x.values().data();
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const double* s = in + p * d.plane();
    double* o = out.data() + p * h2 * w2;
    for (std::size_t y = 0; y < h2; ++y) {
      for (std::size_t xx = 0; xx < w2; ++xx) {
        const double* a = s + 2 * y * d.w + 2 * xx;
        o[y * w2 + xx] = 0.25 * (a[0] + a[1] + a[d.w] + a[d.w + 1]);
      }
    }
  }
  return make_result({d.n, d.c, h2, w2}, std::move(out), {x}, [d, h2, w2](Node& self) {
    double* gx = self.parents[0]->grad.data();
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
      double* s = gx + p * d.plane();
      const double* g = self.grad.data() + p * h2 * w2;
      for (std::size_t y = 0; y < h2; ++y) {
        for (std::size_t xx = 0; xx < w2; ++xx) {
          const double v = 0.25 * g[y * w2 + xx];
          double* a = s + 2 * y * d.w + 2 * xx;
          a[0] += v;
          a[1] += v;
          a[d.w] += v;
          a[d.w + 1] += v;
        }
      }
    }
  });
}

Tensor upsample2(const Tensor& x) {
  const Nchw d = as_nchw(x, "upsample2");
  const std::size_t h2 = d.h * 2, w2 = d.w * 2;
  std::vector<double> out(d.n * d.c * h2 * w2);
  const double* in = x.values().data();
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const double* s = in + p * d.plane();
    double* o = out.data() + p * h2 * w2;
    for (std::size_t y = 0; y < h2; ++y) {
      for (std::size_t xx = 0; xx < w2; ++xx) o[y * w2 + xx] = s[(y / 2) * d.w + xx / 2];
    }
  }
  return make_result({d.n, d.c, h2, w2}, std::move(out), {x}, [d, h2, w2](Node& self) {
    double* gx = self.parents[0]->grad.data();
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
      double* s = gx + p * d.plane();
      const double* g = self.grad.data() + p * h2 * w2;
      for (std::size_t y = 0; y < h2; ++y) {
        for (std::size_t xx = 0; xx < w2; ++xx) s[(y / 2) * d.w + xx / 2] += g[y * w2 + xx];
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      if (p.value[k] > 0.0) p.grad[k] += self.grad[k];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] + bv[k];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t k = 0; k < self.grad.size(); ++k) p->grad[k] += self.grad[k];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] - bv[k];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t k = 0; k < self.grad.size(); ++k) pa.grad[k] += self.grad[k];
    }
    if (pb.requires_grad) {
      for (std::size_t k = 0; k < self.grad.size(); ++k) pb.grad[k] -= self.grad[k];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = av[k] * bv[k];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t k = 0; k < self.grad.size(); ++k) pa.grad[k] += self.grad[k] * pb.value[k];
    }
    if (pb.requires_grad) {
      for (std::size_t k = 0; k < self.grad.size(); ++k) pb.grad[k] += self.grad[k] * pa.value[k];
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = s * in[k];
  return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t k = 0; k < self.grad.size(); ++k) p.grad[k] += s * self.grad[k];
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Nchw da = as_nchw(a, "concat_channels");
  const Nchw db = as_nchw(b, "concat_channels");
  if (da.n != db.n || da.h != db.h || da.w != db.w) {
    throw ShapeError("concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::size_t P = da.plane(), ca = da.c, cb = db.c;
  std::vector<double> out(da.n * (ca + cb) * P);
  auto av = a.values(), bv = b.values();
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(av.data() + n * ca * P, ca * P, out.data() + n * (ca + cb) * P);
    std::copy_n(bv.data() + n * cb * P, cb * P, out.data() + (n * (ca + cb) + ca) * P);
  }
  return make_result({da.n, ca + cb, da.h, da.w}, std::move(out), {a, b}, [da, ca, cb, P](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t n = 0; n < da.n; ++n) {
      const double* g = self.grad.data() + n * (ca + cb) * P;
      if (pa.requires_grad) {
        double* d = pa.grad.data() + n * ca * P;
        for (std::size_t k = 0; k < ca * P; ++k) d[k] += g[k];
      }
      if (pb.requires_grad) {
        double* d = pb.grad.data() + n * cb * P;
        for (std::size_t k = 0; k < cb * P; ++k) d[k] += g[ca * P + k];
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || weight.dim(1) != x.dim(1) || bias.numel() != weight.dim(0)) {
    throw ShapeError("linear: x " + shape_string(x.shape()) + ", weight " + shape_string(weight.shape()) +
                     ", bias " + shape_string(bias.shape()));
  }
  const std::size_t n = x.dim(0), in = x.dim(1), outd = weight.dim(0);
  std::vector<double> out(n * outd);
  auto xv = x.values(), wv = weight.values(), bv = bias.values();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < outd; ++o) {
      double acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += wv[o * in + i] * xv[r * in + i];
      out[r * outd + o] = acc;
    }
  }
  return make_result({n, outd}, std::move(out), {x, weight, bias}, [n, in, outd](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < outd; ++o) {
        const double g = self.grad[r * outd + o];
        if (pb.requires_grad) pb.grad[o] += g;
        for (std::size_t i = 0; i < in; ++i) {
          if (pw.requires_grad) pw.grad[o * in + i] += g * px.value[r * in + i];
          if (px.requires_grad) px.grad[r * in + i] += g * pw.value[o * in + i];
        }
      }
    }
  });
}

Tensor scale_shift(const Tensor& x, const Tensor& scale_t, const Tensor& shift_t) {
  const Nchw d = as_nchw(x, "scale_shift");
  if (scale_t.numel() != d.c || shift_t.numel() != d.c) {
    throw ShapeError("scale_shift: scale/shift must hold " + std::to_string(d.c) + " values");
  }
  const std::size_t P = d.plane();
  auto xv = x.values(), sv = scale_t.values(), tv = shift_t.values();
  std::vector<double> out(xv.size());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t base = (n * d.c + c) * P;
      const double m = 1.0 + sv[c], t = tv[c];
      for (std::size_t k = 0; k < P; ++k) out[base + k] = xv[base + k] * m + t;
    }
  }
  return make_result(x.shape(), std::move(out), {x, scale_t, shift_t}, [d, P](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    Node& pt = *self.parents[2];
    for (std::size_t n = 0; n < d.n; ++n) {
      for (std::size_t c = 0; c < d.c; ++c) {
        const std::size_t base = (n * d.c + c) * P;
        const double m = 1.0 + ps.value[c];
        double gs = 0.0, gt = 0.0;
        for (std::size_t k = 0; k < P; ++k) {
          const double g = self.grad[base + k];
          if (px.requires_grad) px.grad[base + k] += g * m;
          gs += g * px.value[base + k];
          gt += g;
        }
        if (ps.requires_grad) ps.grad[c] += gs;
        if (pt.requires_grad) pt.grad[c] += gt;
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  auto v = x.values();
  return make_result(std::move(shape), std::vector<double>(v.begin(), v.end()), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t k = 0; k < self.grad.size(); ++k) p.grad[k] += self.grad[k];
  });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() < 2 || begin >= end || end > x.dim(1)) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t inner = x.numel() / (n * c);
  const std::size_t cs = end - begin;
  Shape shape = x.shape();
  shape[1] = cs;
  std::vector<double> out(n * cs * inner);
  auto v = x.values();
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(v.data() + (r * c + begin) * inner, cs * inner, out.data() + r * cs * inner);
  }
  return make_result(std::move(shape), std::move(out), {x}, [n, c, cs, inner, begin](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t r = 0; r < n; ++r) {
      double* d = p.grad.data() + (r * c + begin) * inner;
      const double* g = self.grad.data() + r * cs * inner;
      for (std::size_t k = 0; k < cs * inner; ++k) d[k] += g[k];
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({1}, {acc}, {x}, [](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0];
    for (auto& v : p.grad) v += g;
  });
}

Tensor sum_squares(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  return make_result({1}, {acc}, {x}, [](Node& self) {
    Node& p = *self.parents[0];
    const double g = 2.0 * self.grad[0];
    for (std::size_t k = 0; k < p.value.size(); ++k) p.grad[k] += g * p.value[k];
  });
}

Tensor l2_norm(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  const double norm = std::sqrt(acc);
  return make_result({1}, {norm}, {x}, [norm](Node& self) {
    if (norm == 0.0) return;
    Node& p = *self.parents[0];
    const double g = self.grad[0] / norm;
    for (std::size_t k = 0; k < p.value.size(); ++k) p.grad[k] += g * p.value[k];
  });
}

}  // namespace lamod::nn
