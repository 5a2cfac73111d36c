#include "xfrl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "xfrl/error.hpp"
#include "xfrl/threads.hpp"

namespace xfrl::nn {

static void require(bool ok, const std::string& msg) {
    if (!ok) throw shape_error(msg);
}

Tensor conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b, std::size_t stride) {
    require(in.rank() == 3, "conv2d: input rank must be 3, got " + shape_str(in.shape));
    require(w.rank() == 4, "conv2d: weight rank must be 4, got " + shape_str(w.shape));
    require(b.rank() == 1, "conv2d: bias rank must be 1, got " + shape_str(b.shape));
    require(stride >= 1, "conv2d: stride must be >= 1");
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const std::size_t Co = w.dim(0), Ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require(Ci == C, "conv2d: channel mismatch, input " + shape_str(in.shape) + " vs weight " +
                         shape_str(w.shape));
    require(b.dim(0) == Co, "conv2d: bias size " + shape_str(b.shape) + " vs weight " +
                                shape_str(w.shape));
    require(kh <= H && kw <= W, "conv2d: kernel " + shape_str(w.shape) +
                                    " larger than input " + shape_str(in.shape));
    const std::size_t Ho = (H - kh) / stride + 1;
    const std::size_t Wo = (W - kw) / stride + 1;

    Tensor out({Co, Ho, Wo});
    const double* ip = in.data();
    const double* wp = w.data();
    const double* bp = b.data();
    double* op = out.data();

    parallel_for(Co, [&](std::size_t co0, std::size_t co1) {
        for (std::size_t co = co0; co < co1; ++co) {
            double* plane = op + co * Ho * Wo;
            std::fill(plane, plane + Ho * Wo, bp[co]);
            for (std::size_t ci = 0; ci < Ci; ++ci) {
                for (std::size_t kr = 0; kr < kh; ++kr) {
                    for (std::size_t kc = 0; kc < kw; ++kc) {
                        const double wv = wp[((co * Ci + ci) * kh + kr) * kw + kc];
                        for (std::size_t oh = 0; oh < Ho; ++oh) {
                            const double* irow = ip + (ci * H + oh * stride + kr) * W + kc;
                            double* orow = plane + oh * Wo;
                            if (stride == 1) {
                                for (std::size_t ow = 0; ow < Wo; ++ow) orow[ow] += wv * irow[ow];
                            } else {
                                for (std::size_t ow = 0; ow < Wo; ++ow)
                                    orow[ow] += wv * irow[ow * stride];
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

void conv2d_backward(const Tensor& in, const Tensor& w, const Tensor& gout, std::size_t stride,
                     Tensor* gin, Tensor& gw, Tensor& gb) {
    const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
    const std::size_t Co = w.dim(0), Ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    require(gout.rank() == 3 && gout.dim(0) == Co, "conv2d_backward: bad gout shape " +
                                                       shape_str(gout.shape));
    const std::size_t Ho = gout.dim(1), Wo = gout.dim(2);
    require(Ho == (H - kh) / stride + 1 && Wo == (W - kw) / stride + 1,
            "conv2d_backward: gout " + shape_str(gout.shape) + " inconsistent with input " +
                shape_str(in.shape));
    require(gw.same_shape(w) && gb.shape == std::vector<std::size_t>{Co},
            "conv2d_backward: gradient buffers mismatch");

    const double* ip = in.data();
    const double* wp = w.data();
    const double* gp = gout.data();

    parallel_for(Co, [&](std::size_t co0, std::size_t co1) {
        for (std::size_t co = co0; co < co1; ++co) {
            const double* gplane = gp + co * Ho * Wo;
            double acc_b = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) acc_b += gplane[i];
            gb.v[co] += acc_b;
            for (std::size_t ci = 0; ci < Ci; ++ci) {
                for (std::size_t kr = 0; kr < kh; ++kr) {
                    for (std::size_t kc = 0; kc < kw; ++kc) {
                        double acc = 0.0;
                        for (std::size_t oh = 0; oh < Ho; ++oh) {
                            const double* irow = ip + (ci * H + oh * stride + kr) * W + kc;
                            const double* grow = gplane + oh * Wo;
                            if (stride == 1) {
                                for (std::size_t ow = 0; ow < Wo; ++ow) acc += grow[ow] * irow[ow];
                            } else {
                                for (std::size_t ow = 0; ow < Wo; ++ow)
                                    acc += grow[ow] * irow[ow * stride];
                            }
                        }
                        gw.v[((co * Ci + ci) * kh + kr) * kw + kc] += acc;
                    }
                }
            }
        }
    });

    if (!gin) return;
    if (!gin->same_shape(in)) *gin = Tensor(in.shape);
    gin->zero();
    double* gip = gin->data();
    parallel_for(Ci, [&](std::size_t ci0, std::size_t ci1) {
        for (std::size_t ci = ci0; ci < ci1; ++ci) {
            for (std::size_t co = 0; co < Co; ++co) {
                const double* gplane = gp + co * Ho * Wo;
                for (std::size_t kr = 0; kr < kh; ++kr) {
                    for (std::size_t kc = 0; kc < kw; ++kc) {
                        const double wv = wp[((co * Ci + ci) * kh + kr) * kw + kc];
                        for (std::size_t oh = 0; oh < Ho; ++oh) {
                            double* girow = gip + (ci * H + oh * stride + kr) * W + kc;
                            const double* grow = gplane + oh * Wo;
                            if (stride == 1) {
                                for (std::size_t ow = 0; ow < Wo; ++ow) girow[ow] += wv * grow[ow];
                            } else {
                                for (std::size_t ow = 0; ow < Wo; ++ow)
                                    girow[ow * stride] += wv * grow[ow];
                            }
                        }
                    }
                }
            }
        }
    });
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& gy) {
    require(y.same_shape(gy), "relu_backward: shape mismatch " + shape_str(y.shape) + " vs " +
                                  shape_str(gy.shape));
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
        if (!(y.v[i] > 0.0)) gx.v[i] = 0.0;
    return gx;
}

Tensor maxpool2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax) {
    require(x.rank() == 3, "maxpool2: input rank must be 3, got " + shape_str(x.shape));
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    require(H % 2 == 0 && W % 2 == 0,
            "maxpool2: H and W must be even, got " + shape_str(x.shape));
    const std::size_t Ho = H / 2, Wo = W / 2;
    Tensor y({C, Ho, Wo});
    argmax.assign(C * Ho * Wo, 0);
    const double* xp = x.data();
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oh = 0; oh < Ho; ++oh) {
            for (std::size_t ow = 0; ow < Wo; ++ow) {
                const std::size_t base = (c * H + 2 * oh) * W + 2 * ow;
                // row-major window scan, strict > keeps the first maximum
                std::size_t best = base;
                double bv = xp[base];
                const std::size_t cand[3] = {base + 1, base + W, base + W + 1};
                for (std::size_t k = 0; k < 3; ++k) {
                    if (xp[cand[k]] > bv) {
                        bv = xp[cand[k]];
                        best = cand[k];
                    }
                }
                const std::size_t oi = (c * Ho + oh) * Wo + ow;
                y.v[oi] = bv;
                argmax[oi] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return y;
}

Tensor maxpool2_backward(const std::vector<std::uint32_t>& argmax, const Tensor& gy,
                         const std::vector<std::size_t>& in_shape) {
    require(in_shape.size() == 3, "maxpool2_backward: bad input shape");
    require(argmax.size() == gy.size(), "maxpool2_backward: argmax/gy size mismatch");
    Tensor gx(in_shape);
    for (std::size_t i = 0; i < gy.size(); ++i) gx.v[argmax[i]] += gy.v[i];
    return gx;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.rank() == 1 && w.rank() == 2 && b.rank() == 1, "dense: bad ranks");
    const std::size_t Din = x.dim(0), Dout = w.dim(0);
    require(w.dim(1) == Din, "dense: weight " + shape_str(w.shape) + " vs input " +
                                 shape_str(x.shape));
    require(b.dim(0) == Dout, "dense: bias " + shape_str(b.shape) + " vs weight " +
                                  shape_str(w.shape));
    Tensor y({Dout});
    for (std::size_t o = 0; o < Dout; ++o) {
        const double* wrow = w.data() + o * Din;
        double acc = b.v[o];
        for (std::size_t i = 0; i < Din; ++i) acc += wrow[i] * x.v[i];
        y.v[o] = acc;
    }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor* gx, Tensor& gw,
                    Tensor& gb) {
    const std::size_t Din = x.dim(0), Dout = w.dim(0);
    require(gy.rank() == 1 && gy.dim(0) == Dout, "dense_backward: bad gy shape");
    require(gw.same_shape(w) && gb.dim(0) == Dout, "dense_backward: gradient buffers mismatch");
    for (std::size_t o = 0; o < Dout; ++o) {
        const double g = gy.v[o];
        gb.v[o] += g;
        double* gwrow = gw.data() + o * Din;
        for (std::size_t i = 0; i < Din; ++i) gwrow[i] += g * x.v[i];
    }
    if (!gx) return;
    if (!gx->same_shape(x)) *gx = Tensor(x.shape);
    gx->zero();
    for (std::size_t o = 0; o < Dout; ++o) {
        const double g = gy.v[o];
        const double* wrow = w.data() + o * Din;
        for (std::size_t i = 0; i < Din; ++i) gx->v[i] += g * wrow[i];
    }
}

LossGrad softmax_xent(const Tensor& logits, std::size_t label) {
    require(logits.rank() == 1, "softmax_xent: logits rank must be 1");
    const std::size_t K = logits.dim(0);
    if (label >= K)
        throw value_error("softmax_xent: label " + std::to_string(label) + " out of range for " +
                          std::to_string(K) + " classes");
    double mx = logits.v[0];
    for (double z : logits.v) mx = std::max(mx, z);
    double sum = 0.0;
    for (double z : logits.v) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);

    LossGrad out;
    out.loss = lse - logits.v[label];
    out.grad = Tensor({K});
    for (std::size_t k = 0; k < K; ++k) out.grad.v[k] = std::exp(logits.v[k] - lse);
    out.grad.v[label] -= 1.0;
    return out;
}

LossGrad mse(const Tensor& pred, const Tensor& target) {
    require(pred.same_shape(target), "mse: shape mismatch " + shape_str(pred.shape) + " vs " +
                                         shape_str(target.shape));
    const double n = static_cast<double>(pred.size());
    LossGrad out;
    out.grad = Tensor(pred.shape);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.v[i] - target.v[i];
        acc += d * d;
        out.grad.v[i] = 2.0 * d / n;
    }
    out.loss = acc / n;
    return out;
}

Tensor upsample2_forward(const Tensor& x) {
    require(x.rank() == 3, "upsample2: input rank must be 3");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor y({C, 2 * H, 2 * W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t h = 0; h < H; ++h) {
            const double* xrow = x.data() + (c * H + h) * W;
            double* y0 = y.data() + (c * 2 * H + 2 * h) * 2 * W;
            double* y1 = y0 + 2 * W;
            for (std::size_t wcol = 0; wcol < W; ++wcol) {
                const double v = xrow[wcol];
                y0[2 * wcol] = v;
                y0[2 * wcol + 1] = v;
                y1[2 * wcol] = v;
                y1[2 * wcol + 1] = v;
            }
        }
    }
    return y;
}

Tensor upsample2_backward(const Tensor& gy) {
    require(gy.rank() == 3, "upsample2_backward: rank must be 3");
    const std::size_t C = gy.dim(0), H2 = gy.dim(1), W2 = gy.dim(2);
    require(H2 % 2 == 0 && W2 % 2 == 0, "upsample2_backward: odd spatial dims");
    const std::size_t H = H2 / 2, W = W2 / 2;
    Tensor gx({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t h = 0; h < H; ++h) {
            const double* g0 = gy.data() + (c * H2 + 2 * h) * W2;
            const double* g1 = g0 + W2;
            double* xrow = gx.data() + (c * H + h) * W;
            for (std::size_t wcol = 0; wcol < W; ++wcol)
                xrow[wcol] = g0[2 * wcol] + g0[2 * wcol + 1] + g1[2 * wcol] + g1[2 * wcol + 1];
        }
    }
    return gx;
}

void sgd_step(const std::vector<Parameter*>& params, double base_lr) {
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        const double eff = base_lr * p->lr_multiplier;
        if (eff == 0.0) continue;
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value.v[i] -= eff * p->grad.v[i];
    }
}

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic, double step) {
    require(x.same_shape(analytic), "grad_check: shape mismatch");
    Tensor probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double keep = probe.v[i];
        probe.v[i] = keep + step;
        const double fp = f(probe);
        probe.v[i] = keep - step;
        const double fm = f(probe);
        probe.v[i] = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic.v[i];
        const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace xfrl::nn
