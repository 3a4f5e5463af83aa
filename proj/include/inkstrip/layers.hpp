#ifndef INKSTRIP_LAYERS_HPP
#define INKSTRIP_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "inkstrip/tensor.hpp"

namespace inkstrip {

// ---------------------------------------------------------------------------
// Convolution, odd square kernel (1x1 or 3x3 here), stride 1, same padding.
//
//   y[n,o,i,j] = b[o] + sum_{k,u,v} w[o,k,u,v] * x[n,k,i+u-p,j+v-p]
//
// with zero padding of p = kernel/2. Zero padding equals background padding
// because images are normalized to ink=1, background=0 before entering.
// ---------------------------------------------------------------------------

template <typename S>
Tensor4<S> conv2d_forward(const Tensor4<S>& x, const Tensor4<S>& w, const Tensor4<S>& b) {
    const int oc = w.n, ic = w.c, k = w.h;
    if (x.c != ic)
        throw DimensionError("conv2d: channel mismatch");
    if (w.h != w.w || k % 2 == 0)
        throw DimensionError("conv2d: kernel must be odd and square");
    const int p = k / 2;
    Tensor4<S> y(x.n, oc, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        for (int o = 0; o < oc; ++o) {
            S* yrow0 = &y.v[y.idx(n, o, 0, 0)];
            const S bias = b.v[static_cast<std::size_t>(o)];
            for (std::size_t i = 0, e = static_cast<std::size_t>(x.h) * x.w; i < e; ++i)
                yrow0[i] = bias;
            for (int kk = 0; kk < ic; ++kk) {
                for (int u = 0; u < k; ++u) {
                    for (int v = 0; v < k; ++v) {
                        const S wv = w.at(o, kk, u, v);
                        if (wv == S(0)) continue;
                        const int dr = u - p, dc = v - p;
                        const int r0 = std::max(0, -dr), r1 = std::min(x.h, x.h - dr);
                        const int c0 = std::max(0, -dc), c1 = std::min(x.w, x.w - dc);
                        for (int r = r0; r < r1; ++r) {
                            S* yp = &y.v[y.idx(n, o, r, c0)];
                            const S* xp = &x.v[x.idx(n, kk, r + dr, c0 + dc)];
                            for (int c = c0; c < c1; ++c)
                                *yp++ += wv * *xp++;
                        }
                    }
                }
            }
        }
    }
    return y;
}

/// Backward pass; accumulates into dw/db and returns dx.
template <typename S>
Tensor4<S> conv2d_backward(const Tensor4<S>& x, const Tensor4<S>& w, const Tensor4<S>& dy,
                           Tensor4<S>& dw, Tensor4<S>& db) {
    const int oc = w.n, ic = w.c, k = w.h;
    const int p = k / 2;
    Tensor4<S> dx(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        for (int o = 0; o < oc; ++o) {
            S acc_b = S(0);
            const S* dyp0 = &dy.v[dy.idx(n, o, 0, 0)];
            for (std::size_t i = 0, e = static_cast<std::size_t>(x.h) * x.w; i < e; ++i)
                acc_b += dyp0[i];
            db.v[static_cast<std::size_t>(o)] += acc_b;
            for (int kk = 0; kk < ic; ++kk) {
                for (int u = 0; u < k; ++u) {
                    for (int v = 0; v < k; ++v) {
                        const int dr = u - p, dc = v - p;
                        const int r0 = std::max(0, -dr), r1 = std::min(x.h, x.h - dr);
                        const int c0 = std::max(0, -dc), c1 = std::min(x.w, x.w - dc);
                        S acc_w = S(0);
                        const S wv = w.at(o, kk, u, v);
                        for (int r = r0; r < r1; ++r) {
                            const S* dyp = &dy.v[dy.idx(n, o, r, c0)];
                            const S* xp = &x.v[x.idx(n, kk, r + dr, c0 + dc)];
                            S* dxp = &dx.v[dx.idx(n, kk, r + dr, c0 + dc)];
                            for (int c = c0; c < c1; ++c) {
                                acc_w += dyp[c - c0] * xp[c - c0];
                                dxp[c - c0] += wv * dyp[c - c0];
                            }
                        }
                        dw.at(o, kk, u, v) += acc_w;
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

template <typename S>
Tensor4<S> relu_forward(const Tensor4<S>& x) {
    Tensor4<S> y(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i)
        y.v[i] = x.v[i] > S(0) ? x.v[i] : S(0);
    return y;
}

template <typename S>
Tensor4<S> relu_backward(const Tensor4<S>& x, const Tensor4<S>& dy) {
    Tensor4<S> dx(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i)
        dx.v[i] = x.v[i] > S(0) ? dy.v[i] : S(0);
    return dx;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Ties break to the first cell in row-major
// window order. The argmax record routes gradients back.
// ---------------------------------------------------------------------------

template <typename S>
std::pair<Tensor4<S>, std::vector<std::uint32_t>> maxpool2_forward(const Tensor4<S>& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw DimensionError("maxpool2: spatial dims must be even");
    Tensor4<S> y(x.n, x.c, x.h / 2, x.w / 2);
    std::vector<std::uint32_t> argmax(y.size());
    std::size_t oi = 0;
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            for (int i = 0; i < y.h; ++i) {
                for (int j = 0; j < y.w; ++j, ++oi) {
                    std::size_t best = x.idx(n, c, 2 * i, 2 * j);
                    S bv = x.v[best];
                    for (int u = 0; u < 2; ++u) {
                        for (int v = 0; v < 2; ++v) {
                            const std::size_t ii = x.idx(n, c, 2 * i + u, 2 * j + v);
                            if (x.v[ii] > bv) {
                                bv = x.v[ii];
                                best = ii;
                            }
                        }
                    }
                    y.v[oi] = bv;
                    argmax[oi] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return {std::move(y), std::move(argmax)};
}

template <typename S>
Tensor4<S> maxpool2_backward(const Tensor4<S>& x, const std::vector<std::uint32_t>& argmax,
                             const Tensor4<S>& dy) {
    Tensor4<S> dx(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < dy.size(); ++i)
        dx.v[argmax[i]] += dy.v[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Transposed convolution, 2x2 kernel, stride 2, no padding: exact 2x
// upsampling. Weight layout is w[ic, oc, 2, 2].
//
//   y[n,o,2i+u,2j+v] = b[o] + sum_k x[n,k,i,j] * w[k,o,u,v]
// ---------------------------------------------------------------------------

template <typename S>
Tensor4<S> deconv2_forward(const Tensor4<S>& x, const Tensor4<S>& w, const Tensor4<S>& b) {
    const int ic = w.n, oc = w.c;
    if (x.c != ic)
        throw DimensionError("deconv2: channel mismatch");
    Tensor4<S> y(x.n, oc, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n) {
        for (int o = 0; o < oc; ++o) {
            S* yp0 = &y.v[y.idx(n, o, 0, 0)];
            const S bias = b.v[static_cast<std::size_t>(o)];
            for (std::size_t i = 0, e = static_cast<std::size_t>(y.h) * y.w; i < e; ++i)
                yp0[i] = bias;
            for (int k = 0; k < ic; ++k) {
                for (int u = 0; u < 2; ++u) {
                    for (int v = 0; v < 2; ++v) {
                        const S wv = w.at(k, o, u, v);
                        for (int i = 0; i < x.h; ++i) {
                            const S* xp = &x.v[x.idx(n, k, i, 0)];
                            S* yp = &y.v[y.idx(n, o, 2 * i + u, v)];
                            for (int j = 0; j < x.w; ++j)
                                yp[2 * j] += wv * xp[j];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename S>
Tensor4<S> deconv2_backward(const Tensor4<S>& x, const Tensor4<S>& w, const Tensor4<S>& dy,
                            Tensor4<S>& dw, Tensor4<S>& db) {
    const int ic = w.n, oc = w.c;
    Tensor4<S> dx(x.n, x.c, x.h, x.w);
    for (int n = 0; n < x.n; ++n) {
        for (int o = 0; o < oc; ++o) {
            S acc_b = S(0);
            const S* dyp0 = &dy.v[dy.idx(n, o, 0, 0)];
            for (std::size_t i = 0, e = static_cast<std::size_t>(dy.h) * dy.w; i < e; ++i)
                acc_b += dyp0[i];
            db.v[static_cast<std::size_t>(o)] += acc_b;
            for (int k = 0; k < ic; ++k) {
                for (int u = 0; u < 2; ++u) {
                    for (int v = 0; v < 2; ++v) {
                        const S wv = w.at(k, o, u, v);
                        S acc_w = S(0);
                        for (int i = 0; i < x.h; ++i) {
                            const S* xp = &x.v[x.idx(n, k, i, 0)];
                            const S* dyp = &dy.v[dy.idx(n, o, 2 * i + u, v)];
                            S* dxp = &dx.v[dx.idx(n, k, i, 0)];
                            for (int j = 0; j < x.w; ++j) {
                                acc_w += xp[j] * dyp[2 * j];
                                dxp[j] += wv * dyp[2 * j];
                            }
                        }
                        dw.at(k, o, u, v) += acc_w;
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Channel concatenation, a first.
// ---------------------------------------------------------------------------

template <typename S>
Tensor4<S> concat_channels(const Tensor4<S>& a, const Tensor4<S>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw DimensionError("concat_channels: spatial mismatch");
    Tensor4<S> y(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        for (int c = 0; c < a.c; ++c)
            std::copy_n(&a.v[a.idx(n, c, 0, 0)], plane, &y.v[y.idx(n, c, 0, 0)]);
        for (int c = 0; c < b.c; ++c)
            std::copy_n(&b.v[b.idx(n, c, 0, 0)], plane, &y.v[y.idx(n, a.c + c, 0, 0)]);
    }
    return y;
}

template <typename S>
std::pair<Tensor4<S>, Tensor4<S>> concat_channels_backward(const Tensor4<S>& dy, int ca, int cb) {
    Tensor4<S> da(dy.n, ca, dy.h, dy.w);
    Tensor4<S> dbt(dy.n, cb, dy.h, dy.w);
    const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
    for (int n = 0; n < dy.n; ++n) {
        for (int c = 0; c < ca; ++c)
            std::copy_n(&dy.v[dy.idx(n, c, 0, 0)], plane, &da.v[da.idx(n, c, 0, 0)]);
        for (int c = 0; c < cb; ++c)
            std::copy_n(&dy.v[dy.idx(n, ca + c, 0, 0)], plane, &dbt.v[dbt.idx(n, c, 0, 0)]);
    }
    return {std::move(da), std::move(dbt)};
}

// ---------------------------------------------------------------------------
// Per-pixel weighted two-class softmax cross-entropy with final averaging
// over all n*h*w pixels:
//
//   loss = (1 / (n*h*w)) * sum_p  w[y_p] * (-log softmax(logits_p)[y_p])
//
// Softmax is computed with max subtraction. Returns (loss, dlogits), the
// gradient being exact.
// ---------------------------------------------------------------------------

template <typename S>
std::pair<double, Tensor4<S>> weighted_softmax_ce(const Tensor4<S>& logits, const ClassMap& labels,
                                                  double w0, double w1) {
    if (logits.c != 2)
        throw DimensionError("weighted_softmax_ce: logits must have 2 channels");
    if (logits.n != labels.n || logits.h != labels.h || logits.w != labels.w)
        throw DimensionError("weighted_softmax_ce: label dims mismatch");
    if (w0 <= 0.0 || w1 <= 0.0)
        throw DataError("weighted_softmax_ce: class weights must be positive");
    const double inv_count = 1.0 / (static_cast<double>(logits.n) * logits.h * logits.w);
    Tensor4<S> dlogits(logits.n, 2, logits.h, logits.w);
    double loss = 0.0;
    for (int n = 0; n < logits.n; ++n) {
        for (int i = 0; i < logits.h; ++i) {
            for (int j = 0; j < logits.w; ++j) {
                const double z0 = static_cast<double>(logits.at(n, 0, i, j));
                const double z1 = static_cast<double>(logits.at(n, 1, i, j));
                const double m = std::max(z0, z1);
                const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
                const double sum = e0 + e1;
                const double p0 = e0 / sum, p1 = e1 / sum;
                const int y = labels.at(n, i, j);
                const double wy = y == 0 ? w0 : w1;
                const double py = y == 0 ? p0 : p1;
                loss += wy * -std::log(std::max(py, 1e-300));
                const double g = wy * inv_count;
                dlogits.at(n, 0, i, j) = static_cast<S>(g * (p0 - (y == 0 ? 1.0 : 0.0)));
                dlogits.at(n, 1, i, j) = static_cast<S>(g * (p1 - (y == 1 ? 1.0 : 0.0)));
            }
        }
    }
    return {loss * inv_count, std::move(dlogits)};
}

}  // namespace inkstrip

#endif
