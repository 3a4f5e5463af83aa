#ifndef INKSTRIP_TENSOR_HPP
#define INKSTRIP_TENSOR_HPP

#include <cstddef>
#include <vector>

#include "inkstrip/errors.hpp"

namespace inkstrip {

/// Dense 4-D array (batch, channel, height, width), row-major with w fastest.
/// Scalar is float in standard precision and double in wide precision.
template <typename S>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<S> v;

    Tensor4() = default;

    Tensor4(int n_, int c_, int h_, int w_, S fill = S(0))
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw DimensionError("Tensor4: dims must be >= 1");
    }

    std::size_t size() const { return v.size(); }

    std::size_t idx(int in, int ic, int ih, int iw) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
    }

    S at(int in, int ic, int ih, int iw) const { return v[idx(in, ic, ih, iw)]; }
    S& at(int in, int ic, int ih, int iw) { return v[idx(in, ic, ih, iw)]; }

    bool same_dims(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(S value) { std::fill(v.begin(), v.end(), value); }
};

/// Learnable tensor: value, gradient accumulator, and RMSProp second-moment
/// accumulator, all of identical dims. grad and rms start at zero.
template <typename S>
struct Param {
    Tensor4<S> value, grad, rms;

    Param() = default;

    explicit Param(Tensor4<S> val)
        : value(std::move(val)),
          grad(value.n, value.c, value.h, value.w),
          rms(value.n, value.c, value.h, value.w) {}

    void zero_grad() { grad.fill(S(0)); }
};

/// Per-pixel class labels for one batch: 0 = not-artifact, 1 = artifact.
struct ClassMap {
    int n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> v;

    ClassMap() = default;
    ClassMap(int n_, int h_, int w_)
        : n(n_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * h_ * w_, 0) {}

    std::size_t idx(int in, int ih, int iw) const {
        return (static_cast<std::size_t>(in) * h + ih) * w + iw;
    }
    std::uint8_t at(int in, int ih, int iw) const { return v[idx(in, ih, iw)]; }
    std::uint8_t& at(int in, int ih, int iw) { return v[idx(in, ih, iw)]; }
};

}  // namespace inkstrip

#endif
