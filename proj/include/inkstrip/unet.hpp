#ifndef INKSTRIP_UNET_HPP
#define INKSTRIP_UNET_HPP

#include <cmath>
#include <string>

#include "inkstrip/image.hpp"
#include "inkstrip/layers.hpp"
#include "inkstrip/rng.hpp"
#include "inkstrip/tensor.hpp"

namespace inkstrip {

// ---------------------------------------------------------------------------
// Two-down / two-up fully convolutional segmentation net with skip
// concatenation. Channel plan for base width C:
//
//   D1: 1 -> C -> C          (32x128)
//   pool                      (16x64)
//   D2: C -> 2C -> 2C         (16x64)
//   pool                      (8x32)
//   U1: deconv 2C -> 2C (x2), concat D2b -> 4C, convs 4C -> 2C -> 2C  (16x64)
//   U2: deconv 2C -> C  (x2), concat D1b -> 2C, convs 2C -> C -> C    (32x128)
//   head: 1x1 conv C -> 2
//
// ReLU follows every conv and deconv except the head.
// ---------------------------------------------------------------------------

template <typename S>
struct UNetParams {
    int base_channels = 0;

    Param<S> d1a_w, d1a_b, d1b_w, d1b_b;
    Param<S> d2a_w, d2a_b, d2b_w, d2b_b;
    Param<S> u1d_w, u1d_b, u1a_w, u1a_b, u1b_w, u1b_b;
    Param<S> u2d_w, u2d_b, u2a_w, u2a_b, u2b_w, u2b_b;
    Param<S> head_w, head_b;

    /// Visits every parameter as (name, Param&) in a fixed order. Checkpoint
    /// layout, the optimizer sweep, and init order all follow this order.
    template <typename Fn>
    void for_each(Fn&& fn) {
        fn("d1a.w", d1a_w); fn("d1a.b", d1a_b);
        fn("d1b.w", d1b_w); fn("d1b.b", d1b_b);
        fn("d2a.w", d2a_w); fn("d2a.b", d2a_b);
        fn("d2b.w", d2b_w); fn("d2b.b", d2b_b);
        fn("u1d.w", u1d_w); fn("u1d.b", u1d_b);
        fn("u1a.w", u1a_w); fn("u1a.b", u1a_b);
        fn("u1b.w", u1b_w); fn("u1b.b", u1b_b);
        fn("u2d.w", u2d_w); fn("u2d.b", u2d_b);
        fn("u2a.w", u2a_w); fn("u2a.b", u2a_b);
        fn("u2b.w", u2b_w); fn("u2b.b", u2b_b);
        fn("head.w", head_w); fn("head.b", head_b);
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        const_cast<UNetParams*>(this)->for_each(
            [&fn](const char* name, Param<S>& p) { fn(name, static_cast<const Param<S>&>(p)); });
    }

    std::size_t scalar_count() const {
        std::size_t total = 0;
        for_each([&total](const char*, const Param<S>& p) { total += p.value.size(); });
        return total;
    }
};

namespace detail {

template <typename S>
Param<S> he_conv(Rng& rng, int oc, int ic, int k) {
    Tensor4<S> t(oc, ic, k, k);
    const double stddev = std::sqrt(2.0 / (static_cast<double>(ic) * k * k));
    for (auto& x : t.v) x = static_cast<S>(rng.normal() * stddev);
    return Param<S>(std::move(t));
}

// deconv weights are [ic, oc, 2, 2]; fan-in per output pixel is ic.
template <typename S>
Param<S> he_deconv(Rng& rng, int ic, int oc) {
    Tensor4<S> t(ic, oc, 2, 2);
    const double stddev = std::sqrt(2.0 / static_cast<double>(ic));
    for (auto& x : t.v) x = static_cast<S>(rng.normal() * stddev);
    return Param<S>(std::move(t));
}

template <typename S>
Param<S> zero_bias(int oc) {
    return Param<S>(Tensor4<S>(oc, 1, 1, 1));
}

}  // namespace detail

/// He-style init: conv weights ~ Normal(0, 2/fan_in), all biases zero.
template <typename S>
UNetParams<S> init_params(Rng& rng, int C = 16) {
    if (C < 1)
        throw ConfigError("init_params: base channels must be >= 1");
    UNetParams<S> p;
    p.base_channels = C;
    p.d1a_w = detail::he_conv<S>(rng, C, 1, 3);       p.d1a_b = detail::zero_bias<S>(C);
    p.d1b_w = detail::he_conv<S>(rng, C, C, 3);       p.d1b_b = detail::zero_bias<S>(C);
    p.d2a_w = detail::he_conv<S>(rng, 2 * C, C, 3);   p.d2a_b = detail::zero_bias<S>(2 * C);
    p.d2b_w = detail::he_conv<S>(rng, 2 * C, 2 * C, 3); p.d2b_b = detail::zero_bias<S>(2 * C);
    p.u1d_w = detail::he_deconv<S>(rng, 2 * C, 2 * C); p.u1d_b = detail::zero_bias<S>(2 * C);
    p.u1a_w = detail::he_conv<S>(rng, 2 * C, 4 * C, 3); p.u1a_b = detail::zero_bias<S>(2 * C);
    p.u1b_w = detail::he_conv<S>(rng, 2 * C, 2 * C, 3); p.u1b_b = detail::zero_bias<S>(2 * C);
    p.u2d_w = detail::he_deconv<S>(rng, 2 * C, C);    p.u2d_b = detail::zero_bias<S>(C);
    p.u2a_w = detail::he_conv<S>(rng, C, 2 * C, 3);   p.u2a_b = detail::zero_bias<S>(C);
    p.u2b_w = detail::he_conv<S>(rng, C, C, 3);       p.u2b_b = detail::zero_bias<S>(C);
    p.head_w = detail::he_conv<S>(rng, 2, C, 1);      p.head_b = detail::zero_bias<S>(2);
    return p;
}

/// Cached activations of one forward pass, consumed by unet_backward.
template <typename S>
struct UNetTrace {
    Tensor4<S> x;
    Tensor4<S> d1a, d1a_r, d1b, d1b_r, p1;
    Tensor4<S> d2a, d2a_r, d2b, d2b_r, p2;
    Tensor4<S> u1d, u1d_r, cat1, u1a, u1a_r, u1b, u1b_r;
    Tensor4<S> u2d, u2d_r, cat2, u2a, u2a_r, u2b, u2b_r;
    std::vector<std::uint32_t> p1_arg, p2_arg;
};

/// Forward pass. Input is (n, 1, h, w) with h and w divisible by 4; output
/// logits are (n, 2, h, w). Pass a trace to enable backward.
template <typename S>
Tensor4<S> unet_forward(const UNetParams<S>& p, const Tensor4<S>& x, UNetTrace<S>* trace = nullptr) {
    if (x.c != 1)
        throw DimensionError("unet_forward: input must have 1 channel");
    if (x.h % 4 != 0 || x.w % 4 != 0)
        throw DimensionError("unet_forward: spatial dims must be divisible by 4");
    UNetTrace<S> local;
    UNetTrace<S>& t = trace ? *trace : local;

    t.x = x;
    t.d1a = conv2d_forward(t.x, p.d1a_w.value, p.d1a_b.value);
    t.d1a_r = relu_forward(t.d1a);
    t.d1b = conv2d_forward(t.d1a_r, p.d1b_w.value, p.d1b_b.value);
    t.d1b_r = relu_forward(t.d1b);
    auto pool1 = maxpool2_forward(t.d1b_r);
    t.p1 = std::move(pool1.first);
    t.p1_arg = std::move(pool1.second);

    t.d2a = conv2d_forward(t.p1, p.d2a_w.value, p.d2a_b.value);
    t.d2a_r = relu_forward(t.d2a);
    t.d2b = conv2d_forward(t.d2a_r, p.d2b_w.value, p.d2b_b.value);
    t.d2b_r = relu_forward(t.d2b);
    auto pool2 = maxpool2_forward(t.d2b_r);
    t.p2 = std::move(pool2.first);
    t.p2_arg = std::move(pool2.second);

    t.u1d = deconv2_forward(t.p2, p.u1d_w.value, p.u1d_b.value);
    t.u1d_r = relu_forward(t.u1d);
    t.cat1 = concat_channels(t.u1d_r, t.d2b_r);
    t.u1a = conv2d_forward(t.cat1, p.u1a_w.value, p.u1a_b.value);
    t.u1a_r = relu_forward(t.u1a);
    t.u1b = conv2d_forward(t.u1a_r, p.u1b_w.value, p.u1b_b.value);
    t.u1b_r = relu_forward(t.u1b);

    t.u2d = deconv2_forward(t.u1b_r, p.u2d_w.value, p.u2d_b.value);
    t.u2d_r = relu_forward(t.u2d);
    t.cat2 = concat_channels(t.u2d_r, t.d1b_r);
    t.u2a = conv2d_forward(t.cat2, p.u2a_w.value, p.u2a_b.value);
    t.u2a_r = relu_forward(t.u2a);
    t.u2b = conv2d_forward(t.u2a_r, p.u2b_w.value, p.u2b_b.value);
    t.u2b_r = relu_forward(t.u2b);

    return conv2d_forward(t.u2b_r, p.head_w.value, p.head_b.value);
}

/// Backprop from dlogits; accumulates every parameter gradient.
template <typename S>
void unet_backward(UNetParams<S>& p, const UNetTrace<S>& t, const Tensor4<S>& dlogits) {
    const int C = p.base_channels;

    Tensor4<S> d = conv2d_backward(t.u2b_r, p.head_w.value, dlogits, p.head_w.grad, p.head_b.grad);
    d = relu_backward(t.u2b, d);
    d = conv2d_backward(t.u2a_r, p.u2b_w.value, d, p.u2b_w.grad, p.u2b_b.grad);
    d = relu_backward(t.u2a, d);
    d = conv2d_backward(t.cat2, p.u2a_w.value, d, p.u2a_w.grad, p.u2a_b.grad);
    auto [du2d_r, dskip1] = concat_channels_backward(d, C, C);
    Tensor4<S> du2d = relu_backward(t.u2d, du2d_r);
    d = deconv2_backward(t.u1b_r, p.u2d_w.value, du2d, p.u2d_w.grad, p.u2d_b.grad);

    d = relu_backward(t.u1b, d);
    d = conv2d_backward(t.u1a_r, p.u1b_w.value, d, p.u1b_w.grad, p.u1b_b.grad);
    d = relu_backward(t.u1a, d);
    d = conv2d_backward(t.cat1, p.u1a_w.value, d, p.u1a_w.grad, p.u1a_b.grad);
    auto [du1d_r, dskip2] = concat_channels_backward(d, 2 * C, 2 * C);
    Tensor4<S> du1d = relu_backward(t.u1d, du1d_r);
    d = deconv2_backward(t.p2, p.u1d_w.value, du1d, p.u1d_w.grad, p.u1d_b.grad);

    d = maxpool2_backward(t.d2b_r, t.p2_arg, d);
    // skip branch from cat1 joins here
    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += dskip2.v[i];
    d = relu_backward(t.d2b, d);
    d = conv2d_backward(t.d2a_r, p.d2b_w.value, d, p.d2b_w.grad, p.d2b_b.grad);
    d = relu_backward(t.d2a, d);
    d = conv2d_backward(t.p1, p.d2a_w.value, d, p.d2a_w.grad, p.d2a_b.grad);

    d = maxpool2_backward(t.d1b_r, t.p1_arg, d);
    for (std::size_t i = 0; i < d.size(); ++i) d.v[i] += dskip1.v[i];
    d = relu_backward(t.d1b, d);
    d = conv2d_backward(t.d1a_r, p.d1b_w.value, d, p.d1b_w.grad, p.d1b_b.grad);
    d = relu_backward(t.d1a, d);
    conv2d_backward(t.x, p.d1a_w.value, d, p.d1a_w.grad, p.d1a_b.grad);
}

/// Normalizes a raster into a (1, 1, h, w) tensor: ink = 1, background = 0.
template <typename S>
Tensor4<S> image_to_tensor(const GrayImage& img) {
    Tensor4<S> t(1, 1, img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        t.v[i] = static_cast<S>((255.0 - img.data[i]) / 255.0);
    return t;
}

/// Per-pixel argmax over the two logits. Class 1 (artifact) -> mask pixel 0;
/// a tie goes to class 0, so nothing is erased on a tie.
template <typename S>
SegMask predict_mask(const UNetParams<S>& p, const GrayImage& image) {
    Tensor4<S> logits = unet_forward(p, image_to_tensor<S>(image));
    SegMask mask(image.height, image.width);
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c)
            mask.at(r, c) = logits.at(0, 1, r, c) > logits.at(0, 0, r, c) ? 0 : 255;
    return mask;
}

}  // namespace inkstrip

#endif
