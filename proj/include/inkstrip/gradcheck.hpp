#ifndef INKSTRIP_GRADCHECK_HPP
#define INKSTRIP_GRADCHECK_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "inkstrip/layers.hpp"
#include "inkstrip/rng.hpp"
#include "inkstrip/tensor.hpp"
#include "inkstrip/unet.hpp"

namespace inkstrip {

// Central finite differences against analytic gradients. The scalar objective
// for a layer f is L = <R, f(...)> for a fixed random projection R, so
// dL/dy = R and every input/parameter gradient is exercised. Wide (double)
// precision uses eps = 1e-5; standard (float) needs a coarser step.

inline double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

namespace detail {

template <typename S>
Tensor4<S> random_tensor(Rng& rng, int n, int c, int h, int w, double scale = 1.0) {
    Tensor4<S> t(n, c, h, w);
    for (auto& x : t.v) x = static_cast<S>(rng.uniform_real(-scale, scale));
    return t;
}

/// Max relative error between the analytic gradient `grad` of loss() w.r.t.
/// `subject` and central differences (f(x+eps) - f(x-eps)) / 2eps.
template <typename S>
double sweep(Tensor4<S>& subject, const Tensor4<S>& grad,
             const std::function<double()>& loss, double eps) {
    double worst = 0.0;
    for (std::size_t i = 0; i < subject.size(); ++i) {
        const S keep = subject.v[i];
        subject.v[i] = static_cast<S>(keep + eps);
        const double lp = loss();
        subject.v[i] = static_cast<S>(keep - eps);
        const double lm = loss();
        subject.v[i] = keep;
        const double numeric = (lp - lm) / (2.0 * eps);
        worst = std::max(worst, rel_error(static_cast<double>(grad.v[i]), numeric));
    }
    return worst;
}

template <typename S>
double inner(const Tensor4<S>& a, const Tensor4<S>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<double>(a.v[i]) * static_cast<double>(b.v[i]);
    return s;
}

}  // namespace detail

/// conv2d: checks dx, dw, db on a random (2,3,5,7) input with 4 output channels.
template <typename S = double>
double grad_check_conv2d(Rng& rng, double eps = 1e-5) {
    auto x = detail::random_tensor<S>(rng, 2, 3, 5, 7);
    auto w = detail::random_tensor<S>(rng, 4, 3, 3, 3);
    auto b = detail::random_tensor<S>(rng, 4, 1, 1, 1);
    const auto R = detail::random_tensor<S>(rng, 2, 4, 5, 7);
    auto loss = [&] { return detail::inner(conv2d_forward(x, w, b), R); };
    Tensor4<S> dw(4, 3, 3, 3), db(4, 1, 1, 1);
    Tensor4<S> dx = conv2d_backward(x, w, R, dw, db);
    double worst = detail::sweep(x, dx, loss, eps);
    worst = std::max(worst, detail::sweep(w, dw, loss, eps));
    worst = std::max(worst, detail::sweep(b, db, loss, eps));
    return worst;
}

/// relu: inputs nudged away from the kink at 0 by more than eps.
template <typename S = double>
double grad_check_relu(Rng& rng, double eps = 1e-5) {
    auto x = detail::random_tensor<S>(rng, 2, 3, 4, 6);
    const double margin = std::max(0.05, 2.0 * eps);
    for (auto& v : x.v)
        if (std::fabs(static_cast<double>(v)) < margin)
            v = static_cast<S>(v < S(0) ? v - margin : v + margin);
    const auto R = detail::random_tensor<S>(rng, 2, 3, 4, 6);
    auto loss = [&] { return detail::inner(relu_forward(x), R); };
    Tensor4<S> dx = relu_backward(x, R);
    return detail::sweep(x, dx, loss, eps);
}

/// maxpool2: a shuffled value grid keeps window entries separated by more
/// than 2 eps so the perturbation cannot flip an argmax.
template <typename S = double>
double grad_check_maxpool2(Rng& rng, double eps = 1e-5) {
    Tensor4<S> x(2, 2, 4, 6);
    std::vector<int> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    const double spacing = std::max(0.01, 4.0 * eps);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.v[i] = static_cast<S>(spacing * order[i]);
    const auto R = detail::random_tensor<S>(rng, 2, 2, 2, 3);
    auto loss = [&] { return detail::inner(maxpool2_forward(x).first, R); };
    auto [y, argmax] = maxpool2_forward(x);
    Tensor4<S> dx = maxpool2_backward(x, argmax, R);
    return detail::sweep(x, dx, loss, eps);
}

/// deconv2: checks dx, dw, db for the 2x2 stride-2 transposed convolution.
template <typename S = double>
double grad_check_deconv2(Rng& rng, double eps = 1e-5) {
    auto x = detail::random_tensor<S>(rng, 2, 3, 3, 4);
    auto w = detail::random_tensor<S>(rng, 3, 2, 2, 2);
    auto b = detail::random_tensor<S>(rng, 2, 1, 1, 1);
    const auto R = detail::random_tensor<S>(rng, 2, 2, 6, 8);
    auto loss = [&] { return detail::inner(deconv2_forward(x, w, b), R); };
    Tensor4<S> dw(3, 2, 2, 2), db(2, 1, 1, 1);
    Tensor4<S> dx = deconv2_backward(x, w, R, dw, db);
    double worst = detail::sweep(x, dx, loss, eps);
    worst = std::max(worst, detail::sweep(w, dw, loss, eps));
    worst = std::max(worst, detail::sweep(b, db, loss, eps));
    return worst;
}

template <typename S = double>
double grad_check_concat(Rng& rng, double eps = 1e-5) {
    auto a = detail::random_tensor<S>(rng, 2, 2, 3, 4);
    auto b = detail::random_tensor<S>(rng, 2, 3, 3, 4);
    const auto R = detail::random_tensor<S>(rng, 2, 5, 3, 4);
    auto loss = [&] { return detail::inner(concat_channels(a, b), R); };
    auto [da, db] = concat_channels_backward(R, 2, 3);
    double worst = detail::sweep(a, da, loss, eps);
    worst = std::max(worst, detail::sweep(b, db, loss, eps));
    return worst;
}

/// weighted softmax cross-entropy: the loss itself is the objective.
template <typename S = double>
double grad_check_wce(Rng& rng, double eps = 1e-5) {
    auto logits = detail::random_tensor<S>(rng, 2, 2, 3, 4, 2.0);
    ClassMap labels(2, 3, 4);
    for (auto& y : labels.v) y = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    const double w0 = 0.7, w1 = 2.3;
    auto loss = [&] { return weighted_softmax_ce(logits, labels, w0, w1).first; };
    Tensor4<S> dlogits = weighted_softmax_ce(logits, labels, w0, w1).second;
    return detail::sweep(logits, dlogits, loss, eps);
}

/// End-to-end check: loss through a tiny net (C=2, 8x16 input) w.r.t. a
/// random 20-parameter subsample. Keep eps small: a coarse step perturbs
/// downstream relu kinks and the finite difference stops being a derivative.
template <typename S = double>
double grad_check_unet_subsample(Rng& rng, int n_params = 20, double eps = 1e-5) {
    UNetParams<S> p = init_params<S>(rng, 2);
    auto x = detail::random_tensor<S>(rng, 1, 1, 8, 16, 1.0);
    for (auto& v : x.v) v = std::fabs(v);
    ClassMap labels(1, 8, 16);
    for (auto& y : labels.v) y = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    const double w0 = 0.8, w1 = 1.9;

    auto loss = [&] {
        Tensor4<S> logits = unet_forward(p, x);
        return weighted_softmax_ce(logits, labels, w0, w1).first;
    };

    UNetTrace<S> trace;
    Tensor4<S> logits = unet_forward(p, x, &trace);
    auto [l0, dlogits] = weighted_softmax_ce(logits, labels, w0, w1);
    (void)l0;
    unet_backward(p, trace, dlogits);

    std::vector<std::pair<Param<S>*, std::size_t>> coords;
    p.for_each([&coords](const char*, Param<S>& prm) {
        for (std::size_t i = 0; i < prm.value.size(); ++i) coords.push_back({&prm, i});
    });
    double worst = 0.0;
    for (int t = 0; t < n_params; ++t) {
        const std::size_t pick = static_cast<std::size_t>(rng.next_u64() % coords.size());
        auto [prm, i] = coords[pick];
        const S keep = prm->value.v[i];
        prm->value.v[i] = static_cast<S>(keep + eps);
        const double lp = loss();
        prm->value.v[i] = static_cast<S>(keep - eps);
        const double lm = loss();
        prm->value.v[i] = keep;
        const double numeric = (lp - lm) / (2.0 * eps);
        worst = std::max(worst, rel_error(static_cast<double>(prm->grad.v[i]), numeric));
    }
    return worst;
}

/// One (name, max relative error, threshold) row per checked layer.
struct GradCheckRow {
    std::string layer;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool ok() const { return max_rel_err <= threshold; }
};

/// Runs the whole battery at the given precision. Wide precision holds every
/// layer to 1e-4 and the end-to-end subsample to 1e-3. Standard precision
/// holds the layers to 1e-3; coordinate-wise linear layers take a large step
/// (exact for them, and it drowns float cancellation), the rest a small one.
/// The end-to-end subsample is a wide-precision check only: float rounding
/// through a full forward pass swamps the tiny per-parameter signal.
template <typename S = double>
std::vector<GradCheckRow> grad_check_all(std::uint64_t seed) {
    constexpr bool wide = sizeof(S) == sizeof(double);
    const double lin_eps = wide ? 1e-5 : 2.0;
    const double relu_eps = wide ? 1e-5 : 0.1;
    const double wce_eps = wide ? 1e-5 : 1e-2;
    const double layer_tol = wide ? 1e-4 : 1e-3;
    std::vector<GradCheckRow> rows;
    Rng r1(derive_seed(seed, 1));
    rows.push_back({"conv2d", grad_check_conv2d<S>(r1, lin_eps), layer_tol});
    Rng r2(derive_seed(seed, 2));
    rows.push_back({"relu", grad_check_relu<S>(r2, relu_eps), layer_tol});
    Rng r3(derive_seed(seed, 3));
    rows.push_back({"maxpool2", grad_check_maxpool2<S>(r3, lin_eps), layer_tol});
    Rng r4(derive_seed(seed, 4));
    rows.push_back({"deconv2", grad_check_deconv2<S>(r4, lin_eps), layer_tol});
    Rng r5(derive_seed(seed, 5));
    rows.push_back({"concat", grad_check_concat<S>(r5, lin_eps), layer_tol});
    Rng r6(derive_seed(seed, 6));
    rows.push_back({"weighted_softmax_ce", grad_check_wce<S>(r6, wce_eps), layer_tol});
    if (wide) {
        Rng r7(derive_seed(seed, 7));
        rows.push_back({"unet_20_param_subsample", grad_check_unet_subsample<S>(r7, 20, 1e-5), 1e-3});
    }
    return rows;
}

}  // namespace inkstrip

#endif
