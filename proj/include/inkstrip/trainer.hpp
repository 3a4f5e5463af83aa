#ifndef INKSTRIP_TRAINER_HPP
#define INKSTRIP_TRAINER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "inkstrip/errors.hpp"
#include "inkstrip/image.hpp"
#include "inkstrip/pgm.hpp"
#include "inkstrip/rng.hpp"
#include "inkstrip/synth.hpp"
#include "inkstrip/unet.hpp"

namespace inkstrip {

struct TrainConfig {
    double lr = 1e-3;
    double rms_decay = 0.9;
    double rms_eps = 1e-8;
    int batch_size = 16;
    int iterations = 0;
    std::uint64_t seed = 0;
    bool augment = false;
    double aug_scale_min = 0.8, aug_scale_max = 1.0;
    int eval_every = 50;  // held-out error cadence; 0 disables

    void validate() const {
        if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be > 0");
        if (rms_decay <= 0.0 || rms_decay >= 1.0)
            throw ConfigError("TrainConfig: rms_decay must lie in (0, 1)");
        if (rms_eps <= 0.0) throw ConfigError("TrainConfig: rms_eps must be > 0");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (iterations < 0) throw ConfigError("TrainConfig: iterations must be >= 0");
    }
};

struct TrainHistory {
    std::vector<double> loss;                            // one entry per iteration
    std::vector<std::pair<int, double>> heldout_seg_error;  // (iteration, percent)
};

/// One loaded training record: the network sees dirty, the loss sees mask.
struct TrainSample {
    std::string id;
    GrayImage dirty;
    SegMask mask;
};

// ---------------------------------------------------------------------------
// Median frequency balancing. For class c,
//
//   f_c = (total pixels of class c) / (total pixels over images containing c)
//   w_c = median(f_0, f_1) / f_c,   median of two values = their midpoint
//
// so w_0 f_0 == w_1 f_1 and the rarer class carries the larger weight.
// ---------------------------------------------------------------------------
inline std::array<double, 2> median_freq_weights(const std::vector<SegMask>& masks) {
    if (masks.empty())
        throw DataError("median_freq_weights: need at least one mask");
    // class 0 = not-artifact (pixel 255), class 1 = artifact (pixel 0)
    double count[2] = {0.0, 0.0};
    double denom[2] = {0.0, 0.0};
    for (const SegMask& m : masks) {
        std::size_t artifact = count_black(m);
        std::size_t total = m.pixel_count();
        std::size_t not_artifact = total - artifact;
        count[0] += static_cast<double>(not_artifact);
        count[1] += static_cast<double>(artifact);
        if (not_artifact > 0) denom[0] += static_cast<double>(total);
        if (artifact > 0) denom[1] += static_cast<double>(total);
    }
    if (count[0] == 0.0 || count[1] == 0.0)
        throw DataError("median_freq_weights: a class is absent from every mask");
    const double f0 = count[0] / denom[0];
    const double f1 = count[1] / denom[1];
    const double median = 0.5 * (f0 + f1);
    return {median / f0, median / f1};
}

/// RMSProp update of one parameter tensor, then its gradient is zeroed:
///   v <- rho v + (1 - rho) g^2 ;  theta <- theta - lr g / (sqrt(v) + eps)
template <typename S>
void rmsprop_update(Param<S>& p, const TrainConfig& cfg) {
    const S rho = static_cast<S>(cfg.rms_decay);
    const S lr = static_cast<S>(cfg.lr);
    const S eps = static_cast<S>(cfg.rms_eps);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        const S g = p.grad.v[i];
        p.rms.v[i] = rho * p.rms.v[i] + (S(1) - rho) * g * g;
        p.value.v[i] -= lr * g / (std::sqrt(p.rms.v[i]) + eps);
    }
    p.zero_grad();
}

/// One optimizer step over every network parameter.
template <typename S>
void rmsprop_step(UNetParams<S>& params, const TrainConfig& cfg) {
    params.for_each([&cfg](const char*, Param<S>& p) { rmsprop_update(p, cfg); });
}

/// Loads and validates every manifest sample (Alg.-1 masks or externally
/// supplied ones alike; only the invariant checks of validate_manifest are
/// skipped here since hand-annotated masks need not satisfy S = A - A∩B).
inline std::vector<TrainSample> load_training_set(const std::string& manifest_path) {
    std::vector<TrainSample> out;
    for (const ManifestEntry& e : load_manifest(manifest_path)) {
        TrainSample s;
        s.id = e.id;
        s.dirty = pgm_read(e.dirty_path);
        s.mask = SegMask(pgm_read(e.mask_path));
        if (!s.dirty.same_dims(s.mask))
            throw DataError("load_training_set: dirty/mask dims differ for " + e.id);
        if (!is_binary(s.dirty) || !is_binary(s.mask))
            throw DataError("load_training_set: non-binary raster for " + e.id);
        out.push_back(std::move(s));
    }
    return out;
}

/// Deterministic 9:1-style split: indices shuffled by `seed`, first
/// round(ratio*n) entries train, the rest held out.
inline std::pair<std::vector<TrainSample>, std::vector<TrainSample>> split_train_val(
    std::vector<TrainSample> samples, double ratio, std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0)
        throw ConfigError("split_train_val: ratio must lie in [0, 1]");
    Rng rng(derive_seed(seed, 3));
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(
                                    rng.uniform_int(0, static_cast<int>(i) - 1))]);
    const std::size_t n_train = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(samples.size())));
    std::pair<std::vector<TrainSample>, std::vector<TrainSample>> out;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_train ? out.first : out.second).push_back(std::move(samples[order[i]]));
    return out;
}

namespace detail {

inline void fill_batch(Tensor4<float>& x, ClassMap& labels, const std::vector<TrainSample>& set,
                       const std::vector<std::size_t>& order, std::size_t start, int batch,
                       bool do_augment, Rng& aug_rng, double smin, double smax) {
    for (int b = 0; b < batch; ++b) {
        const TrainSample& s = set[order[start + static_cast<std::size_t>(b)]];
        const GrayImage* dirty = &s.dirty;
        const SegMask* mask = &s.mask;
        GrayImage aug_dirty;
        SegMask aug_mask;
        if (do_augment) {
            const AugmentParams ap = draw_augment(aug_rng, smin, smax, s.dirty.height,
                                                  s.dirty.width, s.dirty.height, s.dirty.width);
            aug_dirty = apply_augment(s.dirty, ap, s.dirty.height, s.dirty.width);
            aug_mask = SegMask(apply_augment(s.mask, ap, s.dirty.height, s.dirty.width));
            dirty = &aug_dirty;
            mask = &aug_mask;
        }
        for (int r = 0; r < dirty->height; ++r)
            for (int c = 0; c < dirty->width; ++c) {
                x.at(b, 0, r, c) = static_cast<float>((255.0 - dirty->at(r, c)) / 255.0);
                labels.at(b, r, c) = mask->at(r, c) == 0 ? 1 : 0;
            }
    }
}

}  // namespace detail

/// Mean segmentation disagreement (percent) of predictions over `set`.
template <typename S>
double mean_seg_error(const UNetParams<S>& params, const std::vector<TrainSample>& set) {
    if (set.empty()) return 0.0;
    double total = 0.0;
    for (const TrainSample& s : set) {
        const SegMask pred = predict_mask(params, s.dirty);
        std::size_t mismatch = 0;
        for (std::size_t i = 0; i < pred.data.size(); ++i)
            if (pred.data[i] != s.mask.data[i]) ++mismatch;
        total += 100.0 * static_cast<double>(mismatch) / static_cast<double>(pred.pixel_count());
    }
    return total / static_cast<double>(set.size());
}

/// Training loop: shuffled batches from cfg.seed (reshuffled each epoch, last
/// partial batch kept), median-frequency class weights computed once over the
/// pre-augmentation training masks, weighted cross-entropy, RMSProp. Entirely
/// single-threaded, so the result is a pure function of (params, data, cfg).
inline TrainHistory train(UNetParams<float>& params, const std::vector<TrainSample>& train_set,
                          const std::vector<TrainSample>& heldout, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty())
        throw DataError("train: empty dataset");
    TrainHistory history;
    if (cfg.iterations == 0) return history;
    const int h = train_set[0].dirty.height, w = train_set[0].dirty.width;
    for (const TrainSample& s : train_set)
        if (s.dirty.height != h || s.dirty.width != w)
            throw DataError("train: inconsistent raster dims in training set");

    std::vector<SegMask> masks;
    masks.reserve(train_set.size());
    for (const TrainSample& s : train_set) masks.push_back(s.mask);
    const std::array<double, 2> cw = median_freq_weights(masks);

    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    Rng aug_rng(derive_seed(cfg.seed, 2));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces a shuffle on first use

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        if (cursor >= order.size()) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(
                                            0, static_cast<int>(i) - 1))]);
            cursor = 0;
        }
        const int batch = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - cursor));
        Tensor4<float> x(batch, 1, h, w);
        ClassMap labels(batch, h, w);
        detail::fill_batch(x, labels, train_set, order, cursor, batch, cfg.augment, aug_rng,
                           cfg.aug_scale_min, cfg.aug_scale_max);
        cursor += static_cast<std::size_t>(batch);

        UNetTrace<float> trace;
        Tensor4<float> logits = unet_forward(params, x, &trace);
        auto [loss, dlogits] = weighted_softmax_ce(logits, labels, cw[0], cw[1]);
        unet_backward(params, trace, dlogits);
        rmsprop_step(params, cfg);
        history.loss.push_back(loss);

        if (!heldout.empty() && cfg.eval_every > 0 &&
            ((iter + 1) % cfg.eval_every == 0 || iter + 1 == cfg.iterations))
            history.heldout_seg_error.push_back({iter + 1, mean_seg_error(params, heldout)});
    }
    return history;
}

/// Convenience overload: whole manifest as the training set, no held-out eval.
inline TrainHistory train(UNetParams<float>& params, const std::string& manifest_path,
                          const TrainConfig& cfg) {
    return train(params, load_training_set(manifest_path), {}, cfg);
}

// ---------------------------------------------------------------------------
// Checkpoints. Little-endian layout:
//   magic "DEINK001" | u32 base_channels | u32 tensor_count |
//   per tensor: u16 name_len, name bytes, u8 ndim, u32 dims[ndim], f32 data
// Weights keep their 4-d dims; biases are stored 1-d. RMS accumulators are
// written only on request, as extra tensors named "<name>.rms".
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;
    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

/// Dims as serialized: 4-d for weights, 1-d for biases (c==h==w==1).
inline std::vector<std::uint32_t> logical_dims(const Tensor4<float>& t) {
    if (t.c == 1 && t.h == 1 && t.w == 1) return {static_cast<std::uint32_t>(t.n)};
    return {static_cast<std::uint32_t>(t.n), static_cast<std::uint32_t>(t.c),
            static_cast<std::uint32_t>(t.h), static_cast<std::uint32_t>(t.w)};
}

inline void put_tensor(std::string& out, const std::string& name, const Tensor4<float>& t) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    const auto dims = logical_dims(t);
    out.push_back(static_cast<char>(dims.size()));
    for (std::uint32_t d : dims) put_u32(out, d);
    for (float f : t.v) put_f32(out, f);
}

}  // namespace detail

inline constexpr char kCheckpointMagic[9] = "DEINK001";

inline void save_checkpoint(const UNetParams<float>& params, const std::string& path,
                            bool include_rms = false) {
    std::string out(kCheckpointMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(params.base_channels));
    std::uint32_t n_tensors = 0;
    params.for_each([&n_tensors](const char*, const Param<float>&) { ++n_tensors; });
    if (include_rms) n_tensors *= 2;
    detail::put_u32(out, n_tensors);
    params.for_each([&out, include_rms](const char* name, const Param<float>& p) {
        detail::put_tensor(out, name, p.value);
        if (include_rms) detail::put_tensor(out, std::string(name) + ".rms", p.rms);
    });
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("save_checkpoint: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

/// Loads a checkpoint, validating every tensor against the channel plan for
/// the recorded C. Pass expect_channels >= 1 to also demand a specific plan.
inline UNetParams<float> load_checkpoint(const std::string& path, int expect_channels = -1) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::ByteReader r{buf};
    if (r.bytes(8) != std::string(kCheckpointMagic, 8))
        throw CheckpointError(CheckpointError::Kind::BadMagic, "bad checkpoint magic");
    const int C = static_cast<int>(r.u32());
    if (C < 1 || C > 256)
        throw CheckpointError(CheckpointError::Kind::BadPlan, "implausible channel count");
    if (expect_channels >= 1 && C != expect_channels)
        throw CheckpointError(CheckpointError::Kind::BadPlan,
                              "checkpoint has C=" + std::to_string(C) + ", expected C=" +
                                  std::to_string(expect_channels));
    const std::uint32_t n_tensors = r.u32();

    Rng dummy(0);
    UNetParams<float> params = init_params<float>(dummy, C);  // shapes only; data overwritten
    std::map<std::string, Tensor4<float>*> slots;
    params.for_each([&slots](const char* name, Param<float>& p) {
        slots[name] = &p.value;
        slots[std::string(name) + ".rms"] = &p.rms;
    });

    std::map<std::string, bool> filled;
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
        const std::uint16_t name_len = r.u16();
        const std::string name = r.bytes(name_len);
        const int ndim = r.u8();
        if (ndim < 1 || ndim > 4)
            throw CheckpointError(CheckpointError::Kind::BadFormat, "bad ndim for " + name);
        std::uint64_t total = 1;
        std::vector<std::uint32_t> dims;
        for (int d = 0; d < ndim; ++d) {
            dims.push_back(r.u32());
            total *= dims.back();
        }
        auto slot = slots.find(name);
        if (slot == slots.end())
            throw CheckpointError(CheckpointError::Kind::BadPlan, "unexpected tensor " + name);
        Tensor4<float>& dst = *slot->second;
        if (total != dst.size() || detail::logical_dims(dst) != dims)
            throw CheckpointError(CheckpointError::Kind::BadPlan,
                                  "tensor " + name + " does not match the C=" + std::to_string(C) +
                                      " channel plan");
        for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] = r.f32();
        filled[name] = true;
    }
    params.for_each([&filled](const char* name, Param<float>&) {
        if (!filled.count(name))
            throw CheckpointError(CheckpointError::Kind::BadPlan,
                                  std::string("missing tensor ") + name);
    });
    return params;
}

/// History CSV: `iter,loss,heldout_seg_error` with the error column present
/// only on iterations where it was measured.
inline void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("write_history_csv: cannot open " + path);
    f << "iter,loss,heldout_seg_error\n";
    std::size_t next_eval = 0;
    for (std::size_t i = 0; i < history.loss.size(); ++i) {
        f << (i + 1) << ',' << history.loss[i] << ',';
        if (next_eval < history.heldout_seg_error.size() &&
            history.heldout_seg_error[next_eval].first == static_cast<int>(i + 1)) {
            f << history.heldout_seg_error[next_eval].second;
            ++next_eval;
        }
        f << '\n';
    }
}

}  // namespace inkstrip

#endif
