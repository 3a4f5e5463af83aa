#ifndef INKSTRIP_SYNTH_HPP
#define INKSTRIP_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "inkstrip/errors.hpp"
#include "inkstrip/image.hpp"
#include "inkstrip/pgm.hpp"
#include "inkstrip/rng.hpp"

namespace inkstrip {

enum class ArtifactKind { Underline, Box, Smudge, Stroke, FromFile };

inline const char* kind_name(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Underline: return "underline";
        case ArtifactKind::Box: return "box";
        case ArtifactKind::Smudge: return "smudge";
        case ArtifactKind::Stroke: return "stroke";
        case ArtifactKind::FromFile: return "from_file";
    }
    return "?";
}

inline ArtifactKind kind_from_name(const std::string& s) {
    if (s == "underline") return ArtifactKind::Underline;
    if (s == "box") return ArtifactKind::Box;
    if (s == "smudge") return ArtifactKind::Smudge;
    if (s == "stroke") return ArtifactKind::Stroke;
    if (s == "from_file") return ArtifactKind::FromFile;
    throw ConfigError("unknown artifact kind: " + s);
}

/// Fixed iteration order for kind-dependent draws; determinism relies on it.
inline constexpr std::array<ArtifactKind, 5> kAllKinds = {
    ArtifactKind::Underline, ArtifactKind::Box, ArtifactKind::Smudge,
    ArtifactKind::Stroke, ArtifactKind::FromFile};

/// Inclusive uniform offset bounds for artifact placement.
struct OffsetBounds {
    int dy_min = 0, dy_max = 0, dx_min = 0, dx_max = 0;

    void validate() const {
        if (dy_min > dy_max || dx_min > dx_max)
            throw ConfigError("OffsetBounds: min must be <= max");
    }
};

/// One training record. `artifact` holds the already-translated artifact at
/// canvas dims, so dirty == superimpose(clean, artifact) and
/// mask == derive_mask(clean, artifact) hold directly.
struct Sample {
    std::string id;
    GrayImage clean;
    GrayImage artifact;
    GrayImage dirty;
    SegMask mask;
    int dy = 0, dx = 0;
    ArtifactKind kind = ArtifactKind::Underline;
    std::optional<std::string> transcript;
};

struct GenConfig {
    std::uint64_t master_seed = 1;
    int count = 0;
    int canvas_h = 32, canvas_w = 128;
    std::map<ArtifactKind, double> kind_mix = {
        {ArtifactKind::Underline, 0.4},
        {ArtifactKind::Box, 0.2},
        {ArtifactKind::Smudge, 0.2},
        {ArtifactKind::Stroke, 0.2},
    };
    // Underline at the bottom band, strokes near the top, boxes centered,
    // smudges roaming. All overridable.
    std::map<ArtifactKind, OffsetBounds> offsets = {
        {ArtifactKind::Underline, {24, 31, -16, 16}},
        {ArtifactKind::Box, {-2, 2, -8, 8}},
        {ArtifactKind::Smudge, {-12, 12, -40, 40}},
        {ArtifactKind::Stroke, {-8, 4, -24, 24}},
        {ArtifactKind::FromFile, {-8, 8, -24, 24}},
    };
    double scale_min = 0.8, scale_max = 1.0;
    bool augment = false;
    int glyphs_min = 3, glyphs_max = 10;
    int underline_jitter = 1;
    std::string clean_dir;     // optional: real clean rasters instead of pseudo-text
    std::string artifact_dir;  // required when kind_mix includes from_file

    void validate() const {
        if (count < 0) throw ConfigError("GenConfig: count must be >= 0");
        if (canvas_h < 8 || canvas_w < 8) throw ConfigError("GenConfig: canvas too small");
        double total = 0.0;
        for (const auto& [kind, p] : kind_mix) {
            if (p < 0.0 || p > 1.0)
                throw ConfigError(std::string("GenConfig: probability out of range for ") + kind_name(kind));
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9)
            throw ConfigError("GenConfig: kind mix must sum to 1");
        for (const auto& [kind, b] : offsets) b.validate();
        if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0))
            throw ConfigError("GenConfig: scale range must lie in (0, 1]");
        if (glyphs_min < 1 || glyphs_min > glyphs_max)
            throw ConfigError("GenConfig: bad glyph count range");
        auto it = kind_mix.find(ArtifactKind::FromFile);
        if (it != kind_mix.end() && it->second > 0.0 && artifact_dir.empty())
            throw ConfigError("GenConfig: from_file mix requires artifact_dir");
    }
};

// ---------------------------------------------------------------------------
// Shape rasterizers. All clip at the canvas border.
// ---------------------------------------------------------------------------

namespace draw {

inline void stamp(GrayImage& img, int r, int c, int thickness) {
    for (int dr = 0; dr < thickness; ++dr)
        for (int dc = 0; dc < thickness; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr >= 0 && rr < img.height && cc >= 0 && cc < img.width)
                img.at(rr, cc) = 0;
        }
}

/// Solid horizontal run at `row`, columns [c0, c1], `thickness` rows tall.
inline void underline(GrayImage& img, int row, int c0, int c1, int thickness) {
    for (int k = 0; k < thickness; ++k)
        for (int c = c0; c <= c1; ++c) {
            const int r = row + k;
            if (r >= 0 && r < img.height && c >= 0 && c < img.width)
                img.at(r, c) = 0;
        }
}

/// Hollow axis-aligned rectangle spanning rows [r0, r1] and cols [c0, c1],
/// drawn as four filled strips of width `stroke`.
inline void box(GrayImage& img, int r0, int c0, int r1, int c1, int stroke) {
    auto fill = [&img](int fr0, int fc0, int fr1, int fc1) {
        for (int r = std::max(0, fr0); r <= std::min(img.height - 1, fr1); ++r)
            for (int c = std::max(0, fc0); c <= std::min(img.width - 1, fc1); ++c)
                img.at(r, c) = 0;
    };
    fill(r0, c0, r0 + stroke - 1, c1);  // top
    fill(r1 - stroke + 1, c0, r1, c1);  // bottom
    fill(r0, c0, r1, c0 + stroke - 1);  // left
    fill(r0, c1 - stroke + 1, r1, c1);  // right
}

inline void filled_ellipse(GrayImage& img, int cy, int cx, int ry, int rx) {
    for (int r = std::max(0, cy - ry); r <= std::min(img.height - 1, cy + ry); ++r)
        for (int c = std::max(0, cx - rx); c <= std::min(img.width - 1, cx + rx); ++c) {
            const double fy = static_cast<double>(r - cy) / ry;
            const double fx = static_cast<double>(c - cx) / rx;
            if (fy * fy + fx * fx <= 1.0) img.at(r, c) = 0;
        }
}

/// Bresenham segment from (r0,c0) to (r1,c1).
inline void line(GrayImage& img, int r0, int c0, int r1, int c1, int thickness = 1) {
    const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
    const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
    int err = (dc > dr ? dc : -dr) / 2;
    int r = r0, c = c0;
    while (true) {
        stamp(img, r, c, thickness);
        if (r == r1 && c == c1) break;
        const int e2 = err;
        if (e2 > -dc) { err -= dr; c += sc; }
        if (e2 < dr) { err += dc; r += sr; }
    }
}

/// Quadratic Bezier through control points p0, p1, p2, stamped at `thickness`.
inline void quad_bezier(GrayImage& img, int r0, int c0, int r1, int c1, int r2, int c2,
                        int thickness = 1) {
    const int steps = 4 * (std::abs(r2 - r0) + std::abs(c2 - c0) + std::abs(r1 - r0) + std::abs(c1 - c0)) + 8;
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, cc = t * t;
        const int r = static_cast<int>(std::lround(a * r0 + b * r1 + cc * r2));
        const int c = static_cast<int>(std::lround(a * c0 + b * c1 + cc * c2));
        stamp(img, r, c, thickness);
    }
}

}  // namespace draw

// ---------------------------------------------------------------------------
// Procedural artifact generators
// ---------------------------------------------------------------------------

namespace detail {

inline GrayImage gen_underline(Rng& rng, int h, int w, int jitter) {
    GrayImage img(h, w, 255);
    const int r0 = rng.uniform_int(0, 2);
    const int t = rng.uniform_int(1, 3);
    int c0 = 0, c1 = w - 1;
    if (!rng.bernoulli(0.5)) {
        const int len = rng.uniform_int(w / 2, w - 1);
        c0 = rng.uniform_int(0, w - len);
        c1 = c0 + len - 1;
    }
    if (jitter <= 0) {
        draw::underline(img, r0, c0, c1, t);
        return img;
    }
    int off = 0;
    for (int c = c0; c <= c1; ++c) {
        off = std::clamp(off + rng.uniform_int(-1, 1), 0, jitter);
        for (int k = 0; k < t; ++k) {
            const int r = r0 + off + k;
            if (r >= 0 && r < h) img.at(r, c) = 0;
        }
    }
    return img;
}

inline GrayImage gen_box(Rng& rng, int h, int w) {
    GrayImage img(h, w, 255);
    const int stroke = rng.uniform_int(1, 2);
    const int bh_hi = h - 4, bh_lo = std::min(bh_hi, std::max(6, h / 3));
    const int bw_hi = std::max(4, w - 8), bw_lo = std::min(bw_hi, std::max(6, w / 2));
    const int bh = rng.uniform_int(bh_lo, bh_hi);
    const int bw = rng.uniform_int(bw_lo, bw_hi);
    const int r0 = (h - bh) / 2, c0 = (w - bw) / 2;
    draw::box(img, r0, c0, r0 + bh - 1, c0 + bw - 1, stroke);
    return img;
}

inline GrayImage gen_smudge(Rng& rng, int h, int w) {
    GrayImage img(h, w, 255);
    const int blobs = rng.uniform_int(3, 8);
    int cy = rng.uniform_int(h / 4, 3 * h / 4);
    int cx = rng.uniform_int(w / 8, std::max(w / 8, 7 * w / 8 - 1));
    for (int i = 0; i < blobs; ++i) {
        const int ry = rng.uniform_int(1, 3);
        const int rx = rng.uniform_int(2, 6);
        draw::filled_ellipse(img, cy, cx, ry, rx);
        cy = std::clamp(cy + rng.uniform_int(-3, 3), 1, h - 2);
        cx = std::clamp(cx + rng.uniform_int(2, 9), 1, w - 2);
    }
    return img;
}

inline GrayImage gen_stroke(Rng& rng, int h, int w) {
    GrayImage img(h, w, 255);
    const int t = rng.uniform_int(1, 2);
    const int band_hi = std::max(2, h / 2);
    const int r0 = rng.uniform_int(1, band_hi);
    const int c0 = rng.uniform_int(2, std::max(3, w / 4));
    const int r1 = rng.uniform_int(0, h - 1);
    const int c1 = rng.uniform_int(w / 4, 3 * w / 4);
    const int r2 = rng.uniform_int(1, std::min(h - 2, band_hi + h / 4));
    const int c2 = rng.uniform_int(3 * w / 4, w - 3);
    draw::quad_bezier(img, r0, c0, r1, c1, r2, c2, t);
    return img;
}

}  // namespace detail

/// One procedural artifact instance on a white h x w canvas. Output is binary
/// and carries at least 10 ink pixels for the procedural kinds. FromFile loads
/// `from_file_path` and binarizes it.
inline GrayImage gen_artifact(ArtifactKind kind, Rng& rng, int canvas_h, int canvas_w,
                              int underline_jitter = 1, const std::string& from_file_path = {}) {
    if (canvas_h < 8 || canvas_w < 8)
        throw ConfigError("gen_artifact: canvas must be at least 8x8");
    if (kind == ArtifactKind::FromFile) {
        if (from_file_path.empty())
            throw ConfigError("gen_artifact: from_file kind requires a path");
        return binarize(pgm_read(from_file_path));
    }
    for (int attempt = 0; attempt < 8; ++attempt) {
        GrayImage img;
        switch (kind) {
            case ArtifactKind::Underline:
                img = detail::gen_underline(rng, canvas_h, canvas_w, underline_jitter);
                break;
            case ArtifactKind::Box:
                img = detail::gen_box(rng, canvas_h, canvas_w);
                break;
            case ArtifactKind::Smudge:
                img = detail::gen_smudge(rng, canvas_h, canvas_w);
                break;
            case ArtifactKind::Stroke:
                img = detail::gen_stroke(rng, canvas_h, canvas_w);
                break;
            default:
                break;
        }
        if (count_black(img) >= 10) return img;
    }
    GrayImage img(canvas_h, canvas_w, 255);  // degenerate draw streak; place a blot
    draw::filled_ellipse(img, canvas_h / 2, canvas_w / 2, 2, 3);
    return img;
}

// ---------------------------------------------------------------------------
// Pseudo-text: glyph-like marks from a fixed 16-symbol alphabet, one symbol
// per cell, left to right. Stands in for real corpora so the pipeline runs
// with zero external data.
// ---------------------------------------------------------------------------

namespace detail {

// segment ids: T B L R M(mid horizontal) C(mid vertical) D(diag \) E(diag /)
enum Seg : std::uint8_t { T, B, L, R, M, C, D, E };

inline const std::vector<std::vector<Seg>>& glyph_table() {
    static const std::vector<std::vector<Seg>> table = {
        {T, L, R, M},     // a
        {L, B, R, M},     // b
        {T, L, B},        // c
        {T, R, B},        // d
        {T, M, B, L},     // e
        {T, M, L},        // f
        {T, L, B, R, M},  // g
        {L, M, R},        // h
        {C},              // i
        {C, B},           // j
        {L, D, E},        // k
        {L, B},           // l
        {T, C, L, R},     // m
        {L, D, R},        // n
        {T, B, L, R},     // o
        {T, L, M, E},     // p
    };
    return table;
}

inline void draw_glyph(GrayImage& img, int symbol, int r0, int c0, int r1, int c1, int thickness) {
    const int rm = (r0 + r1) / 2, cm = (c0 + c1) / 2;
    for (Seg s : glyph_table()[static_cast<std::size_t>(symbol)]) {
        switch (s) {
            case T: draw::line(img, r0, c0, r0, c1, thickness); break;
            case B: draw::line(img, r1, c0, r1, c1, thickness); break;
            case L: draw::line(img, r0, c0, r1, c0, thickness); break;
            case R: draw::line(img, r0, c1, r1, c1, thickness); break;
            case M: draw::line(img, rm, c0, rm, c1, thickness); break;
            case C: draw::line(img, r0, cm, r1, cm, thickness); break;
            case D: draw::line(img, r0, c0, r1, c1, thickness); break;
            case E: draw::line(img, r1, c0, r0, c1, thickness); break;
        }
    }
}

constexpr int kGlyphCellW = 10;
constexpr int kGlyphCellH = 20;
constexpr int kGlyphLeftMargin = 2;

}  // namespace detail

/// Renders n_glyphs symbols into left-to-right cells; the transcript is the
/// drawn symbol sequence over the alphabet 'a'..'p'.
inline std::pair<GrayImage, std::string> gen_pseudo_text(Rng& rng, int canvas_h, int canvas_w,
                                                         int n_glyphs) {
    using namespace detail;
    if (n_glyphs < 1)
        throw ConfigError("gen_pseudo_text: n_glyphs must be >= 1");
    if (kGlyphLeftMargin + n_glyphs * kGlyphCellW > canvas_w || kGlyphCellH > canvas_h)
        throw ConfigError("gen_pseudo_text: glyph cells do not fit the canvas");
    GrayImage img(canvas_h, canvas_w, 255);
    std::string transcript;
    const int top = (canvas_h - kGlyphCellH) / 2;
    for (int i = 0; i < n_glyphs; ++i) {
        const int symbol = rng.uniform_int(0, 15);
        const int jr = rng.uniform_int(-1, 1);
        const int jc = rng.uniform_int(-1, 1);
        const int thickness = rng.uniform_int(1, 2);
        const int x0 = kGlyphLeftMargin + i * kGlyphCellW;
        draw_glyph(img, symbol, top + 2 + jr, x0 + 2 + jc, top + kGlyphCellH - 4 + jr,
                   x0 + kGlyphCellW - 4 + jc, thickness);
        transcript.push_back(static_cast<char>('a' + symbol));
    }
    return {std::move(img), std::move(transcript)};
}

/// Integer offsets uniform on [dy_min, dy_max] x [dx_min, dx_max]; dy first.
inline std::pair<int, int> sample_offset(Rng& rng, const OffsetBounds& bounds) {
    bounds.validate();
    const int dy = rng.uniform_int(bounds.dy_min, bounds.dy_max);
    const int dx = rng.uniform_int(bounds.dx_min, bounds.dx_max);
    return {dy, dx};
}

/// Algorithm: binarize both -> translate and crop the artifact -> superimpose
/// -> derive the mask.
inline std::pair<GrayImage, SegMask> assemble(const GrayImage& clean, const GrayImage& artifact,
                                              int dy, int dx) {
    const GrayImage clean_bin = binarize(clean);
    const GrayImage art_bin = binarize(artifact);
    const GrayImage translated = translate_and_crop(art_bin, dy, dx, clean.height, clean.width);
    GrayImage dirty = superimpose(clean_bin, translated);
    SegMask mask = derive_mask(clean_bin, translated);
    return {std::move(dirty), std::move(mask)};
}

// ---------------------------------------------------------------------------
// Augmentation: one scale + shift drawn once and applied identically to every
// raster of a sample, so the erase round-trip survives exactly.
// ---------------------------------------------------------------------------

struct AugmentParams {
    double scale = 1.0;
    int out_h = 0, out_w = 0;
    int dy = 0, dx = 0;
};

inline AugmentParams draw_augment(Rng& rng, double scale_min, double scale_max, int src_h,
                                  int src_w, int canvas_h, int canvas_w) {
    if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0))
        throw ConfigError("draw_augment: scale range must lie in (0, 1]");
    AugmentParams ap;
    ap.scale = rng.uniform_real(scale_min, scale_max);
    ap.out_h = std::max(1, static_cast<int>(std::lround(src_h * ap.scale)));
    ap.out_w = std::max(1, static_cast<int>(std::lround(src_w * ap.scale)));
    if (ap.out_h > canvas_h || ap.out_w > canvas_w)
        throw DataError("draw_augment: scaled image exceeds canvas");
    ap.dy = rng.uniform_int(0, canvas_h - ap.out_h);
    ap.dx = rng.uniform_int(0, canvas_w - ap.out_w);
    return ap;
}

inline GrayImage apply_augment(const GrayImage& img, const AugmentParams& ap, int canvas_h,
                               int canvas_w) {
    return place_on_canvas(resize_nn(img, ap.out_h, ap.out_w), ap.dy, ap.dx, canvas_h, canvas_w);
}

/// Resize + shift all four rasters with one shared parameter draw. The canvas
/// is the sample's own raster size.
inline Sample augment(const Sample& sample, Rng& rng, double scale_min, double scale_max) {
    const int ch = sample.dirty.height, cw = sample.dirty.width;
    const AugmentParams ap = draw_augment(rng, scale_min, scale_max, ch, cw, ch, cw);
    Sample out = sample;
    out.clean = apply_augment(sample.clean, ap, ch, cw);
    out.artifact = apply_augment(sample.artifact, ap, ch, cw);
    out.dirty = apply_augment(sample.dirty, ap, ch, cw);
    out.mask = SegMask(apply_augment(sample.mask, ap, ch, cw));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> list_pgms(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (!fs::is_directory(dir))
        throw ConfigError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ConfigError("no .pgm files in " + dir);
    return files;
}

inline ArtifactKind pick_kind(Rng& rng, const std::map<ArtifactKind, double>& mix) {
    const double u = rng.next_double();
    double acc = 0.0;
    ArtifactKind last = ArtifactKind::Underline;
    for (ArtifactKind k : kAllKinds) {
        auto it = mix.find(k);
        if (it == mix.end() || it->second <= 0.0) continue;
        acc += it->second;
        last = k;
        if (u < acc) return k;
    }
    return last;  // u landed in the rounding tail
}

inline int thread_count() {
    if (const char* env = std::getenv("INKSTRIP_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

}  // namespace detail

/// Builds sample `index` of the configured dataset. Everything is drawn from
/// an RNG seeded by derive_seed(master_seed, index), so output is independent
/// of generation order and thread count.
inline Sample make_sample(const GenConfig& cfg, int index,
                          const std::vector<std::string>& clean_files,
                          const std::vector<std::string>& artifact_files) {
    Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(index)));
    Sample s;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "s%06d", index);
    s.id = idbuf;

    if (!clean_files.empty()) {
        const auto& path = clean_files[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(clean_files.size()) - 1))];
        GrayImage raw = binarize(pgm_read(path));
        if (raw.height != cfg.canvas_h || raw.width != cfg.canvas_w)
            raw = binarize(resize_nn(raw, cfg.canvas_h, cfg.canvas_w));
        s.clean = std::move(raw);
    } else {
        const int n_glyphs = rng.uniform_int(cfg.glyphs_min, cfg.glyphs_max);
        auto [img, transcript] = gen_pseudo_text(rng, cfg.canvas_h, cfg.canvas_w, n_glyphs);
        s.clean = std::move(img);
        s.transcript = std::move(transcript);
    }

    s.kind = detail::pick_kind(rng, cfg.kind_mix);
    std::string from_path;
    if (s.kind == ArtifactKind::FromFile)
        from_path = artifact_files[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(artifact_files.size()) - 1))];
    GrayImage art = gen_artifact(s.kind, rng, cfg.canvas_h, cfg.canvas_w, cfg.underline_jitter,
                                 from_path);

    auto bounds = cfg.offsets.find(s.kind);
    std::tie(s.dy, s.dx) = sample_offset(rng, bounds == cfg.offsets.end() ? OffsetBounds{}
                                                                          : bounds->second);
    s.artifact = translate_and_crop(binarize(art), s.dy, s.dx, s.clean.height, s.clean.width);
    s.dirty = superimpose(s.clean, s.artifact);
    s.mask = derive_mask(s.clean, s.artifact);

    if (cfg.augment) {
        Sample aug = augment(s, rng, cfg.scale_min, cfg.scale_max);
        aug.id = s.id;
        return aug;
    }
    return s;
}

/// Writes clean/, dirty/, mask/ PGM trees plus manifest.jsonl under out_dir
/// and returns the manifest path. Output bytes are a pure function of cfg.
inline std::string generate_dataset(const GenConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();

    std::vector<std::string> clean_files, artifact_files;
    if (!cfg.clean_dir.empty()) clean_files = detail::list_pgms(cfg.clean_dir);
    auto ff = cfg.kind_mix.find(ArtifactKind::FromFile);
    if (ff != cfg.kind_mix.end() && ff->second > 0.0)
        artifact_files = detail::list_pgms(cfg.artifact_dir);

    std::error_code ec;
    for (const char* sub : {"clean", "dirty", "mask"}) {
        fs::create_directories(fs::path(out_dir) / sub, ec);
        if (ec) throw IoError("generate_dataset: cannot create " + (fs::path(out_dir) / sub).string());
    }

    std::vector<Sample> samples(static_cast<std::size_t>(cfg.count));
    const int n_threads = std::min(detail::thread_count(), std::max(1, cfg.count));
    if (n_threads <= 1 || cfg.count < 2) {
        for (int i = 0; i < cfg.count; ++i)
            samples[static_cast<std::size_t>(i)] = make_sample(cfg, i, clean_files, artifact_files);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex error_mu;
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int i = t; i < cfg.count; i += n_threads)
                        samples[static_cast<std::size_t>(i)] =
                            make_sample(cfg, i, clean_files, artifact_files);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    std::ofstream manifest(manifest_path, std::ios::binary | std::ios::trunc);
    if (!manifest) throw IoError("generate_dataset: cannot open " + manifest_path);
    for (const Sample& s : samples) {
        const std::string rel_clean = "clean/" + s.id + ".pgm";
        const std::string rel_dirty = "dirty/" + s.id + ".pgm";
        const std::string rel_mask = "mask/" + s.id + ".pgm";
        pgm_write(s.clean, (fs::path(out_dir) / rel_clean).string());
        pgm_write(s.dirty, (fs::path(out_dir) / rel_dirty).string());
        pgm_write(s.mask, (fs::path(out_dir) / rel_mask).string());
        nlohmann::ordered_json line = {
            {"id", s.id},           {"clean", rel_clean}, {"dirty", rel_dirty},
            {"mask", rel_mask},     {"offset", {s.dy, s.dx}}, {"kind", kind_name(s.kind)},
        };
        if (s.transcript) line["transcript"] = *s.transcript;
        manifest << line.dump() << '\n';
    }
    if (!manifest) throw IoError("generate_dataset: write failed for " + manifest_path);
    return manifest_path;
}

// ---------------------------------------------------------------------------
// Manifest loading / validation
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string id;
    std::string clean_path, dirty_path, mask_path;  // resolved against the manifest dir
    int dy = 0, dx = 0;
    std::string kind;
    std::optional<std::string> transcript;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw IoError("load_manifest: cannot open " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_manifest: bad JSON at line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        try {
            ManifestEntry e;
            e.id = j.at("id").get<std::string>();
            e.clean_path = (base / j.at("clean").get<std::string>()).string();
            e.dirty_path = (base / j.at("dirty").get<std::string>()).string();
            e.mask_path = (base / j.at("mask").get<std::string>()).string();
            e.dy = j.at("offset").at(0).get<int>();
            e.dx = j.at("offset").at(1).get<int>();
            e.kind = j.at("kind").get<std::string>();
            if (j.contains("transcript")) e.transcript = j["transcript"].get<std::string>();
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_manifest: missing field at line " + std::to_string(line_no) +
                            ": " + e.what());
        }
    }
    return entries;
}

/// Re-validates every manifest line: rasters must be binary, share dims, and
/// satisfy dirty = min(clean, a), mask = A - A∩B, and the erase round-trip.
/// Returns the number of validated samples.
inline int validate_manifest(const std::string& manifest_path) {
    const auto entries = load_manifest(manifest_path);
    for (const auto& e : entries) {
        const GrayImage clean = pgm_read(e.clean_path);
        const GrayImage dirty = pgm_read(e.dirty_path);
        const SegMask mask(pgm_read(e.mask_path));
        if (!clean.same_dims(dirty) || !clean.same_dims(mask))
            throw DataError("validate_manifest: dimension mismatch for " + e.id);
        if (!is_binary(clean) || !is_binary(dirty) || !is_binary(mask))
            throw DataError("validate_manifest: non-binary raster for " + e.id);
        for (std::size_t i = 0; i < clean.data.size(); ++i) {
            if (dirty.data[i] > clean.data[i])
                throw DataError("validate_manifest: dirty misses clean ink in " + e.id);
            const bool mask_black = mask.data[i] == 0;
            const bool artifact_only = dirty.data[i] == 0 && clean.data[i] == 255;
            if (mask_black != artifact_only)
                throw DataError("validate_manifest: mask breaks S = A - A∩B in " + e.id);
        }
        if (!(erase_with_mask(dirty, mask) == clean))
            throw DataError("validate_manifest: erase round-trip failed for " + e.id);
    }
    return static_cast<int>(entries.size());
}

}  // namespace inkstrip

#endif
