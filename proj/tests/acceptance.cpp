// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Everything runs on procedural data with pinned seeds and thresholds.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "inkstrip/eval.hpp"
#include "inkstrip/gradcheck.hpp"
#include "inkstrip/hough.hpp"
#include "inkstrip/image.hpp"
#include "inkstrip/rng.hpp"
#include "inkstrip/synth.hpp"
#include "inkstrip/trainer.hpp"
#include "inkstrip/unet.hpp"

using namespace inkstrip;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(const std::string& id, bool pass, const std::string& detail, double seconds) {
    std::printf("[%s] %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

fs::path work_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "inkstrip_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string file_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return "<missing " + path.string() + ">";
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[fs::relative(e.path(), root).string()] = file_bytes(e.path());
    return out;
}

int run_cli(const std::string& env, const std::string& args) {
    const std::string cmd = env + (env.empty() ? "" : " ") + INKSTRIP_CLI_PATH + " " + args +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status == -1 ? -1 : (WIFEXITED(status) ? WEXITSTATUS(status) : -1);
}

/// The A3/A4 dataset recipe: all four artifact kinds, with the underline
/// offset band widened to [14, 31] so strike-through underlines are a
/// regular event in training, not a rarity.
GenConfig a3_config() {
    GenConfig cfg;
    cfg.count = 450;
    cfg.master_seed = 20260808;
    cfg.offsets[ArtifactKind::Underline] = {14, 31, -16, 16};
    return cfg;
}

/// Full-width jitter-free underline samples for the Hough comparison.
/// dy in [27, 29] keeps the line clear of every glyph; [14, 20] strikes
/// through the glyph bodies.
Sample underline_sample(std::uint64_t seed, int dy_lo, int dy_hi) {
    Rng rng(seed);
    const int n_glyphs = rng.uniform_int(4, 10);
    auto [clean, transcript] = gen_pseudo_text(rng, 32, 128, n_glyphs);
    GrayImage art(32, 128, 255);
    draw::underline(art, 0, 0, 127, rng.uniform_int(1, 2));
    const int dy = rng.uniform_int(dy_lo, dy_hi);
    Sample s;
    s.clean = clean;
    s.artifact = translate_and_crop(art, dy, 0, 32, 128);
    s.dirty = superimpose(s.clean, s.artifact);
    s.mask = derive_mask(s.clean, s.artifact);
    s.dy = dy;
    return s;
}

// --------------------------------------------------------------------------

void a1_round_trip() {
    Timer timer;
    GenConfig cfg;
    cfg.master_seed = 10101;
    std::size_t mismatched = 0;
    std::set<ArtifactKind> kinds_seen;
    for (int i = 0; i < 1000; ++i) {
        const Sample s = make_sample(cfg, i, {}, {});
        kinds_seen.insert(s.kind);
        const GrayImage restored = erase_with_mask(s.dirty, s.mask);
        for (std::size_t p = 0; p < restored.data.size(); ++p)
            if (restored.data[p] != s.clean.data[p]) ++mismatched;
    }
    const double sec = timer.seconds();
    const bool pass = mismatched == 0 && kinds_seen.size() == 4 && sec < 5.0;
    report("A1 round-trip exactness", pass,
           "1000 samples, " + std::to_string(mismatched) + " mismatched pixels, " +
               std::to_string(kinds_seen.size()) + "/4 kinds",
           sec);
}

void a2_gradients() {
    Timer timer;
    bool pass = true;
    std::string detail;
    for (const auto& row : grad_check_all<double>(20260808)) {
        pass = pass && row.ok();
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s %.1e%s", row.layer.c_str(), row.max_rel_err,
                      row.ok() ? "" : "(!)");
        detail += (detail.empty() ? "" : ", ") + std::string(buf);
    }
    const double sec = timer.seconds();
    pass = pass && sec < 60.0;
    report("A2 gradient correctness", pass, detail, sec);
}

struct A3Result {
    UNetParams<float> params;
    double heldout_err = 1e9;
    bool pass = false;
};

A3Result a3_desk_training() {
    Timer timer;
    const GenConfig cfg = a3_config();
    std::vector<TrainSample> all;
    for (int i = 0; i < cfg.count; ++i) {
        const Sample s = make_sample(cfg, i, {}, {});
        all.push_back({s.id, s.dirty, s.mask});
    }
    auto [train_set, heldout] = split_train_val(std::move(all), 0.9, 42);

    // trivial all-not-artifact baseline on the same split
    double trivial = 0.0;
    for (const auto& s : heldout)
        trivial += 100.0 * static_cast<double>(count_black(s.mask)) /
                   static_cast<double>(s.mask.pixel_count());
    trivial /= static_cast<double>(heldout.size());

    A3Result result;
    Rng init_rng(derive_seed(42, 0));
    result.params = init_params<float>(init_rng, 16);
    TrainConfig tc;
    tc.iterations = 500;  // well under the 2000-iteration ceiling; pixel
                          // error starts drifting up past ~600 as the
                          // weighted loss trades precision for recall
    tc.batch_size = 8;
    tc.lr = 1e-3;
    tc.seed = 42;
    tc.eval_every = 250;
    const TrainHistory history = train(result.params, train_set, heldout, tc);

    double initial = 0.0, final = 0.0;
    for (int i = 0; i < 10; ++i) {
        initial += history.loss[static_cast<std::size_t>(i)];
        final += history.loss[history.loss.size() - 1 - static_cast<std::size_t>(i)];
    }
    initial /= 10.0;
    final /= 10.0;
    result.heldout_err = history.heldout_seg_error.back().second;

    const double sec = timer.seconds();
    const bool err_ok = result.heldout_err <= 10.0;
    const bool ratio_ok = result.heldout_err <= 0.6 * trivial;
    const bool loss_ok = final <= 0.5 * initial;
    result.pass = err_ok && ratio_ok && loss_ok && sec <= 30.0 * 60.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "450 samples 405/45, 500 iters: heldout %.2f%% (<=10%s), trivial %.2f%% ratio "
                  "%.2f (<=0.6%s), loss %.3f->%.3f (<=0.5x%s)",
                  result.heldout_err, err_ok ? "" : "!", trivial, result.heldout_err / trivial,
                  ratio_ok ? "" : "!", initial, final, loss_ok ? "" : "!");
    report("A3 desk-scale learning", result.pass, buf, sec);
    return result;
}

void a4_hough_characterization(const A3Result& a3) {
    Timer timer;
    const int vote_threshold = static_cast<int>(0.4 * 128);
    const double thickness = 3.0;

    double hough_clear = 0.0;
    int detected = 0;
    for (int i = 0; i < 100; ++i) {
        const Sample s = underline_sample(derive_seed(555, static_cast<std::uint64_t>(i)), 27, 29);
        const auto lines = hough_lines(s.dirty, vote_threshold);
        if (!lines.empty()) ++detected;
        auto [cleaned, mask] = erase_lines(s.dirty, lines, thickness);
        hough_clear += seg_error(mask, s.mask);
    }
    hough_clear /= 100.0;

    double hough_overlap = 0.0, model_overlap = 0.0;
    bool containment = true;
    for (int i = 0; i < 100; ++i) {
        const Sample s = underline_sample(derive_seed(777, static_cast<std::uint64_t>(i)), 14, 20);
        const auto lines = hough_lines(s.dirty, vote_threshold);
        auto [cleaned, mask] = erase_lines(s.dirty, lines, thickness);
        hough_overlap += seg_error(mask, s.mask);
        model_overlap += seg_error(predict_mask(a3.params, s.dirty), s.mask);
        // the hough mask must contain every text-overlap pixel of a detected
        // line: that over-erasure is the documented failure mode
        for (int r = 0; r < 32 && containment; ++r)
            for (int c = 0; c < 128 && containment; ++c) {
                if (s.artifact.at(r, c) != 0 || s.clean.at(r, c) != 0) continue;  // not A∩B
                for (const auto& line : lines) {
                    const double rad = line.theta_deg * 3.14159265358979323846 / 180.0;
                    if (std::fabs(c * std::cos(rad) + r * std::sin(rad) - line.rho) <=
                        thickness / 2.0) {
                        if (mask.at(r, c) != 0) containment = false;
                        break;
                    }
                }
            }
    }
    hough_overlap /= 100.0;
    model_overlap /= 100.0;

    const double sec = timer.seconds();
    const bool clear_ok = hough_clear <= 1.0 && detected == 100;
    const bool beats_ok = hough_overlap > model_overlap;
    const bool pass = clear_ok && beats_ok && containment && sec < 60.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "clear lines: hough %.3f%% (<=1%s, %d/100 detected); overlap: hough %.3f%% > "
                  "model %.3f%%%s; A∩B containment %s",
                  hough_clear, clear_ok ? "" : "!", detected, hough_overlap, model_overlap,
                  beats_ok ? "" : " VIOLATED", containment ? "holds" : "VIOLATED");
    report("A4 Hough characterization", pass, buf, sec);
}

// exhaustive-search oracle with a shared-prefix fast path
long oracle_distance(std::string_view a, std::string_view b) {
    while (!a.empty() && !b.empty() && a.front() == b.front()) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    if (a.empty()) return static_cast<long>(b.size());
    if (b.empty()) return static_cast<long>(a.size());
    const long replace = oracle_distance(a.substr(1), b.substr(1));
    const long insert = oracle_distance(a, b.substr(1));
    const long erase = oracle_distance(a.substr(1), b);
    return 1 + std::min({replace, insert, erase});
}

void a5_metric_fidelity() {
    Timer timer;
    std::vector<std::string> strings = {""};
    // all strings of length <= 6 over {a, b, c}
    std::size_t level_start = 0;
    for (int len = 1; len <= 6; ++len) {
        const std::size_t level_end = strings.size();
        for (std::size_t i = level_start; i < level_end; ++i)
            for (char ch : {'a', 'b', 'c'}) strings.push_back(strings[i] + ch);
        level_start = level_end;
    }
    long checked = 0, wrong = 0;
    for (const auto& a : strings)
        for (const auto& b : strings) {
            if (edit_distance(a, b) != oracle_distance(a, b)) ++wrong;
            ++checked;
        }
    const bool cer_exact = cer("hallo", "hello") == 20.0;
    const bool cer_over_100 = cer("cdcdcd", "ab") > 100.0;
    const double sec = timer.seconds();
    const bool pass = wrong == 0 && cer_exact && cer_over_100 && sec < 30.0;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%ld pairs vs oracle, %ld wrong; CER(hallo,hello)=%.1f; CER>100 legal: %.1f",
                  checked, wrong, cer("hallo", "hello"), cer("cdcdcd", "ab"));
    report("A5 metric fidelity", pass, buf, sec);
}

void a6_balancing_identity() {
    Timer timer;
    Rng rng(606060);
    bool identity_ok = true, order_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<SegMask> masks;
        double c0 = 0, c1 = 0, d0 = 0, d1 = 0;
        const int n_masks = rng.uniform_int(1, 6);
        for (int m = 0; m < n_masks; ++m) {
            const int h = rng.uniform_int(2, 16), w = rng.uniform_int(2, 16);
            SegMask mask(h, w, 255);
            for (auto& p : mask.data)
                if (rng.bernoulli(rng.uniform_real(0.02, 0.9))) p = 0;
            const auto black = count_black(mask);
            c1 += static_cast<double>(black);
            c0 += static_cast<double>(mask.pixel_count() - black);
            if (black > 0) d1 += static_cast<double>(mask.pixel_count());
            if (black < mask.pixel_count()) d0 += static_cast<double>(mask.pixel_count());
            masks.push_back(std::move(mask));
        }
        if (c0 == 0 || c1 == 0) continue;
        const auto w = median_freq_weights(masks);
        const double f0 = c0 / d0, f1 = c1 / d1;
        if (std::fabs(w[0] * f0 - w[1] * f1) > 1e-12) identity_ok = false;
        if (f1 < f0 && !(w[1] > w[0])) order_ok = false;
        if (f0 < f1 && !(w[0] > w[1])) order_ok = false;
    }
    const double sec = timer.seconds();
    report("A6 balancing identity", identity_ok && order_ok,
           std::string("w0*f0 == w1*f1 within 1e-12 ") + (identity_ok ? "holds" : "VIOLATED") +
               "; rarer class heavier " + (order_ok ? "holds" : "VIOLATED"),
           sec);
}

void a7_determinism() {
    Timer timer;
    const auto dir = work_dir("a7");
    bool pass = true;
    std::string detail;

    const std::string gen_args = "gen --count 40 --seed 20260808 --out ";
    pass = pass && run_cli("INKSTRIP_THREADS=1", gen_args + (dir / "g1").string()) == 0;
    pass = pass && run_cli("INKSTRIP_THREADS=1", gen_args + (dir / "g2").string()) == 0;
    pass = pass && run_cli("INKSTRIP_THREADS=4", gen_args + (dir / "g4").string()) == 0;
    const bool gen_ok = pass && tree_bytes(dir / "g1") == tree_bytes(dir / "g2") &&
                        tree_bytes(dir / "g1") == tree_bytes(dir / "g4");
    detail += std::string("gen ") + (gen_ok ? "identical" : "DIFFERS");

    const std::string manifest = (dir / "g1" / "manifest.jsonl").string();
    const std::string train_args = "train --manifest " + manifest +
                                   " --iters 5 --batch 4 --channels 4 --seed 9 --out ";
    pass = pass && run_cli("INKSTRIP_THREADS=1", train_args + (dir / "t1.ckpt").string()) == 0;
    pass = pass && run_cli("INKSTRIP_THREADS=4", train_args + (dir / "t2.ckpt").string()) == 0;
    const bool train_ok =
        pass && file_bytes(dir / "t1.ckpt") == file_bytes(dir / "t2.ckpt");
    detail += std::string(", train ") + (train_ok ? "identical" : "DIFFERS");

    const std::string erase_args = "erase --ckpt " + (dir / "t1.ckpt").string() + " --in " +
                                   (dir / "g1" / "dirty").string() + " --out ";
    pass = pass && run_cli("INKSTRIP_THREADS=1", erase_args + (dir / "e1").string()) == 0;
    pass = pass && run_cli("INKSTRIP_THREADS=4", erase_args + (dir / "e2").string()) == 0;
    const bool erase_ok = pass && tree_bytes(dir / "e1") == tree_bytes(dir / "e2");
    detail += std::string(", erase ") + (erase_ok ? "identical" : "DIFFERS");

    report("A7 determinism", gen_ok && train_ok && erase_ok, detail, timer.seconds());
}

/// Dirty-vs-cleaned recognition stand-in: a stub recognizer that echoes the
/// ground-truth transcript must score WER 0 on both columns, which pins the
/// report schema and the id pairing logic.
void stub_recognizer_standin() {
    Timer timer;
    const auto dir = work_dir("standin");
    bool pass = run_cli("", "gen --count 10 --seed 31 --out " + (dir / "ds").string()) == 0;

    const auto stub = dir / "stub.sh";
    {
        std::ofstream f(stub);
        f << "#!/bin/sh\n"
          << "id=$(basename \"$1\"); id=${id%%.*}\n"
          << "line=$(grep \"\\\"id\\\":\\\"$id\\\"\" " << (dir / "ds" / "manifest.jsonl").string()
          << ")\n"
          << "t=${line##*\\\"transcript\\\":\\\"}\n"
          << "t=${t%%\\\"*}\n"
          << "echo \"$t\"\n";
    }
    fs::permissions(stub, fs::perms::owner_all);

    pass = pass && run_cli("", "train --manifest " + (dir / "ds" / "manifest.jsonl").string() +
                                   " --iters 0 --channels 2 --out " + (dir / "m.ckpt").string()) == 0;
    pass = pass && run_cli("", "erase --ckpt " + (dir / "m.ckpt").string() + " --in " +
                                   (dir / "ds" / "dirty").string() + " --out " +
                                   (dir / "cleaned").string()) == 0;
    pass = pass && run_cli("", "eval-rec --recognizer '" + stub.string() + " {path}' --images " +
                                   (dir / "cleaned").string() + " --manifest " +
                                   (dir / "ds" / "manifest.jsonl").string() + " --out " +
                                   (dir / "rec.json").string()) == 0;
    double dirty_wer = -1.0, cleaned_wer = -1.0;
    if (pass) {
        std::ifstream f((dir / "rec.json").string());
        const nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        pass = !j.is_discarded();
        if (pass) {
            dirty_wer = j.at("dirty").at("wer_pct").get<double>();
            cleaned_wer = j.at("cleaned").at("wer_pct").get<double>();
            pass = dirty_wer == 0.0 && cleaned_wer == 0.0;
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "stub WER dirty %.1f%%, cleaned %.1f%%", dirty_wer, cleaned_wer);
    report("Stub-recognizer stand-in", pass, buf, timer.seconds());
}

}  // namespace

int main() {
    a1_round_trip();
    a2_gradients();
    const A3Result a3 = a3_desk_training();
    a4_hough_characterization(a3);
    a5_metric_fidelity();
    a6_balancing_identity();
    a7_determinism();
    stub_recognizer_standin();
    std::printf("%s\n", g_failures == 0 ? "ACCEPTANCE: all criteria passed"
                                        : "ACCEPTANCE: FAILURES PRESENT");
    return g_failures == 0 ? 0 : 1;
}
