// inkstrip: assemble dirty text images with ground-truth artifact masks,
// train a small U-net to segment the artifacts, erase them, and compare
// against a Hough line baseline. One subcommand per pipeline stage.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "inkstrip/errors.hpp"
#include "inkstrip/eval.hpp"
#include "inkstrip/gradcheck.hpp"
#include "inkstrip/hough.hpp"
#include "inkstrip/image.hpp"
#include "inkstrip/pgm.hpp"
#include "inkstrip/rng.hpp"
#include "inkstrip/synth.hpp"
#include "inkstrip/trainer.hpp"
#include "inkstrip/unet.hpp"

namespace fs = std::filesystem;
using namespace inkstrip;

namespace {

// exit codes: 0 ok, 1 check failure, 2 config, 3 I/O, 4 data, 5 checkpoint

constexpr int kCanvasH = 32;
constexpr int kCanvasW = 128;

OffsetBounds parse_bounds(const nlohmann::json& j) {
    OffsetBounds b;
    b.dy_min = j.at("dy").at(0).get<int>();
    b.dy_max = j.at("dy").at(1).get<int>();
    b.dx_min = j.at("dx").at(0).get<int>();
    b.dx_max = j.at("dx").at(1).get<int>();
    return b;
}

GenConfig parse_gen_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    GenConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "master_seed") cfg.master_seed = value.get<std::uint64_t>();
            else if (key == "count") cfg.count = value.get<int>();
            else if (key == "canvas") {
                cfg.canvas_h = value.at(0).get<int>();
                cfg.canvas_w = value.at(1).get<int>();
            } else if (key == "kind_mix") {
                cfg.kind_mix.clear();
                for (const auto& [k, p] : value.items())
                    cfg.kind_mix[kind_from_name(k)] = p.get<double>();
            } else if (key == "offsets") {
                for (const auto& [k, b] : value.items())
                    cfg.offsets[kind_from_name(k)] = parse_bounds(b);
            } else if (key == "scale_range") {
                cfg.scale_min = value.at(0).get<double>();
                cfg.scale_max = value.at(1).get<double>();
            } else if (key == "augment") cfg.augment = value.get<bool>();
            else if (key == "glyphs") {
                cfg.glyphs_min = value.at(0).get<int>();
                cfg.glyphs_max = value.at(1).get<int>();
            } else if (key == "underline_jitter") cfg.underline_jitter = value.get<int>();
            else if (key == "clean_dir") cfg.clean_dir = value.get<std::string>();
            else if (key == "artifact_dir") cfg.artifact_dir = value.get<std::string>();
            else throw ConfigError("unknown config key: " + key);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

std::vector<std::string> collect_inputs(const std::string& in) {
    std::vector<std::string> files;
    if (fs::is_directory(in)) {
        for (const auto& e : fs::directory_iterator(in))
            if (e.is_regular_file() && e.path().extension() == ".pgm")
                files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("no .pgm files in " + in);
    } else {
        files.push_back(in);
    }
    return files;
}

GrayImage read_input_image(const std::string& path) {
    try {
        return pgm_read(path);
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(std::string("unreadable image: ") + e.what());
    }
}

/// Binarize and fit onto the fixed 32x128 canvas: oversized inputs shrink
/// (nearest neighbor, aspect preserved), smaller ones are centered.
GrayImage fit_canvas(const GrayImage& raw) {
    GrayImage img = binarize(raw);
    if (img.height == kCanvasH && img.width == kCanvasW) return img;
    if (img.height > kCanvasH || img.width > kCanvasW) {
        const double scale = std::min(static_cast<double>(kCanvasH) / img.height,
                                      static_cast<double>(kCanvasW) / img.width);
        const int nh = std::max(1, static_cast<int>(img.height * scale));
        const int nw = std::max(1, static_cast<int>(img.width * scale));
        img = binarize(resize_nn(img, nh, nw));
    }
    return place_on_canvas(img, (kCanvasH - img.height) / 2, (kCanvasW - img.width) / 2,
                           kCanvasH, kCanvasW);
}

void write_outputs(const std::string& out_dir, const std::string& stem, const GrayImage& cleaned,
                   const SegMask& mask) {
    fs::create_directories(out_dir);
    pgm_write(cleaned, (fs::path(out_dir) / (stem + ".clean.pgm")).string());
    pgm_write(mask, (fs::path(out_dir) / (stem + ".mask.pgm")).string());
}

std::string input_stem(const std::string& path) {
    std::string stem = fs::path(path).stem().string();
    // strip a trailing .clean / .dirty marker so ids keep pairing
    const auto dot = stem.find('.');
    return dot == std::string::npos ? stem : stem.substr(0, dot);
}

// ---------------------------------------------------------------------------

int cmd_gen(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, std::optional<int> count, bool augment,
            std::optional<int> jitter) {
    GenConfig cfg;
    if (!config_path.empty()) cfg = parse_gen_config(config_path);
    if (seed) cfg.master_seed = *seed;
    if (count) cfg.count = *count;
    if (augment) cfg.augment = true;
    if (jitter) cfg.underline_jitter = *jitter;
    const std::string manifest = generate_dataset(cfg, out_dir);

    std::map<std::string, int> kind_counts;
    for (const auto& e : load_manifest(manifest)) ++kind_counts[e.kind];
    std::cout << "manifest: " << manifest << "\n";
    std::cout << "samples: " << cfg.count << "\n";
    for (const auto& [kind, n] : kind_counts)
        std::cout << "  " << kind << ": " << n << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& out_ckpt, int iters, double lr,
              int batch, std::uint64_t seed, double split, bool augment, int channels,
              const std::string& history_path, bool save_rms, const std::string& resume,
              int eval_every) {
    std::vector<TrainSample> all;
    try {
        all = load_training_set(manifest);
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(std::string("bad manifest: ") + e.what());
    }
    auto [train_set, heldout] = split_train_val(std::move(all), split, seed);
    std::cout << "train/val split: " << train_set.size() << "/" << heldout.size() << "\n";

    UNetParams<float> params;
    if (!resume.empty()) {
        params = load_checkpoint(resume, channels);
    } else {
        Rng init_rng(derive_seed(seed, 0));
        params = init_params<float>(init_rng, channels);
    }

    TrainConfig cfg;
    cfg.lr = lr;
    cfg.batch_size = batch;
    cfg.iterations = iters;
    cfg.seed = seed;
    cfg.augment = augment;
    cfg.eval_every = eval_every;
    const TrainHistory history = train(params, train_set, heldout, cfg);

    save_checkpoint(params, out_ckpt, save_rms);
    const std::string hist = history_path.empty() ? out_ckpt + ".history.csv" : history_path;
    write_history_csv(history, hist);
    std::cout << "checkpoint: " << out_ckpt << "\n";
    std::cout << "history: " << hist << "\n";
    if (!history.heldout_seg_error.empty())
        std::cout << "final held-out seg error: " << history.heldout_seg_error.back().second
                  << "%\n";
    else if (!heldout.empty())
        std::cout << "final held-out seg error: " << mean_seg_error(params, heldout) << "%\n";
    return 0;
}

UNetParams<float> load_checkpoint_or_die(const std::string& path) {
    try {
        return load_checkpoint(path);
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(CheckpointError::Kind::BadFormat,
                              std::string("bad checkpoint: ") + e.what());
    }
}

int cmd_erase(const std::string& ckpt, const std::string& in, const std::string& out_dir) {
    const UNetParams<float> params = load_checkpoint_or_die(ckpt);
    const auto inputs = collect_inputs(in);
    for (const std::string& path : inputs) {
        const GrayImage img = fit_canvas(read_input_image(path));
        const SegMask mask = predict_mask(params, img);
        const GrayImage cleaned = erase_with_mask(img, mask);
        write_outputs(out_dir, input_stem(path), cleaned, mask);
    }
    std::cout << "erased " << inputs.size() << " image(s) into " << out_dir << "\n";
    return 0;
}

int cmd_hough(const std::string& in, const std::string& out_dir, double thresh_frac,
              double thickness) {
    const auto inputs = collect_inputs(in);
    for (const std::string& path : inputs) {
        const GrayImage img = binarize(read_input_image(path));
        const int threshold = std::max(1, static_cast<int>(thresh_frac * img.width));
        const auto lines = hough_lines(img, threshold);
        auto [cleaned, mask] = erase_lines(img, lines, thickness);
        write_outputs(out_dir, input_stem(path), cleaned, mask);
    }
    std::cout << "processed " << inputs.size() << " image(s) into " << out_dir << "\n";
    return 0;
}

/// Pair ids to mask paths: `<id>.mask.pgm` preferred, plain `<id>.pgm` accepted.
std::map<std::string, std::string> mask_files_by_id(const std::string& dir) {
    std::map<std::string, std::string> by_id;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm")
            files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const auto& name : files) {
        const std::string stem = name.substr(0, name.size() - 4);  // drop .pgm
        if (stem.ends_with(".mask")) {
            by_id[stem.substr(0, stem.size() - 5)] = (fs::path(dir) / name).string();
        } else if (stem.find('.') == std::string::npos && !by_id.count(stem)) {
            by_id[stem] = (fs::path(dir) / name).string();
        }
    }
    if (by_id.empty()) throw DataError("no mask rasters in " + dir);
    return by_id;
}

int cmd_eval_seg(const std::string& pred_dir, const std::string& truth_dir,
                 const std::string& out_path) {
    const auto pred = mask_files_by_id(pred_dir);
    const auto truth = mask_files_by_id(truth_dir);
    std::vector<std::string> orphans;
    for (const auto& [id, _] : pred)
        if (!truth.count(id)) orphans.push_back(id + " (pred only)");
    for (const auto& [id, _] : truth)
        if (!pred.count(id)) orphans.push_back(id + " (truth only)");
    if (!orphans.empty()) {
        std::string msg = "unpaired ids:";
        for (const auto& o : orphans) msg += " " + o;
        throw DataError(msg);
    }
    std::vector<EvalRow> rows;
    for (const auto& [id, pred_path] : pred) {
        EvalRow row;
        row.id = id;
        row.seg_error = seg_error(SegMask(pgm_read(pred_path)), SegMask(pgm_read(truth.at(id))));
        rows.push_back(std::move(row));
    }
    const EvalReport rep = aggregate_rows(std::move(rows));
    if (!out_path.empty()) emit_report(rep, out_path);
    std::cout << report_to_json(rep).dump(2) << "\n";
    return 0;
}

EvalReport recognize_set(const std::string& recognizer,
                         const std::vector<std::pair<std::string, std::string>>& id_path,
                         const std::map<std::string, std::string>& truths) {
    std::vector<std::string> paths;
    for (const auto& [id, path] : id_path) paths.push_back(path);
    const auto outputs = run_recognizer(recognizer, paths);
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < id_path.size(); ++i) {
        EvalRow row;
        row.id = id_path[i].first;
        const std::string& truth = truths.at(row.id);
        row.truth_len = static_cast<long>(truth.size());
        if (!outputs[i].ok) {
            row.excluded = true;
        } else {
            row.edit_distance = edit_distance(outputs[i].transcript, truth);
            row.match = outputs[i].transcript == truth;
        }
        rows.push_back(std::move(row));
    }
    return aggregate_rows(std::move(rows));
}

int cmd_eval_rec(const std::string& recognizer, const std::string& images_dir,
                 const std::string& manifest, const std::string& out_path) {
    const auto entries = load_manifest(manifest);
    std::map<std::string, std::string> truths;
    std::vector<std::pair<std::string, std::string>> dirty_set, cleaned_set;
    for (const auto& e : entries) {
        if (!e.transcript) continue;
        truths[e.id] = *e.transcript;
        dirty_set.push_back({e.id, e.dirty_path});
        const fs::path cleaned = fs::path(images_dir) / (e.id + ".clean.pgm");
        if (fs::exists(cleaned)) cleaned_set.push_back({e.id, cleaned.string()});
    }
    if (truths.empty()) throw DataError("manifest has no transcripts to score against");
    if (cleaned_set.empty()) throw DataError("no cleaned images matching manifest ids in " + images_dir);

    nlohmann::ordered_json j;
    j["recognizer"] = recognizer;
    j["dirty"] = report_to_json(recognize_set(recognizer, dirty_set, truths));
    j["cleaned"] = report_to_json(recognize_set(recognizer, cleaned_set, truths));
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::trunc);
        if (!f) throw IoError("cannot open " + out_path);
        f << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& precision, std::uint64_t seed) {
    if (precision != "wide" && precision != "standard")
        throw ConfigError("--precision must be wide or standard");
    const auto rows = precision == "wide" ? grad_check_all<double>(seed)
                                          : grad_check_all<float>(seed);
    bool all_ok = true;
    for (const auto& row : rows) {
        std::printf("%-24s max_rel_err=%.3e threshold=%.0e %s\n", row.layer.c_str(),
                    row.max_rel_err, row.threshold, row.ok() ? "OK" : "FAIL");
        all_ok = all_ok && row.ok();
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inkstrip: weakly supervised ink artifact removal pipeline"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dirty/mask dataset");
    std::string gen_config, gen_out;
    std::optional<std::uint64_t> gen_seed;
    std::optional<int> gen_count, gen_jitter;
    bool gen_augment = false;
    gen->add_option("--config", gen_config, "JSON config file");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "master seed (overrides config)");
    gen->add_option("--count", gen_count, "sample count (overrides config)");
    gen->add_flag("--augment", gen_augment, "augment each sample after assembly");
    gen->add_option("--jitter", gen_jitter, "underline jitter in px");

    // train
    auto* tr = app.add_subcommand("train", "train the segmentation net on a manifest");
    std::string tr_manifest, tr_out, tr_history, tr_resume;
    int tr_iters = 500, tr_batch = 16, tr_channels = 16, tr_eval_every = 50;
    double tr_lr = 1e-3, tr_split = 0.9;
    std::uint64_t tr_seed = 0;
    bool tr_augment = false, tr_save_rms = false;
    tr->add_option("--manifest", tr_manifest, "manifest.jsonl path")->required();
    tr->add_option("--out", tr_out, "checkpoint output path")->required();
    tr->add_option("--iters", tr_iters, "training iterations");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--seed", tr_seed, "seed for split, init, and batching");
    tr->add_option("--split", tr_split, "train fraction (rest held out)");
    tr->add_flag("--augment", tr_augment, "apply train-time augmentation");
    tr->add_option("--channels", tr_channels, "base channel count C");
    tr->add_option("--history", tr_history, "history CSV path");
    tr->add_flag("--save-rms", tr_save_rms, "embed RMSProp accumulators for --resume");
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");
    tr->add_option("--eval-every", tr_eval_every, "held-out eval cadence (iterations)");

    // erase
    auto* er = app.add_subcommand("erase", "predict masks and erase artifacts");
    std::string er_ckpt, er_in, er_out;
    er->add_option("--ckpt", er_ckpt, "checkpoint path")->required();
    er->add_option("--in", er_in, "input image or directory")->required();
    er->add_option("--out", er_out, "output directory")->required();

    // hough
    auto* ho = app.add_subcommand("hough", "Hough-transform line erasure baseline");
    std::string ho_in, ho_out;
    double ho_thresh = 0.4, ho_thickness = 3.0;
    ho->add_option("--in", ho_in, "input image or directory")->required();
    ho->add_option("--out", ho_out, "output directory")->required();
    ho->add_option("--thresh", ho_thresh, "vote threshold as a fraction of image width");
    ho->add_option("--thickness", ho_thickness, "erase band thickness in px");

    // eval-seg
    auto* es = app.add_subcommand("eval-seg", "segmentation error between mask directories");
    std::string es_pred, es_truth, es_out;
    es->add_option("--pred", es_pred, "predicted masks directory")->required();
    es->add_option("--truth", es_truth, "ground truth masks directory")->required();
    es->add_option("--out", es_out, "write report JSON here as well");

    // eval-rec
    auto* ev = app.add_subcommand("eval-rec", "recognizer CER/WER on dirty vs cleaned images");
    std::string ev_rec, ev_images, ev_manifest, ev_out;
    ev->add_option("--recognizer", ev_rec, "command template with {path}")->required();
    ev->add_option("--images", ev_images, "directory of cleaned images (<id>.clean.pgm)")->required();
    ev->add_option("--manifest", ev_manifest, "manifest with ground-truth transcripts")->required();
    ev->add_option("--out", ev_out, "write report JSON here as well");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer");
    std::string gc_precision = "wide";
    std::uint64_t gc_seed = 1;
    gc->add_option("--precision", gc_precision, "wide (double) or standard (float)");
    gc->add_option("--seed", gc_seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_config, gen_out, gen_seed, gen_count, gen_augment, gen_jitter);
        if (tr->parsed())
            return cmd_train(tr_manifest, tr_out, tr_iters, tr_lr, tr_batch, tr_seed, tr_split,
                             tr_augment, tr_channels, tr_history, tr_save_rms, tr_resume,
                             tr_eval_every);
        if (er->parsed()) return cmd_erase(er_ckpt, er_in, er_out);
        if (ho->parsed()) return cmd_hough(ho_in, ho_out, ho_thresh, ho_thickness);
        if (es->parsed()) return cmd_eval_seg(es_pred, es_truth, es_out);
        if (ev->parsed()) return cmd_eval_rec(ev_rec, ev_images, ev_manifest, ev_out);
        if (gc->parsed()) return cmd_gradcheck(gc_precision, gc_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 5;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
