#ifndef INKSTRIP_EVAL_HPP
#define INKSTRIP_EVAL_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "inkstrip/errors.hpp"
#include "inkstrip/image.hpp"

namespace inkstrip {

/// Percent of pixels where the two masks disagree.
inline double seg_error(const SegMask& pred, const SegMask& truth) {
    if (!pred.same_dims(truth))
        throw DimensionError("seg_error: dimension mismatch");
    std::size_t mismatch = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        if (pred.data[i] != truth.data[i]) ++mismatch;
    return 100.0 * static_cast<double>(mismatch) / static_cast<double>(pred.pixel_count());
}

/// Levenshtein distance with unit add/delete/replace costs.
inline long edit_distance(std::string_view a, std::string_view b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<long> prev(n + 1), cur(n + 1);
    for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<long>(j);
    for (std::size_t i = 0; i < m; ++i) {
        cur[0] = static_cast<long>(i) + 1;
        for (std::size_t j = 0; j < n; ++j)
            cur[j + 1] = std::min({prev[j + 1] + 1, cur[j] + 1, prev[j] + (a[i] == b[j] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[n];
}

/// Character error rate, percent; exceeds 100 when the prediction is far
/// longer than the truth.
inline double cer(std::string_view pred, std::string_view truth) {
    if (truth.empty())
        throw DataError("cer: empty ground truth");
    return 100.0 * static_cast<double>(edit_distance(pred, truth)) /
           static_cast<double>(truth.size());
}

/// Corpus CER: distances pooled over pooled truth length.
inline double corpus_cer(const std::vector<std::pair<std::string, std::string>>& pairs) {
    long dist = 0, len = 0;
    for (const auto& [pred, truth] : pairs) {
        dist += edit_distance(pred, truth);
        len += static_cast<long>(truth.size());
    }
    if (len == 0)
        throw DataError("corpus_cer: no ground-truth characters");
    return 100.0 * static_cast<double>(dist) / static_cast<double>(len);
}

/// Word error rate: percent of pairs whose strings differ at all.
inline double wer(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty())
        throw DataError("wer: empty input");
    std::size_t wrong = 0;
    for (const auto& [pred, truth] : pairs)
        if (pred != truth) ++wrong;
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// External recognizer adapter. The command template substitutes {path}; the
// first trimmed stdout line is the transcript. A nonzero exit or empty output
// marks the image as failed and the sample is excluded (and counted).
// ---------------------------------------------------------------------------

struct RecognizerOutput {
    bool ok = false;
    std::string transcript;
    std::string error;
};

namespace detail {

inline std::string substitute_path(const std::string& tmpl, const std::string& path) {
    std::string out;
    std::size_t pos = 0;
    bool replaced = false;
    while (true) {
        const std::size_t hit = tmpl.find("{path}", pos);
        if (hit == std::string::npos) break;
        out += tmpl.substr(pos, hit - pos);
        out += "'" + path + "'";  // paths with single quotes are not supported
        pos = hit + 6;
        replaced = true;
    }
    out += tmpl.substr(pos);
    if (!replaced)
        throw ConfigError("recognizer command template lacks {path}");
    return out;
}

inline std::string trim(std::string s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && is_space(static_cast<unsigned char>(s[start]))) ++start;
    return s.substr(start);
}

}  // namespace detail

inline std::vector<RecognizerOutput> run_recognizer(const std::string& command_template,
                                                    const std::vector<std::string>& image_paths) {
    std::vector<RecognizerOutput> out;
    out.reserve(image_paths.size());
    for (const std::string& path : image_paths) {
        RecognizerOutput r;
        const std::string cmd = detail::substitute_path(command_template, path);
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) {
            r.error = "popen failed";
            out.push_back(std::move(r));
            continue;
        }
        std::string captured;
        char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) captured.append(buf, got);
        const int status = ::pclose(pipe);
        if (status != 0) {
            r.error = "nonzero exit status " + std::to_string(status);
        } else if (captured.empty()) {
            r.error = "no output";
        } else {
            const std::size_t nl = captured.find('\n');
            r.transcript = detail::trim(nl == std::string::npos ? captured : captured.substr(0, nl));
            r.ok = true;
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregated report
// ---------------------------------------------------------------------------

struct EvalRow {
    std::string id;
    double seg_error = -1.0;   // < 0 when not measured
    long edit_distance = -1;   // < 0 when not measured
    long truth_len = 0;
    bool match = false;
    bool excluded = false;
};

struct EvalReport {
    int n_samples = 0;
    int n_excluded = 0;
    double seg_error_pct = -1.0;
    double cer_pct = -1.0;
    double wer_pct = -1.0;
    std::vector<EvalRow> rows;
};

/// Recomputes the aggregates from the rows (excluded rows do not count).
inline EvalReport aggregate_rows(std::vector<EvalRow> rows) {
    EvalReport rep;
    rep.rows = std::move(rows);
    double seg_total = 0.0;
    long seg_n = 0, dist_total = 0, len_total = 0, rec_n = 0, wrong = 0;
    for (const EvalRow& r : rep.rows) {
        if (r.excluded) {
            ++rep.n_excluded;
            continue;
        }
        ++rep.n_samples;
        if (r.seg_error >= 0.0) {
            seg_total += r.seg_error;
            ++seg_n;
        }
        if (r.edit_distance >= 0) {
            dist_total += r.edit_distance;
            len_total += r.truth_len;
            ++rec_n;
            if (!r.match) ++wrong;
        }
    }
    if (seg_n > 0) rep.seg_error_pct = seg_total / static_cast<double>(seg_n);
    if (rec_n > 0 && len_total > 0)
        rep.cer_pct = 100.0 * static_cast<double>(dist_total) / static_cast<double>(len_total);
    if (rec_n > 0) rep.wer_pct = 100.0 * static_cast<double>(wrong) / static_cast<double>(rec_n);
    return rep;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& rep) {
    nlohmann::ordered_json j;
    j["n_samples"] = rep.n_samples;
    j["n_excluded"] = rep.n_excluded;
    j["seg_error_pct"] = rep.seg_error_pct < 0.0 ? nlohmann::ordered_json(nullptr)
                                                 : nlohmann::ordered_json(rep.seg_error_pct);
    j["cer_pct"] = rep.cer_pct < 0.0 ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(rep.cer_pct);
    j["wer_pct"] = rep.wer_pct < 0.0 ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(rep.wer_pct);
    j["rows"] = nlohmann::ordered_json::array();
    for (const EvalRow& r : rep.rows) {
        nlohmann::ordered_json row;
        row["id"] = r.id;
        row["seg_error"] = r.seg_error < 0.0 ? nlohmann::ordered_json(nullptr)
                                             : nlohmann::ordered_json(r.seg_error);
        row["edit_distance"] = r.edit_distance < 0 ? nlohmann::ordered_json(nullptr)
                                                   : nlohmann::ordered_json(r.edit_distance);
        row["truth_len"] = r.truth_len;
        row["match"] = r.match;
        row["excluded"] = r.excluded;
        j["rows"].push_back(std::move(row));
    }
    return j;
}

/// Writes the report as JSON after re-deriving the aggregates from the rows;
/// a disagreement means the report was tampered with and is refused.
inline void emit_report(const EvalReport& rep, const std::string& path) {
    if (rep.rows.empty())
        throw DataError("emit_report: no rows");
    const EvalReport recomputed = aggregate_rows(rep.rows);
    const auto near = [](double a, double b) {
        return (a < 0.0 && b < 0.0) || std::fabs(a - b) < 1e-9;
    };
    if (recomputed.n_samples != rep.n_samples || recomputed.n_excluded != rep.n_excluded ||
        !near(recomputed.seg_error_pct, rep.seg_error_pct) ||
        !near(recomputed.cer_pct, rep.cer_pct) || !near(recomputed.wer_pct, rep.wer_pct))
        throw DataError("emit_report: aggregates do not match rows");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("emit_report: cannot open " + path);
    f << report_to_json(rep).dump(2) << '\n';
    if (!f) throw IoError("emit_report: write failed for " + path);
}

}  // namespace inkstrip

#endif
