#ifndef INKSTRIP_HOUGH_HPP
#define INKSTRIP_HOUGH_HPP

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "inkstrip/image.hpp"

namespace inkstrip {

/// A detected line in normal form: a pixel (r, c) lies on the line iff
/// |c cos(theta) + r sin(theta) - rho| <= 1/2.
struct HoughLine {
    double rho = 0.0;        // signed pixels
    double theta_deg = 0.0;  // [0, 180)
    int votes = 0;
};

/// Classical (rho, theta) accumulator over black pixels, followed by
/// non-maximum suppression in a (nms_rho x nms_theta) window. Candidates at
/// or above vote_threshold survive; ties inside a window go to the smaller
/// (rho, theta) cell. Result is sorted by votes descending.
inline std::vector<HoughLine> hough_lines(const GrayImage& img, int vote_threshold,
                                          double theta_step_deg = 1.0, double rho_step = 1.0,
                                          int nms_rho = 5, int nms_theta = 5) {
    const int n_theta = std::max(1, static_cast<int>(std::lround(180.0 / theta_step_deg)));
    const double diag = std::hypot(static_cast<double>(img.height), static_cast<double>(img.width));
    const int n_rho = 2 * static_cast<int>(std::ceil(diag / rho_step)) + 1;
    const int rho_origin = n_rho / 2;  // accumulator row for rho = 0

    std::vector<double> cos_t(static_cast<std::size_t>(n_theta));
    std::vector<double> sin_t(static_cast<std::size_t>(n_theta));
    for (int t = 0; t < n_theta; ++t) {
        const double rad = t * theta_step_deg * 3.14159265358979323846 / 180.0;
        cos_t[static_cast<std::size_t>(t)] = std::cos(rad);
        sin_t[static_cast<std::size_t>(t)] = std::sin(rad);
    }

    std::vector<int> acc(static_cast<std::size_t>(n_rho) * n_theta, 0);
    auto cell = [&acc, n_theta](int ri, int ti) -> int& {
        return acc[static_cast<std::size_t>(ri) * n_theta + ti];
    };

    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            if (img.at(r, c) != 0) continue;
            for (int t = 0; t < n_theta; ++t) {
                const double rho = c * cos_t[static_cast<std::size_t>(t)] +
                                   r * sin_t[static_cast<std::size_t>(t)];
                const int ri = rho_origin + static_cast<int>(std::lround(rho / rho_step));
                if (ri >= 0 && ri < n_rho) ++cell(ri, t);
            }
        }

    const int half_r = nms_rho / 2, half_t = nms_theta / 2;
    std::vector<HoughLine> lines;
    for (int ri = 0; ri < n_rho; ++ri) {
        for (int ti = 0; ti < n_theta; ++ti) {
            const int votes = cell(ri, ti);
            if (votes < vote_threshold || votes == 0) continue;
            bool is_peak = true;
            for (int dr = -half_r; dr <= half_r && is_peak; ++dr) {
                for (int dt = -half_t; dt <= half_t && is_peak; ++dt) {
                    if (dr == 0 && dt == 0) continue;
                    const int rj = ri + dr, tj = ti + dt;
                    if (rj < 0 || rj >= n_rho || tj < 0 || tj >= n_theta) continue;
                    const int other = cell(rj, tj);
                    if (other > votes) is_peak = false;
                    // equal votes: keep only the lexicographically smallest cell
                    if (other == votes && (rj < ri || (rj == ri && tj < ti))) is_peak = false;
                }
            }
            if (is_peak)
                lines.push_back({(ri - rho_origin) * rho_step, ti * theta_step_deg, votes});
        }
    }
    std::sort(lines.begin(), lines.end(), [](const HoughLine& a, const HoughLine& b) {
        if (a.votes != b.votes) return a.votes > b.votes;
        if (a.rho != b.rho) return a.rho < b.rho;
        return a.theta_deg < b.theta_deg;
    });
    return lines;
}

/// Whitens every black pixel within perpendicular distance thickness/2 of any
/// detected line and marks it artifact in the mask. Whole lines go, including
/// the parts overlapping text; nothing is ever blackened.
inline std::pair<GrayImage, SegMask> erase_lines(const GrayImage& img,
                                                 const std::vector<HoughLine>& lines,
                                                 double thickness = 3.0) {
    GrayImage cleaned = img;
    SegMask mask(img.height, img.width, 255);
    if (lines.empty()) return {std::move(cleaned), std::move(mask)};
    const double half = thickness / 2.0;
    std::vector<std::pair<double, double>> trig;
    trig.reserve(lines.size());
    for (const HoughLine& l : lines) {
        const double rad = l.theta_deg * 3.14159265358979323846 / 180.0;
        trig.push_back({std::cos(rad), std::sin(rad)});
    }
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            if (img.at(r, c) != 0) continue;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                const double dist = std::fabs(c * trig[i].first + r * trig[i].second - lines[i].rho);
                if (dist <= half) {
                    cleaned.at(r, c) = 255;
                    mask.at(r, c) = 0;
                    break;
                }
            }
        }
    return {std::move(cleaned), std::move(mask)};
}

}  // namespace inkstrip

#endif
