#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "imgio.hpp"

namespace maskfuse {

struct ConfusionCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
    pred.validate();
    gt.validate();
    require_same_size(pred.width, pred.height, gt.width, gt.height, "prediction", "ground truth");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (pred.data[i] && gt.data[i])
            ++c.tp;
        else if (pred.data[i])
            ++c.fp;
        else if (gt.data[i])
            ++c.fn;
    }
    return c;
}

/// 2|pred∩gt| / (|pred|+|gt|); two empty masks score 1.0 so dice(a,a)=1
/// holds universally.
inline double dice(const BinaryMask& pred, const BinaryMask& gt) {
    const ConfusionCounts c = confusion(pred, gt);
    const long long den = 2 * c.tp + c.fp + c.fn;
    if (den == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

/// (precision, recall); precision is 1.0 for an empty prediction and recall
/// is 1.0 for an empty ground truth.
inline std::pair<double, double> precision_recall(const BinaryMask& pred, const BinaryMask& gt) {
    const ConfusionCounts c = confusion(pred, gt);
    const double precision =
        (c.tp + c.fp) == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double recall =
        (c.tp + c.fn) == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return {precision, recall};
}

/// Tight boxes of the 8-connected foreground components, ordered by
/// (y_min, x_min).
inline BBoxList boxes_from_mask(const BinaryMask& mask) {
    mask.validate();
    const int w = mask.width, h = mask.height;
    std::vector<std::uint8_t> seen(mask.data.size(), 0);
    BBoxList out;
    std::vector<std::pair<int, int>> stack;

    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            const std::size_t i0 = mask.index(x0, y0);
            if (!mask.data[i0] || seen[i0]) continue;

            BBox box{x0, y0, x0 + 1, y0 + 1};
            seen[i0] = 1;
            stack.assign(1, {x0, y0});
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                box.x_min = std::min(box.x_min, x);
                box.y_min = std::min(box.y_min, y);
                box.x_max = std::max(box.x_max, x + 1);
                box.y_max = std::max(box.y_max, y + 1);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        const std::size_t ni = mask.index(nx, ny);
                        if (mask.data[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
            out.push_back(box);
        }
    }
    std::sort(out.begin(), out.end(), [](const BBox& a, const BBox& b) {
        if (a.y_min != b.y_min) return a.y_min < b.y_min;
        if (a.x_min != b.x_min) return a.x_min < b.x_min;
        if (a.y_max != b.y_max) return a.y_max < b.y_max;
        return a.x_max < b.x_max;
    });
    return out;
}

struct EvalRow {
    std::string image;
    double dice = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    ConfusionCounts counts;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_dice = 0.0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
};

namespace detail {

inline std::string path_stem(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return name;
}

}  // namespace detail

/// Evaluate prediction PNGs against ground-truth PNGs, paired by filename
/// stem. Rows are sorted by stem.
inline EvalReport evaluate_files(const std::vector<std::string>& pred_paths,
                                 const std::vector<std::string>& gt_paths) {
    if (pred_paths.size() != gt_paths.size())
        throw std::runtime_error("prediction and ground-truth sets differ in size: " +
                                 std::to_string(pred_paths.size()) + " vs " + std::to_string(gt_paths.size()));
    if (pred_paths.empty()) throw std::runtime_error("no image pairs to evaluate");

    std::map<std::string, std::string> gt_by_stem;
    for (const std::string& p : gt_paths) {
        const std::string stem = detail::path_stem(p);
        if (!gt_by_stem.emplace(stem, p).second)
            throw std::runtime_error("duplicate ground-truth stem '" + stem + "'");
    }

    std::map<std::string, std::string> pred_by_stem;
    for (const std::string& p : pred_paths) {
        const std::string stem = detail::path_stem(p);
        if (!pred_by_stem.emplace(stem, p).second)
            throw std::runtime_error("duplicate prediction stem '" + stem + "'");
    }

    EvalReport report;
    for (const auto& [stem, pred_path] : pred_by_stem) {
        const auto it = gt_by_stem.find(stem);
        if (it == gt_by_stem.end())
            throw std::runtime_error("no ground-truth counterpart for stem '" + stem + "'");

        const BinaryMask pred = read_mask_png(pred_path);
        const BinaryMask gt = read_mask_png(it->second);
        if (pred.width != gt.width || pred.height != gt.height)
            throw std::runtime_error("'" + stem + "': prediction size " + std::to_string(pred.width) + "x" +
                                     std::to_string(pred.height) + " does not match ground truth size " +
                                     std::to_string(gt.width) + "x" + std::to_string(gt.height));

        EvalRow row;
        row.image = stem;
        row.counts = confusion(pred, gt);
        row.dice = dice(pred, gt);
        std::tie(row.precision, row.recall) = precision_recall(pred, gt);
        report.rows.push_back(std::move(row));
    }

    for (const EvalRow& row : report.rows) {
        report.mean_dice += row.dice;
        report.mean_precision += row.precision;
        report.mean_recall += row.recall;
    }
    const double n = static_cast<double>(report.rows.size());
    report.mean_dice /= n;
    report.mean_precision /= n;
    report.mean_recall /= n;
    return report;
}

/// CSV with header, one row per image and a trailing unweighted mean row
/// (count cells left empty).
inline std::string to_csv(const EvalReport& report) {
    std::string out = "image,dice,precision,recall,tp,fp,fn\n";
    char buf[256];
    for (const EvalRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%lld,%lld,%lld\n", row.dice, row.precision,
                      row.recall, row.counts.tp, row.counts.fp, row.counts.fn);
        out += row.image;
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f,,,\n", report.mean_dice, report.mean_precision,
                  report.mean_recall);
    out += buf;
    return out;
}

}  // namespace maskfuse
