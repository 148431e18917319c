#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "core.hpp"
#include "energy.hpp"

namespace maskfuse {

/// Dense row-major grid of soft foreground scores in [0,1].
struct SoftMask {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    SoftMask() = default;
    SoftMask(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("SoftMask: dimensions must be >= 1");
    }

    static SoftMask from_prob_map(const ProbMap& p) {
        SoftMask m(p.width, p.height);
        for (std::size_t i = 0; i < p.data.size(); ++i) m.data[i] = static_cast<double>(p.data[i]);
        return m;
    }

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    double& at(int x, int y) { return data[index(x, y)]; }
    double at(int x, int y) const { return data[index(x, y)]; }

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("SoftMask: dimensions must be >= 1");
        if (data.size() != static_cast<std::size_t>(width) * height)
            throw std::invalid_argument("SoftMask: data length != width*height");
        for (double v : data)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("SoftMask: values must be in [0,1]");
    }
};

enum class BagKind { POSITIVE, NEGATIVE };

/// A line segment of pixels: positive bags must contain at least one
/// foreground pixel, negative bags none. Pixels as (row, col), ascending.
struct Bag {
    BagKind kind = BagKind::POSITIVE;
    std::vector<std::pair<int, int>> pixels;
};

namespace detail {

inline void check_boxes_in_bounds(const BBoxList& boxes, int width, int height) {
    for (const BBox& b : boxes) {
        if (b.x_min < 0 || b.y_min < 0 || b.x_min >= b.x_max || b.y_min >= b.y_max || b.x_max > width ||
            b.y_max > height)
            throw std::invalid_argument("box (" + std::to_string(b.x_min) + "," + std::to_string(b.y_min) +
                                        "," + std::to_string(b.x_max) + "," + std::to_string(b.y_max) +
                                        ") out of bounds for " + std::to_string(width) + "x" +
                                        std::to_string(height));
    }
}

inline double clamp_unit_log_arg(double v) { return std::clamp(v, 1e-7, 1.0 - 1e-7); }

}  // namespace detail

/// Build MIL bags from boxes. Per box: one positive bag per interior row and
/// per interior column. Negative bags extend each box edge line outward to
/// the image border, truncated before the first pixel inside any box;
/// zero-length segments are dropped, duplicates are kept.
inline std::vector<Bag> build_bags(const BBoxList& boxes, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("build_bags: dimensions must be >= 1");
    detail::check_boxes_in_bounds(boxes, width, height);

    auto inside_any = [&](int x, int y) {
        for (const BBox& b : boxes)
            if (b.contains(x, y)) return true;
        return false;
    };

    std::vector<Bag> bags;
    for (const BBox& b : boxes) {
        for (int y = b.y_min; y < b.y_max; ++y) {
            Bag bag;
            bag.kind = BagKind::POSITIVE;
            for (int x = b.x_min; x < b.x_max; ++x) bag.pixels.emplace_back(y, x);
            bags.push_back(std::move(bag));
        }
        for (int x = b.x_min; x < b.x_max; ++x) {
            Bag bag;
            bag.kind = BagKind::POSITIVE;
            for (int y = b.y_min; y < b.y_max; ++y) bag.pixels.emplace_back(y, x);
            bags.push_back(std::move(bag));
        }

        auto horizontal_run = [&](int y, int x_start, int step) {
            Bag bag;
            bag.kind = BagKind::NEGATIVE;
            for (int x = x_start; x >= 0 && x < width && !inside_any(x, y); x += step)
                bag.pixels.emplace_back(y, x);
            if (step < 0) std::reverse(bag.pixels.begin(), bag.pixels.end());
            if (!bag.pixels.empty()) bags.push_back(std::move(bag));
        };
        auto vertical_run = [&](int x, int y_start, int step) {
            Bag bag;
            bag.kind = BagKind::NEGATIVE;
            for (int y = y_start; y >= 0 && y < height && !inside_any(x, y); y += step)
                bag.pixels.emplace_back(y, x);
            if (step < 0) std::reverse(bag.pixels.begin(), bag.pixels.end());
            if (!bag.pixels.empty()) bags.push_back(std::move(bag));
        };

        horizontal_run(b.y_min, b.x_min - 1, -1);      // top edge, leftward
        horizontal_run(b.y_min, b.x_max, +1);          // top edge, rightward
        horizontal_run(b.y_max - 1, b.x_min - 1, -1);  // bottom edge, leftward
        horizontal_run(b.y_max - 1, b.x_max, +1);      // bottom edge, rightward
        vertical_run(b.x_min, b.y_min - 1, -1);        // left edge, upward
        vertical_run(b.x_min, b.y_max, +1);            // left edge, downward
        vertical_run(b.x_max - 1, b.y_min - 1, -1);    // right edge, upward
        vertical_run(b.x_max - 1, b.y_max, +1);        // right edge, downward
    }
    return bags;
}

/// MIL unary loss: max-aggregate each bag, then mean of -log(max) over
/// positive bags plus mean of -log(1-max) over negative bags; an empty kind
/// contributes 0.
inline double mil_unary(const SoftMask& mask, const std::vector<Bag>& bags) {
    mask.validate();
    if (bags.empty()) throw std::invalid_argument("mil_unary: empty bag list");

    double pos_sum = 0.0, neg_sum = 0.0;
    long long pos_n = 0, neg_n = 0;
    for (const Bag& bag : bags) {
        if (bag.pixels.empty()) throw std::invalid_argument("mil_unary: bag with no pixels");
        double m = 0.0;
        for (const auto& [row, col] : bag.pixels) {
            if (col < 0 || col >= mask.width || row < 0 || row >= mask.height)
                throw std::invalid_argument("mil_unary: bag pixel out of mask bounds");
            m = std::max(m, mask.at(col, row));
        }
        m = detail::clamp_unit_log_arg(m);
        if (bag.kind == BagKind::POSITIVE) {
            pos_sum += -std::log(m);
            ++pos_n;
        } else {
            neg_sum += -std::log(1.0 - m);
            ++neg_n;
        }
    }
    const double pos_mean = pos_n ? pos_sum / static_cast<double>(pos_n) : 0.0;
    const double neg_mean = neg_n ? neg_sum / static_cast<double>(neg_n) : 0.0;
    return pos_mean + neg_mean;
}

/// MIL pairwise smoothness: mean of (m_p - m_q)^2 over 4- or 8-neighbor
/// unordered pairs. A mask with no neighbor pairs scores 0.
inline double mil_pairwise(const SoftMask& mask, int neighbors) {
    mask.validate();
    if (neighbors != 4 && neighbors != 8)
        throw std::invalid_argument("mil_pairwise: neighbors must be 4 or 8");

    double sum = 0.0;
    long long count = 0;
    auto add_pair = [&](int x0, int y0, int x1, int y1) {
        const double d = mask.at(x0, y0) - mask.at(x1, y1);
        sum += d * d;
        ++count;
    };
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (x + 1 < mask.width) add_pair(x, y, x + 1, y);
            if (y + 1 < mask.height) add_pair(x, y, x, y + 1);
            if (neighbors == 8 && y + 1 < mask.height) {
                if (x + 1 < mask.width) add_pair(x, y, x + 1, y + 1);
                if (x - 1 >= 0) add_pair(x, y, x - 1, y + 1);
            }
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

/// Box projection loss: per box and axis, max-project the mask inside the
/// box and compare against the box's all-ones projection with a Dice-style
/// loss 1 - 2<u,v>/(<u,u>+<v,v>); sum the two axes, mean over boxes.
inline double boxinst_projection(const SoftMask& mask, const BBoxList& boxes) {
    mask.validate();
    if (boxes.empty()) throw std::invalid_argument("boxinst_projection: empty box list");
    detail::check_boxes_in_bounds(boxes, mask.width, mask.height);

    auto dice_loss_vs_ones = [](const std::vector<double>& u) {
        double dot = 0.0, uu = 0.0;
        for (double v : u) {
            dot += v;
            uu += v * v;
        }
        const double den = uu + static_cast<double>(u.size());
        if (den == 0.0) return 1.0;
        return 1.0 - 2.0 * dot / den;
    };

    double total = 0.0;
    for (const BBox& b : boxes) {
        std::vector<double> proj_x(static_cast<std::size_t>(b.width()), 0.0);
        std::vector<double> proj_y(static_cast<std::size_t>(b.height()), 0.0);
        for (int y = b.y_min; y < b.y_max; ++y) {
            for (int x = b.x_min; x < b.x_max; ++x) {
                const double v = mask.at(x, y);
                proj_x[x - b.x_min] = std::max(proj_x[x - b.x_min], v);
                proj_y[y - b.y_min] = std::max(proj_y[y - b.y_min], v);
            }
        }
        total += dice_loss_vs_ones(proj_x) + dice_loss_vs_ones(proj_y);
    }
    return total / static_cast<double>(boxes.size());
}

/// Color-gated pairwise loss: over 8-neighbor pairs whose color similarity
/// is >= tau, mean of -log(m_p*m_q + (1-m_p)(1-m_q)), the log argument
/// clamped to [1e-7, 1-1e-7]. No qualifying pair -> 0.
inline double boxinst_pairwise(const SoftMask& mask, const RgbImage& image, double tau = 0.3,
                               double theta_b = 15.0) {
    mask.validate();
    require_same_size(mask.width, mask.height, image.width, image.height, "mask", "image");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("boxinst_pairwise: tau must be in [0,1]");
    if (!(theta_b > 0.0)) throw std::invalid_argument("boxinst_pairwise: theta_b must be positive");

    double sum = 0.0;
    long long count = 0;
    auto add_pair = [&](int x0, int y0, int x1, int y1) {
        if (color_similarity(image.at(x0, y0), image.at(x1, y1), theta_b) < tau) return;
        const double mp = mask.at(x0, y0);
        const double mq = mask.at(x1, y1);
        const double agree = detail::clamp_unit_log_arg(mp * mq + (1.0 - mp) * (1.0 - mq));
        sum += -std::log(agree);
        ++count;
    };
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (x + 1 < mask.width) add_pair(x, y, x + 1, y);
            if (y + 1 < mask.height) add_pair(x, y, x, y + 1);
            if (y + 1 < mask.height) {
                if (x + 1 < mask.width) add_pair(x, y, x + 1, y + 1);
                if (x - 1 >= 0) add_pair(x, y, x - 1, y + 1);
            }
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace maskfuse
