#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "core.hpp"
#include "gmm.hpp"

namespace maskfuse {

/// Per-pixel relationship between two candidate masks.
enum class Agreement : std::uint8_t {
    BG = 0,         // both masks background
    FG = 1,         // both masks foreground
    AMBIGUOUS = 2,  // masks disagree
};

struct AgreementMap {
    int width = 0;
    int height = 0;
    std::vector<Agreement> data;

    AgreementMap() = default;
    AgreementMap(int w, int h)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), Agreement::BG) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    Agreement& at(int x, int y) { return data[index(x, y)]; }
    Agreement at(int x, int y) const { return data[index(x, y)]; }
};

inline AgreementMap agreement(const BinaryMask& a, const BinaryMask& b) {
    a.validate();
    b.validate();
    require_same_size(a.width, a.height, b.width, b.height, "mask a", "mask b");
    AgreementMap out(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] != b.data[i])
            out.data[i] = Agreement::AMBIGUOUS;
        else
            out.data[i] = a.data[i] ? Agreement::FG : Agreement::BG;
    }
    return out;
}

/// Splits a WxH image into a KxK grid of contiguous blocks. Block j along an
/// axis of length M spans ⌊jM/K⌋ .. ⌊(j+1)M/K⌋-1, so the blocks partition the
/// axis exactly for every (M,K), including M < K (some blocks are empty then).
struct PatchGrid {
    int width = 0;
    int height = 0;
    int split = 1;

    struct Rect {
        int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // max-exclusive
        bool empty() const { return x0 >= x1 || y0 >= y1; }
    };

    PatchGrid(int w, int h, int k) : width(w), height(h), split(k) {
        if (w < 1 || h < 1) throw std::invalid_argument("PatchGrid: dimensions must be >= 1");
        if (k < 1) throw std::invalid_argument("PatchGrid: split must be >= 1");
    }

    /// i indexes column blocks (x), j indexes row blocks (y).
    Rect patch(int i, int j) const {
        Rect r;
        r.x0 = static_cast<int>((static_cast<long long>(i) * width) / split);
        r.x1 = static_cast<int>((static_cast<long long>(i + 1) * width) / split);
        r.y0 = static_cast<int>((static_cast<long long>(j) * height) / split);
        r.y1 = static_cast<int>((static_cast<long long>(j + 1) * height) / split);
        return r;
    }
};

/// Colors of all pixels where the masks agree, split by label. Row-major
/// scan order, doubles in [0,255].
inline std::pair<PixelSample, PixelSample> global_pools(const RgbImage& img, const AgreementMap& agr) {
    require_same_size(img.width, img.height, agr.width, agr.height, "image", "agreement map");
    PixelSample fg, bg;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Rgb& c = img.at(x, y);
            const Eigen::Vector3d v(static_cast<double>(c.r), static_cast<double>(c.g),
                                    static_cast<double>(c.b));
            switch (agr.at(x, y)) {
                case Agreement::FG: fg.push_back(v); break;
                case Agreement::BG: bg.push_back(v); break;
                case Agreement::AMBIGUOUS: break;
            }
        }
    }
    return {std::move(fg), std::move(bg)};
}

/// How each patch of the grid was handled. A patch is counted once in
/// exactly one of fitted/skipped; the fallback counters record how often the
/// corresponding pool substitution fired (also when the patch was skipped
/// afterwards).
struct PatchStats {
    int fitted = 0;
    int fallback_fg = 0;
    int fallback_bg = 0;
    int skipped = 0;
};

/// Build the per-pixel foreground probability map from two candidate masks.
/// Pixels of patches that cannot support a fit keep probability 0.5.
inline ProbMap build_probability_map(const RgbImage& img, const BinaryMask& mask_a,
                                     const BinaryMask& mask_b, const PipelineConfig& cfg,
                                     PatchStats* stats_out = nullptr) {
    cfg.validate();
    require_same_size(img.width, img.height, mask_a.width, mask_a.height, "image", "mask a");
    require_same_size(img.width, img.height, mask_b.width, mask_b.height, "image", "mask b");

    const AgreementMap agr = agreement(mask_a, mask_b);
    const auto [global_fg, global_bg] = global_pools(img, agr);
    if (global_fg.empty())
        throw std::runtime_error("no foreground evidence: the masks do not agree on any foreground pixel");

    const int nc = cfg.components;
    const int k = cfg.split;
    const PatchGrid grid(img.width, img.height, k);

    ProbMap prob(img.width, img.height, 0.5f);
    PatchStats stats;

    auto color_at = [&](int x, int y) {
        const Rgb& c = img.at(x, y);
        return Eigen::Vector3d(static_cast<double>(c.r), static_cast<double>(c.g),
                               static_cast<double>(c.b));
    };

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const PatchGrid::Rect r = grid.patch(i, j);
            if (r.empty()) continue;

            PixelSample patch_fg, patch_bg;
            std::size_t mask_fg_count = 0;
            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    switch (agr.at(x, y)) {
                        case Agreement::FG: patch_fg.push_back(color_at(x, y)); break;
                        case Agreement::BG: patch_bg.push_back(color_at(x, y)); break;
                        case Agreement::AMBIGUOUS: break;
                    }
                    if (mask_a.at(x, y) || mask_b.at(x, y)) ++mask_fg_count;
                }
            }

            // Too little local foreground evidence: borrow the global pool,
            // but only when the candidate masks mark enough of the patch as
            // foreground for that to be meaningful.
            const std::size_t need = static_cast<std::size_t>(nc);
            const PixelSample* fg_pool = &patch_fg;
            const PixelSample* bg_pool = &patch_bg;
            if (patch_fg.size() <= need && mask_fg_count >= need) {
                fg_pool = &global_fg;
                ++stats.fallback_fg;
            }
            if (patch_bg.size() <= need && fg_pool->size() >= need) {
                bg_pool = &global_bg;
                ++stats.fallback_bg;
            }
            if (fg_pool->size() <= need || bg_pool->size() <= need) {
                ++stats.skipped;
                continue;
            }

            const std::uint64_t patch_seed =
                cfg.seed ^ static_cast<std::uint64_t>(i * k + j);
            const GmmModel model_fg = fit_em(*fg_pool, nc, patch_seed);
            const GmmModel model_bg = fit_em(*bg_pool, nc, patch_seed);
            const GmmScorer score_fg(model_fg);
            const GmmScorer score_bg(model_bg);

            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    const Eigen::Vector3d c = color_at(x, y);
                    const double lf = std::clamp(score_fg.log_score(c), -cfg.clip, cfg.clip);
                    const double lb = std::clamp(score_bg.log_score(c), -cfg.clip, cfg.clip);
                    const double ef = std::exp(lf);
                    const double eb = std::exp(lb);
                    prob.at(x, y) = static_cast<float>(ef / (ef + eb));
                }
            }
            ++stats.fitted;
        }
    }

    if (stats_out) *stats_out = stats;
    return prob;
}

}  // namespace maskfuse
