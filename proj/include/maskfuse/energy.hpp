#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "maxflow.hpp"
#include "probmap.hpp"

namespace maskfuse {

enum class FixState : std::uint8_t {
    FREE = 0,
    FIXED_0 = 1,  // pinned to background
    FIXED_1 = 2,  // pinned to foreground
};

/// exp(-||c1-c2||_2 / theta) on raw 8-bit RGB vectors; always in (0,1].
inline double color_similarity(const Rgb& a, const Rgb& b, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("color_similarity: theta must be positive");
    const double dr = static_cast<double>(a.r) - static_cast<double>(b.r);
    const double dg = static_cast<double>(a.g) - static_cast<double>(b.g);
    const double db = static_cast<double>(a.b) - static_cast<double>(b.b);
    return std::exp(-std::sqrt(dr * dr + dg * dg + db * db) / theta);
}

/// Pixel labeling problem on the 4-connected grid: per-pixel foreground
/// probabilities, per-edge similarity weights, per-pixel fix states and the
/// smoothing trade-off lambda.
struct EnergyProblem {
    int width = 0;
    int height = 0;
    std::vector<double> prob;     // size W*H
    std::vector<double> right_w;  // size (W-1)*H, edge (x,y)-(x+1,y)
    std::vector<double> down_w;   // size W*(H-1), edge (x,y)-(x,y+1)
    std::vector<FixState> fixed;  // size W*H
    double lambda = 2.0;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t right_index(int x, int y) const { return static_cast<std::size_t>(y) * (width - 1) + x; }
    std::size_t down_index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("EnergyProblem: dimensions must be >= 1");
        const std::size_t n = static_cast<std::size_t>(width) * height;
        if (prob.size() != n || fixed.size() != n)
            throw std::invalid_argument("EnergyProblem: field sizes do not match dimensions");
        if (right_w.size() != static_cast<std::size_t>(width - 1) * height ||
            down_w.size() != static_cast<std::size_t>(width) * (height - 1))
            throw std::invalid_argument("EnergyProblem: edge weight sizes do not match dimensions");
        for (double p : prob)
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("EnergyProblem: probabilities must be in [0,1]");
        for (double w : right_w)
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("EnergyProblem: edge weights must be finite and nonnegative");
        for (double w : down_w)
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("EnergyProblem: edge weights must be finite and nonnegative");
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("EnergyProblem: lambda must be finite and nonnegative");
    }
};

/// Assemble the labeling problem: probabilities from the map, edge weights
/// from color similarity, agreed pixels pinned to their agreed label.
inline EnergyProblem build_problem(const RgbImage& img, const ProbMap& prob, const AgreementMap& agr,
                                   const PipelineConfig& cfg) {
    cfg.validate();
    require_same_size(img.width, img.height, prob.width, prob.height, "image", "probability map");
    require_same_size(img.width, img.height, agr.width, agr.height, "image", "agreement map");

    EnergyProblem p;
    p.width = img.width;
    p.height = img.height;
    p.lambda = cfg.lambda;
    p.prob.resize(img.pixel_count());
    p.fixed.resize(img.pixel_count());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const float v = prob.data[i];
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::invalid_argument("probability map values must be in [0,1]");
        p.prob[i] = static_cast<double>(v);
        switch (agr.data[i]) {
            case Agreement::FG: p.fixed[i] = FixState::FIXED_1; break;
            case Agreement::BG: p.fixed[i] = FixState::FIXED_0; break;
            case Agreement::AMBIGUOUS: p.fixed[i] = FixState::FREE; break;
        }
    }

    p.right_w.resize(static_cast<std::size_t>(img.width - 1) * img.height);
    p.down_w.resize(static_cast<std::size_t>(img.width) * (img.height - 1));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x + 1 < img.width; ++x)
            p.right_w[p.right_index(x, y)] = color_similarity(img.at(x, y), img.at(x + 1, y), cfg.theta);
    for (int y = 0; y + 1 < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            p.down_w[p.down_index(x, y)] = color_similarity(img.at(x, y), img.at(x, y + 1), cfg.theta);
    return p;
}

struct ObjectiveParts {
    double o_idf = 0.0;  // per-pixel agreement with the probability map
    double o_scf = 0.0;  // similarity mass on label-discontinuity edges
    double total = 0.0;  // o_idf - lambda * o_scf
};

/// Evaluate the maximization objective for an arbitrary labeling.
inline ObjectiveParts objective_value(const EnergyProblem& p, const BinaryMask& labels) {
    labels.validate();
    require_same_size(p.width, p.height, labels.width, labels.height, "problem", "labels");

    ObjectiveParts parts;
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            const double prob = p.prob[p.index(x, y)];
            parts.o_idf += labels.at(x, y) ? prob : 1.0 - prob;
        }
    }
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x + 1 < p.width; ++x)
            if (labels.at(x, y) != labels.at(x + 1, y)) parts.o_scf += p.right_w[p.right_index(x, y)];
    for (int y = 0; y + 1 < p.height; ++y)
        for (int x = 0; x < p.width; ++x)
            if (labels.at(x, y) != labels.at(x, y + 1)) parts.o_scf += p.down_w[p.down_index(x, y)];
    parts.total = parts.o_idf - p.lambda * parts.o_scf;
    return parts;
}

struct SolveResult {
    BinaryMask labels;
    double objective = 0.0;
    double o_idf = 0.0;
    double o_scf = 0.0;
    long long free_count = 0;
    double solve_seconds = 0.0;
};

namespace detail {

inline long long count_free(const EnergyProblem& p) {
    long long n = 0;
    for (FixState f : p.fixed)
        if (f == FixState::FREE) ++n;
    return n;
}

inline SolveResult finish_result(const EnergyProblem& p, BinaryMask labels,
                                 std::chrono::steady_clock::time_point started) {
    SolveResult res;
    const ObjectiveParts parts = objective_value(p, labels);
    res.labels = std::move(labels);
    res.objective = parts.total;
    res.o_idf = parts.o_idf;
    res.o_scf = parts.o_scf;
    res.free_count = count_free(p);
    res.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

}  // namespace detail

/// Exact maximization via min-cut. Maximizing the objective is equivalent to
/// minimizing E(x) = sum_p [x_p (1-P_p) + (1-x_p) P_p] + lambda * sum_pq S_pq
/// [x_p != x_q] (the two differ by a constant), which is submodular, so the
/// standard s-t construction solves it exactly: cap(s->p) = P_p, cap(p->t) =
/// 1-P_p, neighbor caps lambda*S_pq both ways, and an unsaturatable capacity
/// pins fixed pixels. A pixel is labeled foreground iff it stays on the
/// source side, which prefers background on ties.
inline SolveResult solve_graphcut(const EnergyProblem& p) {
    p.validate();
    const auto started = std::chrono::steady_clock::now();

    const int w = p.width, h = p.height;
    const int n = w * h;
    const int s = n, t = n + 1;

    double finite_total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (p.fixed[i] != FixState::FIXED_1) finite_total += p.prob[i];
        if (p.fixed[i] != FixState::FIXED_0) finite_total += 1.0 - p.prob[i];
    }
    if (p.lambda > 0.0) {
        for (double sw : p.right_w) finite_total += 2.0 * p.lambda * sw;
        for (double sw : p.down_w) finite_total += 2.0 * p.lambda * sw;
    }
    const double inf_cap = finite_total + 1.0;

    detail::DinicGraph g(n + 2);
    for (int i = 0; i < n; ++i) {
        double sp = p.prob[i];
        double pt = 1.0 - p.prob[i];
        if (p.fixed[i] == FixState::FIXED_1) sp = inf_cap;
        if (p.fixed[i] == FixState::FIXED_0) pt = inf_cap;
        if (sp > 0.0) g.add_edge(s, i, sp, 0.0);
        if (pt > 0.0) g.add_edge(i, t, pt, 0.0);
    }
    if (p.lambda > 0.0) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x + 1 < w; ++x) {
                const double c = p.lambda * p.right_w[p.right_index(x, y)];
                if (c > 0.0) g.add_edge(static_cast<int>(p.index(x, y)), static_cast<int>(p.index(x + 1, y)), c, c);
            }
        }
        for (int y = 0; y + 1 < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double c = p.lambda * p.down_w[p.down_index(x, y)];
                if (c > 0.0) g.add_edge(static_cast<int>(p.index(x, y)), static_cast<int>(p.index(x, y + 1)), c, c);
            }
        }
    }

    g.max_flow(s, t);
    BinaryMask labels(w, h);
    for (int i = 0; i < n; ++i) labels.data[i] = g.source_side(i) ? 1 : 0;
    return detail::finish_result(p, std::move(labels), started);
}

/// Exhaustive reference solver. Enumerates every assignment of the free
/// pixels (at most 25) and keeps the strictly best objective; ties resolve to
/// the lexicographically smallest labeling in row-major pixel order.
inline SolveResult solve_bruteforce(const EnergyProblem& p) {
    p.validate();
    const auto started = std::chrono::steady_clock::now();

    std::vector<int> free_idx;
    for (int i = 0; i < p.width * p.height; ++i)
        if (p.fixed[i] == FixState::FREE) free_idx.push_back(i);
    const int k = static_cast<int>(free_idx.size());
    if (k > 25)
        throw std::runtime_error("too many free pixels for exhaustive search: " + std::to_string(k) +
                                 " (limit 25)");

    BinaryMask labels(p.width, p.height);
    for (int i = 0; i < p.width * p.height; ++i)
        labels.data[i] = (p.fixed[i] == FixState::FIXED_1) ? 1 : 0;

    std::vector<int> pos_of(p.prob.size(), -1);
    for (int f = 0; f < k; ++f) pos_of[free_idx[f]] = f;

    // Constant part plus per-free-pixel linear coefficients; only free-free
    // edges need re-examination per assignment.
    double const_obj = 0.0;
    std::vector<double> gain1(k), gain0(k);
    for (int i = 0; i < p.width * p.height; ++i) {
        if (pos_of[i] >= 0) {
            gain1[pos_of[i]] = p.prob[i];
            gain0[pos_of[i]] = 1.0 - p.prob[i];
        } else {
            const_obj += labels.data[i] ? p.prob[i] : 1.0 - p.prob[i];
        }
    }

    struct FreeEdge {
        int a, b;
        double w;
    };
    std::vector<FreeEdge> free_edges;
    auto classify_edge = [&](int ia, int ib, double sw) {
        const int fa = pos_of[ia], fb = pos_of[ib];
        const double c = p.lambda * sw;
        if (fa < 0 && fb < 0) {
            if (labels.data[ia] != labels.data[ib]) const_obj -= c;
        } else if (fa >= 0 && fb >= 0) {
            free_edges.push_back({fa, fb, c});
        } else {
            const int f = fa >= 0 ? fa : fb;
            const int other = fa >= 0 ? ib : ia;
            (labels.data[other] == 0 ? gain1[f] : gain0[f]) -= c;
        }
    };
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x + 1 < p.width; ++x)
            classify_edge(static_cast<int>(p.index(x, y)), static_cast<int>(p.index(x + 1, y)),
                          p.right_w[p.right_index(x, y)]);
    for (int y = 0; y + 1 < p.height; ++y)
        for (int x = 0; x < p.width; ++x)
            classify_edge(static_cast<int>(p.index(x, y)), static_cast<int>(p.index(x, y + 1)),
                          p.down_w[p.down_index(x, y)]);

    // The first free pixel in row-major order maps to the most significant
    // bit, so enumerating m in ascending order visits labelings in
    // lexicographic order and keeping strict improvements returns the
    // lexicographically smallest optimum.
    const std::uint64_t total = std::uint64_t{1} << k;
    double best_obj = -std::numeric_limits<double>::infinity();
    std::uint64_t best_m = 0;
    for (std::uint64_t m = 0; m < total; ++m) {
        double obj = const_obj;
        for (int f = 0; f < k; ++f) {
            const bool bit = (m >> (k - 1 - f)) & 1u;
            obj += bit ? gain1[f] : gain0[f];
        }
        for (const FreeEdge& e : free_edges) {
            const bool ba = (m >> (k - 1 - e.a)) & 1u;
            const bool bb = (m >> (k - 1 - e.b)) & 1u;
            if (ba != bb) obj -= e.w;
        }
        if (obj > best_obj) {
            best_obj = obj;
            best_m = m;
        }
    }

    for (int f = 0; f < k; ++f)
        labels.data[free_idx[f]] = static_cast<std::uint8_t>((best_m >> (k - 1 - f)) & 1u);
    return detail::finish_result(p, std::move(labels), started);
}

inline SolveResult solve(const EnergyProblem& p, SolverKind kind) {
    return kind == SolverKind::graphcut ? solve_graphcut(p) : solve_bruteforce(p);
}

}  // namespace maskfuse
