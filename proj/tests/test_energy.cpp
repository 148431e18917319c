#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace maskfuse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

EnergyProblem random_problem(std::mt19937_64& rng, int w, int h, double lambda) {
    EnergyProblem p;
    p.width = w;
    p.height = h;
    p.lambda = lambda;
    p.prob.resize(static_cast<std::size_t>(w) * h);
    p.fixed.resize(p.prob.size());
    for (auto& v : p.prob) v = uniform_unit(rng);
    for (auto& f : p.fixed) {
        const double u = uniform_unit(rng);
        f = u < 0.6 ? FixState::FREE : (u < 0.8 ? FixState::FIXED_0 : FixState::FIXED_1);
    }
    p.right_w.resize(static_cast<std::size_t>(w - 1) * h);
    p.down_w.resize(static_cast<std::size_t>(w) * (h - 1));
    for (auto& v : p.right_w) v = uniform_unit(rng);
    for (auto& v : p.down_w) v = uniform_unit(rng);
    return p;
}

EnergyProblem tiny_pair(double p0, double p1, double sim, double lambda) {
    EnergyProblem p;
    p.width = 2;
    p.height = 1;
    p.prob = {p0, p1};
    p.right_w = {sim};
    p.fixed = {FixState::FREE, FixState::FREE};
    p.lambda = lambda;
    return p;
}

// Nine pixels, hand-solvable: the optimum keeps the two left columns
// foreground and cuts along the cheap right-column edges.
EnergyProblem frozen_three_by_three() {
    EnergyProblem p;
    p.width = 3;
    p.height = 3;
    p.lambda = 2.0;
    p.prob = {0.95, 0.85, 0.15, 0.90, 0.70, 0.25, 0.80, 0.75, 0.10};
    p.right_w = {0.9, 0.2, 0.8, 0.1, 0.7, 0.2};
    p.down_w = {0.9, 0.8, 0.6, 0.9, 0.7, 0.5};
    p.fixed.assign(9, FixState::FREE);
    return p;
}

BinaryMask mask_from_bits(int w, int h, const std::vector<int>& bits) {
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < bits.size(); ++i) m.data[i] = static_cast<std::uint8_t>(bits[i]);
    return m;
}

}  // namespace

TEST_CASE("color similarity follows the exponential falloff", "[energy]") {
    REQUIRE(color_similarity({10, 20, 30}, {10, 20, 30}, 20.0) == 1.0);
    // distance equal to theta -> exp(-1)
    REQUIRE_THAT(color_similarity({0, 0, 0}, {20, 0, 0}, 20.0),
                 WithinRel(0.36787944117144233, 1e-12));
    REQUIRE_THAT(color_similarity({0, 0, 0}, {3, 4, 0}, 5.0),
                 WithinRel(0.36787944117144233, 1e-12));
    // smaller theta punishes the same distance harder
    REQUIRE(color_similarity({0, 0, 0}, {30, 0, 0}, 10.0) <
            color_similarity({0, 0, 0}, {30, 0, 0}, 40.0));
    REQUIRE_THROWS_AS(color_similarity({0, 0, 0}, {1, 1, 1}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(color_similarity({0, 0, 0}, {1, 1, 1}, -2.0), std::invalid_argument);
}

TEST_CASE("objective evaluation matches a worked two-pixel example", "[energy]") {
    const EnergyProblem p = tiny_pair(0.8, 0.3, 0.5, 2.0);

    const ObjectiveParts split = objective_value(p, mask_from_bits(2, 1, {1, 0}));
    REQUIRE_THAT(split.o_idf, WithinAbs(1.5, 1e-12));
    REQUIRE_THAT(split.o_scf, WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(split.total, WithinAbs(0.5, 1e-12));

    const ObjectiveParts both = objective_value(p, mask_from_bits(2, 1, {1, 1}));
    REQUIRE_THAT(both.o_idf, WithinAbs(1.1, 1e-12));
    REQUIRE_THAT(both.o_scf, WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(both.total, WithinAbs(1.1, 1e-12));

    // The strong edge drags the low-confidence pixel along.
    for (SolverKind kind : {SolverKind::graphcut, SolverKind::bruteforce}) {
        const SolveResult res = solve(p, kind);
        REQUIRE(res.labels.data == std::vector<std::uint8_t>{1, 1});
        REQUIRE_THAT(res.objective, WithinAbs(1.1, 1e-12));
        REQUIRE(res.free_count == 2);
    }
}

TEST_CASE("both solvers find the unique optimum of a fixed nine-pixel problem", "[energy]") {
    const EnergyProblem p = frozen_three_by_three();
    const std::vector<int> expected = {1, 1, 0, 1, 1, 0, 1, 1, 0};

    // First re-establish by enumeration that the expected labeling is the
    // unique maximizer, so agreement between the solvers below is meaningful.
    double best = -1e300;
    int count_at_best = 0;
    for (int m = 0; m < 512; ++m) {
        std::vector<int> bits(9);
        for (int i = 0; i < 9; ++i) bits[i] = (m >> (8 - i)) & 1;
        const double obj = objective_value(p, mask_from_bits(3, 3, bits)).total;
        if (obj > best + 1e-12) {
            best = obj;
            count_at_best = 1;
        } else if (obj > best - 1e-12) {
            ++count_at_best;
        }
    }
    REQUIRE(count_at_best == 1);
    REQUIRE_THAT(best, WithinAbs(6.45, 1e-12));

    for (SolverKind kind : {SolverKind::graphcut, SolverKind::bruteforce}) {
        const SolveResult res = solve(p, kind);
        for (int i = 0; i < 9; ++i) REQUIRE(res.labels.data[i] == expected[i]);
        REQUIRE_THAT(res.o_idf, WithinAbs(7.45, 1e-12));
        REQUIRE_THAT(res.o_scf, WithinAbs(0.5, 1e-12));
        REQUIRE_THAT(res.objective, WithinAbs(6.45, 1e-12));
        REQUIRE(res.free_count == 9);
        REQUIRE(res.solve_seconds >= 0.0);
    }
}

TEST_CASE("solvers honor pinned pixels", "[energy]") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int w = 2 + static_cast<int>(uniform_index(rng, 3));
        const int h = 2 + static_cast<int>(uniform_index(rng, 3));
        const EnergyProblem p = random_problem(rng, w, h, uniform_range(rng, 0.0, 4.0));
        for (SolverKind kind : {SolverKind::graphcut, SolverKind::bruteforce}) {
            const SolveResult res = solve(p, kind);
            for (std::size_t i = 0; i < p.fixed.size(); ++i) {
                if (p.fixed[i] == FixState::FIXED_1) REQUIRE(res.labels.data[i] == 1);
                if (p.fixed[i] == FixState::FIXED_0) REQUIRE(res.labels.data[i] == 0);
            }
        }
    }
}

TEST_CASE("exact ties prefer background", "[energy]") {
    EnergyProblem p;
    p.width = 3;
    p.height = 3;
    p.lambda = 0.0;
    p.prob.assign(9, 0.5);
    p.right_w.assign(6, 1.0);
    p.down_w.assign(6, 1.0);
    p.fixed.assign(9, FixState::FREE);

    for (SolverKind kind : {SolverKind::graphcut, SolverKind::bruteforce}) {
        const SolveResult res = solve(p, kind);
        for (std::uint8_t v : res.labels.data) REQUIRE(v == 0);
        REQUIRE_THAT(res.objective, WithinAbs(4.5, 1e-12));
    }
}

TEST_CASE("zero lambda reduces to per-pixel thresholding", "[energy]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        EnergyProblem p = random_problem(rng, 4, 4, 0.0);
        p.fixed.assign(16, FixState::FREE);
        // keep probabilities away from the tie point
        for (auto& v : p.prob)
            if (std::abs(v - 0.5) < 1e-3) v = 0.6;
        for (SolverKind kind : {SolverKind::graphcut, SolverKind::bruteforce}) {
            const SolveResult res = solve(p, kind);
            for (std::size_t i = 0; i < p.prob.size(); ++i)
                REQUIRE(res.labels.data[i] == (p.prob[i] > 0.5 ? 1 : 0));
        }
    }
}

TEST_CASE("raising lambda never increases the cut similarity mass", "[energy]") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        EnergyProblem p = random_problem(rng, 4, 4, 0.0);
        double prev_scf = 1e300;
        for (double lambda : {0.0, 0.5, 1.0, 2.0, 4.0}) {
            p.lambda = lambda;
            const SolveResult res = solve_bruteforce(p);
            REQUIRE(res.o_scf <= prev_scf + 1e-12);
            prev_scf = res.o_scf;
        }
    }
}

TEST_CASE("graph cut matches exhaustive search on random problems", "[energy]") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const int w = 1 + static_cast<int>(uniform_index(rng, 4));
        const int h = 1 + static_cast<int>(uniform_index(rng, 5));
        const EnergyProblem p = random_problem(rng, w, h, uniform_range(rng, 0.0, 4.0));

        const SolveResult gc = solve_graphcut(p);
        const SolveResult bf = solve_bruteforce(p);

        REQUIRE_THAT(gc.objective, WithinAbs(bf.objective, 1e-9));
        REQUIRE(gc.free_count == bf.free_count);

        // Each solver's reported numbers must match its own labeling.
        const ObjectiveParts gparts = objective_value(p, gc.labels);
        REQUIRE(gparts.total == gc.objective);
        REQUIRE(gparts.o_idf == gc.o_idf);
        REQUIRE(gparts.o_scf == gc.o_scf);
        const ObjectiveParts bparts = objective_value(p, bf.labels);
        REQUIRE(bparts.total == bf.objective);
    }
}

TEST_CASE("exhaustive solver enforces its search cap", "[energy]") {
    EnergyProblem p;
    p.width = 26;
    p.height = 1;
    p.lambda = 1.0;
    p.prob.assign(26, 0.5);
    p.right_w.assign(25, 1.0);
    p.down_w.clear();
    p.fixed.assign(26, FixState::FREE);
    REQUIRE_THROWS_WITH(solve_bruteforce(p), Catch::Matchers::ContainsSubstring("26") &&
                                                 Catch::Matchers::ContainsSubstring("limit 25"));
    // Pinning pixels brings it back under the cap.
    for (int i = 0; i < 6; ++i) p.fixed[i] = FixState::FIXED_1;
    REQUIRE_NOTHROW(solve_bruteforce(p));
}

TEST_CASE("problem assembly wires similarities, pins and probabilities", "[energy]") {
    RgbImage img(2, 2);
    img.at(0, 0) = {0, 0, 0};
    img.at(1, 0) = {20, 0, 0};
    img.at(0, 1) = {0, 0, 0};
    img.at(1, 1) = {20, 0, 0};

    BinaryMask a(2, 2), b(2, 2);
    a.at(0, 0) = b.at(0, 0) = 1;  // FIXED_1
    a.at(1, 0) = 1;               // FREE (disagree)
    /* (0,1) both 0 -> FIXED_0 */
    a.at(1, 1) = b.at(1, 1) = 1;  // FIXED_1

    ProbMap prob(2, 2);
    prob.at(0, 0) = 0.9f;
    prob.at(1, 0) = 0.6f;
    prob.at(0, 1) = 0.2f;
    prob.at(1, 1) = 0.8f;

    PipelineConfig cfg;
    cfg.theta = 20.0;
    cfg.lambda = 3.5;

    const EnergyProblem p = build_problem(img, prob, agreement(a, b), cfg);
    REQUIRE(p.width == 2);
    REQUIRE(p.height == 2);
    REQUIRE(p.lambda == 3.5);
    REQUIRE(p.prob == std::vector<double>{0.9f, 0.6f, 0.2f, 0.8f});
    REQUIRE(p.fixed == std::vector<FixState>{FixState::FIXED_1, FixState::FREE, FixState::FIXED_0,
                                             FixState::FIXED_1});
    REQUIRE_THAT(p.right_w[p.right_index(0, 0)], WithinRel(0.36787944117144233, 1e-12));
    REQUIRE_THAT(p.right_w[p.right_index(0, 1)], WithinRel(0.36787944117144233, 1e-12));
    REQUIRE(p.down_w[p.down_index(0, 0)] == 1.0);
    REQUIRE(p.down_w[p.down_index(1, 0)] == 1.0);

    REQUIRE_NOTHROW(p.validate());
}

TEST_CASE("malformed problems are rejected", "[energy]") {
    EnergyProblem p = tiny_pair(0.4, 0.6, 0.5, 1.0);
    REQUIRE_NOTHROW(p.validate());

    SECTION("probability out of range") {
        p.prob[0] = 1.5;
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SECTION("negative edge weight") {
        p.right_w[0] = -0.25;
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SECTION("wrong field length") {
        p.prob.push_back(0.5);
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SECTION("wrong edge count") {
        p.right_w.push_back(0.5);
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SECTION("negative lambda") {
        p.lambda = -1.0;
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    }
    SECTION("labeling size mismatch in evaluation") {
        REQUIRE_THROWS_WITH(objective_value(p, BinaryMask(3, 1)),
                            Catch::Matchers::ContainsSubstring("3x1"));
    }
}
