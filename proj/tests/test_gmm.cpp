#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace maskfuse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PixelSample gaussian_sample(std::mt19937_64& rng, const Eigen::Vector3d& mean, double sigma,
                            std::size_t count) {
    PixelSample s;
    s.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        s.push_back(mean + sigma * Eigen::Vector3d(normal_unit(rng), normal_unit(rng), normal_unit(rng)));
    return s;
}

PixelSample mixture_sample(std::mt19937_64& rng, std::size_t count) {
    const Eigen::Vector3d centers[3] = {{200, 60, 60}, {230, 210, 210}, {40, 90, 180}};
    PixelSample s;
    s.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Eigen::Vector3d& c = centers[rng() % 3];
        s.push_back(c + 12.0 * Eigen::Vector3d(normal_unit(rng), normal_unit(rng), normal_unit(rng)));
    }
    return s;
}

}  // namespace

TEST_CASE("gaussian density reference values", "[gmm]") {
    const Eigen::Vector3d mu(1.0, 2.0, 3.0);

    SECTION("at the mean with identity covariance") {
        const double d = component_density(mu, mu, Eigen::Matrix3d::Identity());
        REQUIRE_THAT(d, WithinRel(0.06349363593424097, 1e-12));
    }
    SECTION("at the mean with covariance 4I") {
        const double d = component_density(mu, mu, 4.0 * Eigen::Matrix3d::Identity());
        REQUIRE_THAT(d, WithinRel(0.00793670449178012, 1e-12));
    }
    SECTION("off the mean with a full covariance") {
        Eigen::Matrix3d cov;
        cov << 4, 1, 0, 1, 9, 2, 0, 2, 16;
        const double d =
            component_density(Eigen::Vector3d(12, 18, 33), Eigen::Vector3d(10, 20, 30), cov);
        REQUIRE_THAT(d, WithinRel(0.0007664405229166440, 1e-12));
    }
    SECTION("density integrates scale: farther points score lower") {
        const Eigen::Matrix3d cov = 9.0 * Eigen::Matrix3d::Identity();
        const double near = component_density(mu + Eigen::Vector3d(1, 0, 0), mu, cov);
        const double far = component_density(mu + Eigen::Vector3d(5, 0, 0), mu, cov);
        REQUIRE(near > far);
    }
    SECTION("non positive definite covariance throws") {
        Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
        bad(2, 2) = -1.0;
        REQUIRE_THROWS_AS(component_density(mu, mu, bad), std::invalid_argument);
    }
}

TEST_CASE("mixture log score", "[gmm]") {
    SECTION("single component equals the component log density") {
        GmmModel m;
        m.components.push_back({1.0, Eigen::Vector3d(1, 2, 3), Eigen::Matrix3d::Identity()});
        REQUIRE_THAT(mixture_log_score(m, Eigen::Vector3d(1, 2, 3)),
                     WithinAbs(-2.7568155996140182, 1e-12));
    }
    SECTION("two-component reference value") {
        GmmModel m;
        m.components.push_back({0.3, Eigen::Vector3d(0, 0, 0), 25.0 * Eigen::Matrix3d::Identity()});
        m.components.push_back({0.7, Eigen::Vector3d(10, 10, 10), 4.0 * Eigen::Matrix3d::Identity()});
        REQUIRE_THAT(mixture_log_score(m, Eigen::Vector3d(5, 5, 5)),
                     WithinAbs(-10.275338428939966, 1e-10));
    }
    SECTION("log-sum-exp matches direct evaluation on random models") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 20; ++trial) {
            GmmModel m;
            const int k = 1 + static_cast<int>(rng() % 4);
            double wsum = 0.0;
            std::vector<double> raw(k);
            for (int i = 0; i < k; ++i) {
                raw[i] = 0.05 + uniform_unit(rng);
                wsum += raw[i];
            }
            for (int i = 0; i < k; ++i) {
                const Eigen::Vector3d mean(uniform_range(rng, 0, 255), uniform_range(rng, 0, 255),
                                           uniform_range(rng, 0, 255));
                const double var = uniform_range(rng, 1.0, 400.0);
                m.components.push_back({raw[i] / wsum, mean, var * Eigen::Matrix3d::Identity()});
            }
            // evaluate near one of the means so the plain-sum reference does
            // not underflow to zero
            const GmmComponent& anchor = m.components[rng() % k];
            const double spread = std::sqrt(anchor.cov(0, 0));
            const Eigen::Vector3d c = anchor.mean + Eigen::Vector3d(uniform_range(rng, -2.0 * spread, 2.0 * spread),
                                                                    uniform_range(rng, -2.0 * spread, 2.0 * spread),
                                                                    uniform_range(rng, -2.0 * spread, 2.0 * spread));
            double direct = 0.0;
            for (const auto& comp : m.components)
                direct += comp.weight * component_density(c, comp.mean, comp.cov);
            REQUIRE_THAT(mixture_log_score(m, c), WithinAbs(std::log(direct), 1e-10));
        }
    }
    SECTION("empty model throws") {
        REQUIRE_THROWS_AS(mixture_log_score(GmmModel{}, Eigen::Vector3d::Zero()), std::invalid_argument);
    }
}

TEST_CASE("em fit is deterministic for a fixed sample and seed", "[gmm]") {
    std::mt19937_64 rng(31);
    const PixelSample sample = mixture_sample(rng, 400);

    FitTrace trace_a, trace_b;
    const GmmModel a = fit_em(sample, 3, 12345, &trace_a);
    const GmmModel b = fit_em(sample, 3, 12345, &trace_b);

    REQUIRE(trace_a == trace_b);
    REQUIRE(a.components.size() == b.components.size());
    for (std::size_t i = 0; i < a.components.size(); ++i) {
        REQUIRE(a.components[i].weight == b.components[i].weight);
        REQUIRE((a.components[i].mean.array() == b.components[i].mean.array()).all());
        REQUIRE((a.components[i].cov.array() == b.components[i].cov.array()).all());
    }
}

TEST_CASE("single component fit matches the closed form", "[gmm]") {
    std::mt19937_64 rng(55);
    const PixelSample sample = gaussian_sample(rng, {100, 50, 25}, 9.0, 301);

    const GmmModel m = fit_em(sample, 1, 0);
    REQUIRE(m.components.size() == 1);
    REQUIRE(m.components[0].weight == 1.0);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& x : sample) mean += x;
    mean /= static_cast<double>(sample.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& x : sample) {
        const Eigen::Vector3d d = x - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(sample.size());
    cov += 1e-6 * Eigen::Matrix3d::Identity();

    REQUIRE((m.components[0].mean - mean).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE((m.components[0].cov - cov).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("em log-likelihood trace is monotone and bounded", "[gmm]") {
    std::mt19937_64 rng(77);
    const int comp_choices[3] = {1, 2, 5};
    for (int trial = 0; trial < 12; ++trial) {
        const int n = comp_choices[trial % 3];
        const std::size_t size = 50 + (rng() % 1000);
        const PixelSample sample = mixture_sample(rng, size);

        FitTrace trace;
        const GmmModel m = fit_em(sample, n, 1000 + trial, &trace);

        REQUIRE(!trace.empty());
        REQUIRE(trace.size() <= 100);
        for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] >= trace[i - 1] - 1e-9);
        for (double v : trace) REQUIRE(std::isfinite(v));

        double wsum = 0.0;
        for (const auto& comp : m.components) {
            REQUIRE(comp.weight > 0.0);
            wsum += comp.weight;
            // covariance must stay usable for scoring
            REQUIRE_NOTHROW(component_density(comp.mean, comp.mean, comp.cov));
        }
        REQUIRE_THAT(wsum, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("em handles degenerate samples", "[gmm]") {
    SECTION("all points identical") {
        const PixelSample sample(50, Eigen::Vector3d(120, 30, 210));
        const GmmModel m = fit_em(sample, 2, 9);
        REQUIRE(m.components.size() == 2);
        for (const auto& comp : m.components) {
            REQUIRE(std::isfinite(comp.weight));
            REQUIRE_NOTHROW(component_density(comp.mean, comp.mean, comp.cov));
        }
        // scoring the shared point must be finite
        REQUIRE(std::isfinite(mixture_log_score(m, sample[0])));
    }
    SECTION("coplanar points (singular scatter) still fit") {
        PixelSample sample;
        for (int i = 0; i < 60; ++i) sample.push_back(Eigen::Vector3d(i, 2.0 * i, 5.0));
        FitTrace trace;
        const GmmModel m = fit_em(sample, 2, 3, &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] >= trace[i - 1] - 1e-9);
        REQUIRE(std::isfinite(mixture_log_score(m, sample[10])));
    }
}

TEST_CASE("em input validation", "[gmm]") {
    const PixelSample tiny(3, Eigen::Vector3d::Zero());
    REQUIRE_THROWS_AS(fit_em(tiny, 4, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_em(PixelSample{}, 1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_em(tiny, 0, 0), std::invalid_argument);
}

TEST_CASE("em separates well separated clusters", "[gmm]") {
    std::mt19937_64 rng(13);
    PixelSample sample;
    const Eigen::Vector3d a(40, 40, 40), b(220, 220, 220);
    for (int i = 0; i < 150; ++i) {
        sample.push_back(a + 3.0 * Eigen::Vector3d(normal_unit(rng), normal_unit(rng), normal_unit(rng)));
        sample.push_back(b + 3.0 * Eigen::Vector3d(normal_unit(rng), normal_unit(rng), normal_unit(rng)));
    }
    const GmmModel m = fit_em(sample, 2, 17);
    const double score_a = mixture_log_score(m, a);
    const double score_mid = mixture_log_score(m, (a + b) / 2.0);
    const double score_b = mixture_log_score(m, b);
    REQUIRE(score_a > score_mid);
    REQUIRE(score_b > score_mid);
    // each cluster center should be near one fitted mean
    double best_a = 1e9, best_b = 1e9;
    for (const auto& comp : m.components) {
        best_a = std::min(best_a, (comp.mean - a).norm());
        best_b = std::min(best_b, (comp.mean - b).norm());
    }
    REQUIRE(best_a < 2.0);
    REQUIRE(best_b < 2.0);
}
