#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace maskfuse {

using PixelSample = std::vector<Eigen::Vector3d>;

struct GmmComponent {
    double weight = 0.0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
};

struct GmmModel {
    std::vector<GmmComponent> components;
};

namespace detail {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // log(2*pi)
constexpr double kCovRegularization = 1e-6;
constexpr double kWeightFloor = 1e-8;
constexpr int kMaxEmIterations = 100;
constexpr double kEmRelTol = 1e-6;

inline Eigen::LLT<Eigen::Matrix3d> cholesky_or_throw(const Eigen::Matrix3d& cov) {
    Eigen::LLT<Eigen::Matrix3d> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance matrix is not positive definite");
    return llt;
}

inline double log_gaussian(const Eigen::LLT<Eigen::Matrix3d>& llt, const Eigen::Vector3d& mean,
                           const Eigen::Vector3d& c) {
    const Eigen::Matrix3d L = llt.matrixL();
    const Eigen::Vector3d z = llt.matrixL().solve(c - mean);
    const double log_det_half = std::log(L(0, 0)) + std::log(L(1, 1)) + std::log(L(2, 2));
    return -1.5 * kLogTwoPi - log_det_half - 0.5 * z.squaredNorm();
}

}  // namespace detail

/// Single trivariate Gaussian density with full covariance.
inline double component_density(const Eigen::Vector3d& c, const Eigen::Vector3d& mean,
                                const Eigen::Matrix3d& cov) {
    return std::exp(detail::log_gaussian(detail::cholesky_or_throw(cov), mean, c));
}

/// Precomputed Cholesky factorizations for repeated mixture scoring.
class GmmScorer {
public:
    explicit GmmScorer(const GmmModel& model) {
        if (model.components.empty()) throw std::invalid_argument("mixture model has no components");
        for (const GmmComponent& comp : model.components) {
            llt_.push_back(detail::cholesky_or_throw(comp.cov));
            means_.push_back(comp.mean);
            log_w_.push_back(comp.weight > 0.0 ? std::log(comp.weight)
                                               : -std::numeric_limits<double>::infinity());
        }
    }

    int size() const { return static_cast<int>(llt_.size()); }

    double log_component_density(int i, const Eigen::Vector3d& c) const {
        return detail::log_gaussian(llt_[i], means_[i], c);
    }

    /// log sum_i w_i N(c; mu_i, Sigma_i), evaluated with log-sum-exp.
    double log_score(const Eigen::Vector3d& c) const {
        double m = -std::numeric_limits<double>::infinity();
        terms_.resize(llt_.size());
        for (std::size_t i = 0; i < llt_.size(); ++i) {
            terms_[i] = log_w_[i] + log_component_density(static_cast<int>(i), c);
            m = std::max(m, terms_[i]);
        }
        if (!std::isfinite(m)) return m;
        double acc = 0.0;
        for (double t : terms_) acc += std::exp(t - m);
        return m + std::log(acc);
    }

private:
    std::vector<Eigen::LLT<Eigen::Matrix3d>> llt_;
    std::vector<Eigen::Vector3d> means_;
    std::vector<double> log_w_;
    mutable std::vector<double> terms_;
};

/// Mixture log-density of one color under the model.
inline double mixture_log_score(const GmmModel& model, const Eigen::Vector3d& c) {
    return GmmScorer(model).log_score(c);
}

namespace detail {

// Mean and MLE covariance (divide by N), two-pass.
inline void sample_moments(const PixelSample& sample, Eigen::Vector3d& mean, Eigen::Matrix3d& cov) {
    const double n = static_cast<double>(sample.size());
    mean.setZero();
    for (const auto& x : sample) mean += x;
    mean /= n;
    cov.setZero();
    for (const auto& x : sample) {
        const Eigen::Vector3d d = x - mean;
        cov += d * d.transpose();
    }
    cov /= n;
}

// k-means++ seeding: only the means; no Lloyd refinement.
inline std::vector<Eigen::Vector3d> kmeanspp_means(const PixelSample& sample, int k,
                                                   std::mt19937_64& rng) {
    const std::size_t n = sample.size();
    std::vector<Eigen::Vector3d> centers;
    centers.reserve(k);
    centers.push_back(sample[uniform_index(rng, n)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (sample[i] - centers[0]).squaredNorm();

    while (static_cast<int>(centers.size()) < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick;
        if (total <= 0.0) {
            pick = uniform_index(rng, n);  // all points coincide with a center
        } else {
            const double r = uniform_unit(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(sample[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (sample[i] - centers.back()).squaredNorm());
    }
    return centers;
}

}  // namespace detail

/// Per-iteration mean log-likelihood, in fit order.
using FitTrace = std::vector<double>;

/// Fit an n-component GMM with EM. Deterministic for a given (sample, n,
/// seed): k-means++ seeds the means, components start with uniform weights
/// and the regularized sample covariance, and every covariance update adds
/// 1e-6 to the diagonal. Stops after 100 iterations or when the relative
/// improvement in mean log-likelihood drops below 1e-6.
inline GmmModel fit_em(const PixelSample& sample, int n_components, std::uint64_t seed,
                       FitTrace* trace_out = nullptr) {
    if (n_components < 1) throw std::invalid_argument("fit_em: component count must be >= 1");
    if (sample.size() < static_cast<std::size_t>(n_components))
        throw std::invalid_argument("fit_em: sample smaller than component count");

    const std::size_t n = sample.size();
    const int k = n_components;
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::Vector3d sample_mean;
    Eigen::Matrix3d cov0;
    detail::sample_moments(sample, sample_mean, cov0);
    cov0 += detail::kCovRegularization * Eigen::Matrix3d::Identity();

    std::mt19937_64 rng(seed);
    GmmModel model;
    model.components.resize(k);
    {
        const auto means = detail::kmeanspp_means(sample, k, rng);
        for (int i = 0; i < k; ++i) {
            model.components[i].weight = 1.0 / k;
            model.components[i].mean = means[i];
            model.components[i].cov = cov0;
        }
    }

    std::vector<double> resp(n * static_cast<std::size_t>(k));
    std::vector<double> point_ll(n);
    if (trace_out) trace_out->clear();

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < detail::kMaxEmIterations; ++iter) {
        // E-step.
        const GmmScorer scorer(model);
        double ll_sum = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            double m = -std::numeric_limits<double>::infinity();
            double* r = resp.data() + x * k;
            for (int i = 0; i < k; ++i) {
                r[i] = std::log(model.components[i].weight) + scorer.log_component_density(i, sample[x]);
                m = std::max(m, r[i]);
            }
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += std::exp(r[i] - m);
            const double lse = m + std::log(acc);
            point_ll[x] = lse;
            ll_sum += lse;
            for (int i = 0; i < k; ++i) r[i] = std::exp(r[i] - lse);
        }
        const double mean_ll = ll_sum * inv_n;
        if (trace_out) trace_out->push_back(mean_ll);

        if (iter > 0 && (mean_ll - prev_ll) < detail::kEmRelTol * std::max(1.0, std::abs(prev_ll)))
            break;
        prev_ll = mean_ll;

        // M-step.
        std::vector<double> mass(k, 0.0);
        for (std::size_t x = 0; x < n; ++x)
            for (int i = 0; i < k; ++i) mass[i] += resp[x * k + i];

        // A component that lost essentially all responsibility is reseeded at
        // the points the current mixture explains worst.
        std::vector<int> rescued;
        for (int i = 0; i < k; ++i)
            if (mass[i] < 1e-8 * static_cast<double>(n)) rescued.push_back(i);
        if (!rescued.empty()) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return point_ll[a] < point_ll[b]; });
            for (std::size_t j = 0; j < rescued.size(); ++j) {
                const int i = rescued[j];
                model.components[i].mean = sample[order[j % n]];
                model.components[i].cov = cov0;
                mass[i] = 1.0;
            }
        }

        const double mass_total = std::accumulate(mass.begin(), mass.end(), 0.0);
        for (int i = 0; i < k; ++i) {
            GmmComponent& comp = model.components[i];
            comp.weight = mass[i] / mass_total;
            if (std::find(rescued.begin(), rescued.end(), i) != rescued.end()) continue;

            Eigen::Vector3d mu = Eigen::Vector3d::Zero();
            for (std::size_t x = 0; x < n; ++x) mu += resp[x * k + i] * sample[x];
            mu /= mass[i];

            Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
            for (std::size_t x = 0; x < n; ++x) {
                const Eigen::Vector3d d = sample[x] - mu;
                cov += resp[x * k + i] * (d * d.transpose());
            }
            cov /= mass[i];
            cov += detail::kCovRegularization * Eigen::Matrix3d::Identity();

            comp.mean = mu;
            comp.cov = cov;
        }

        // Floor and renormalize the weights.
        double wsum = 0.0;
        for (int i = 0; i < k; ++i) {
            model.components[i].weight = std::max(model.components[i].weight, detail::kWeightFloor);
            wsum += model.components[i].weight;
        }
        for (int i = 0; i < k; ++i) model.components[i].weight /= wsum;
    }

    return model;
}

}  // namespace maskfuse
