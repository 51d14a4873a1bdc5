// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "endodemand/error.hpp"
#include "endodemand/scenario.hpp"

namespace endodemand {

struct NormalLaw {
    std::vector<double> mean;
    Eigen::MatrixXd covariance;
};

struct LognormalLaw {
    double mu = 0.0;
    double sigma2 = 1.0;
};

struct GammaLaw {
    double shape = 1.0;
    double scale = 1.0;
};

struct PoissonLaw {
    double lambda = 1.0;
};

struct BernoulliLaw {
    double p = 0.5;
};

struct DiscreteLaw {
    std::vector<double> support;
    std::vector<double> probabilities;
};

using Law = std::variant<NormalLaw, LognormalLaw, GammaLaw, PoissonLaw, BernoulliLaw, DiscreteLaw>;

struct SamplingConfig {
    Law law;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline void require_psd(const Eigen::MatrixXd& c) {
    if (c.rows() != c.cols()) throw DomainError("covariance matrix is not square");
    if (!c.allFinite()) throw DomainError("covariance matrix has non-finite entries");
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()))
        throw DomainError("covariance matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
        throw DomainError("covariance matrix is not positive semidefinite");
}

/// Square root factor A with A A^T = C, tolerant of singular C.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

inline void validate(const Law& law) {
    std::visit(
        [](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, NormalLaw>) {
                if (l.mean.empty()) throw DomainError("normal law needs a mean vector");
                if (static_cast<std::size_t>(l.covariance.rows()) != l.mean.size())
                    throw DomainError("normal covariance dimension does not match the mean");
                require_psd(l.covariance);
            } else if constexpr (std::is_same_v<T, LognormalLaw>) {
                if (!(l.sigma2 > 0.0) || !std::isfinite(l.mu)) throw DomainError("lognormal needs sigma2 > 0");
            } else if constexpr (std::is_same_v<T, GammaLaw>) {
                if (!(l.shape > 0.0) || !(l.scale > 0.0)) throw DomainError("gamma needs k > 0 and theta > 0");
            } else if constexpr (std::is_same_v<T, PoissonLaw>) {
                if (!(l.lambda > 0.0)) throw DomainError("poisson needs lambda > 0");
            } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                if (!(l.p >= 0.0 && l.p <= 1.0)) throw DomainError("bernoulli needs p in [0, 1]");
            } else {
                if (l.support.empty() || l.support.size() != l.probabilities.size())
                    throw DomainError("discrete law needs matching support and probabilities");
                double total = 0.0;
                for (double p : l.probabilities) {
                    if (!(p >= 0.0)) throw DomainError("discrete law has a negative probability");
                    total += p;
                }
                if (std::abs(total - 1.0) > ScenarioSpace::kWeightTolerance)
                    throw DomainError("discrete law probabilities do not sum to 1");
            }
        },
        law);
}

}  // namespace detail

/// Draws `sample_count` equally weighted scenarios. Returns one variable per
/// law dimension (only the multivariate normal has more than one), all on the
/// same space. Identical configs give bitwise-identical values.
inline std::vector<RandomVariable> sample(const SamplingConfig& config) {
    if (config.sample_count < 2) throw DomainError("sample_count must be at least 2");
    detail::validate(config.law);
    const std::size_t n = config.sample_count;
    auto space = ScenarioSpace::uniform(n);
    std::mt19937_64 rng(config.seed);

    return std::visit(
        [&](const auto& law) -> std::vector<RandomVariable> {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, NormalLaw>) {
                const std::size_t m = law.mean.size();
                Eigen::MatrixXd factor = detail::covariance_factor(law.covariance);
                std::normal_distribution<double> normal(0.0, 1.0);
                std::vector<std::vector<double>> cols(m, std::vector<double>(n));
                Eigen::VectorXd z(m);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t k = 0; k < m; ++k) z[k] = normal(rng);
                    Eigen::VectorXd x = factor * z;
                    for (std::size_t k = 0; k < m; ++k) cols[k][i] = law.mean[k] + x[k];
                }
                std::vector<RandomVariable> out;
                for (auto& c : cols) out.emplace_back(space, std::move(c));
                return out;
            } else if constexpr (std::is_same_v<T, LognormalLaw>) {
                std::normal_distribution<double> normal(law.mu, std::sqrt(law.sigma2));
                std::vector<double> v(n);
                for (double& x : v) x = std::exp(normal(rng));
                return {RandomVariable(space, std::move(v), 0.0)};
            } else if constexpr (std::is_same_v<T, GammaLaw>) {
                std::gamma_distribution<double> gamma(law.shape, law.scale);
                std::vector<double> v(n);
                for (double& x : v) x = gamma(rng);
                return {RandomVariable(space, std::move(v), 0.0)};
            } else if constexpr (std::is_same_v<T, PoissonLaw>) {
                std::poisson_distribution<long long> poisson(law.lambda);
                std::vector<double> v(n);
                for (double& x : v) x = static_cast<double>(poisson(rng));
                return {RandomVariable(space, std::move(v), 0.0)};
            } else if constexpr (std::is_same_v<T, BernoulliLaw>) {
                std::bernoulli_distribution bern(law.p);
                std::vector<double> v(n);
                for (double& x : v) x = bern(rng) ? 1.0 : 0.0;
                double floor = law.p < 1.0 ? 0.0 : 1.0;
                return {RandomVariable(space, std::move(v), floor)};
            } else {
                std::discrete_distribution<std::size_t> pick(law.probabilities.begin(),
                                                             law.probabilities.end());
                std::vector<double> v(n);
                for (double& x : v) x = law.support[pick(rng)];
                double floor = INFINITY;
                for (std::size_t k = 0; k < law.support.size(); ++k)
                    if (law.probabilities[k] > 0.0) floor = std::min(floor, law.support[k]);
                return {RandomVariable(space, std::move(v), floor)};
            }
        },
        config.law);
}

inline RandomVariable sample_one(const SamplingConfig& config) {
    auto out = sample(config);
    if (out.size() != 1) throw DomainError("law is multivariate; use sample()");
    return std::move(out.front());
}

/// Gamma(shape, scale) discretized by generalized Gauss-Laguerre quadrature.
/// Expectations of smooth functions with moderate exponential decay are exact
/// to near machine precision with the default 64 nodes.
inline RandomVariable gamma_variable(double shape, double scale, std::size_t nodes = 64) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw DomainError("gamma needs k > 0 and theta > 0");
    if (nodes < 2) throw DomainError("gamma quadrature needs at least 2 nodes");
    const double a = shape - 1.0;
    const int n = static_cast<int>(nodes);

    // Golub-Welsch seeds for the nodes, then Newton polish on L_n^{(a)}.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        jacobi(i, i) = 2.0 * i + a + 1.0;
        if (i + 1 < n) {
            double off = std::sqrt((i + 1.0) * (i + 1.0 + a));
            jacobi(i, i + 1) = off;
            jacobi(i + 1, i) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);

    std::vector<double> x(n);
    std::vector<double> w(n);
    const double log_norm = std::lgamma(a + n) - std::lgamma(static_cast<double>(n)) - std::lgamma(a + 1.0);
    for (int i = 0; i < n; ++i) {
        double z = eig.eigenvalues()[i];
        double pp = 0.0;
        double p2 = 0.0;
        for (int iter = 0; iter < 20; ++iter) {
            double p1 = 1.0;
            p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0 + a - z) * p2 - (j + a) * p3) / (j + 1.0);
            }
            pp = (n * p1 - (n + a) * p2) / z;
            double step = p1 / pp;
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        // Weight normalized by Gamma(a + 1) so the weights form a probability vector.
        w[i] = -std::exp(log_norm) / (pp * n * p2);
    }
    double total = 0.0;
    for (double v : w) total += v;
    std::vector<double> values;
    std::vector<double> weights;
    for (int i = 0; i < n; ++i) {
        double p = w[i] / total;
        if (!(p > 0.0)) continue;
        values.push_back(x[i] * scale);
        weights.push_back(p);
    }
    double kept = 0.0;
    for (double p : weights) kept += p;
    for (double& p : weights) p /= kept;
    return RandomVariable(ScenarioSpace::make(std::move(weights)), std::move(values), 0.0);
}

}  // namespace endodemand
