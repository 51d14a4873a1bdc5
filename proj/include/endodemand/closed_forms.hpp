// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "endodemand/error.hpp"
#include "endodemand/scenario.hpp"

// Analytic prices and inverse demand functions for a market of exponential
// utility agents. Kept independent of the numeric engine so they can serve as
// its oracles.

namespace endodemand {

class EsscherMarket {
public:
    explicit EsscherMarket(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Esscher market needs alpha > 0");
    }

    /// Aggregated aversion (sum 1/alpha_i)^{-1} of exponential agents.
    static EsscherMarket from_agents(std::span<const double> alphas) {
        if (alphas.empty()) throw DomainError("need at least one agent");
        double tol = 0.0;
        for (double a : alphas) {
            if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("agent aversion must be positive");
            tol += 1.0 / a;
        }
        return EsscherMarket(1.0 / tol);
    }

    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
};

/// E[Z e^{-alpha Z}] / E[e^{-alpha Z}].
inline double esscher_price(const EsscherMarket& market, const RandomVariable& Z) {
    const double a = market.alpha();
    auto w = Z.space()->weights();
    double lo = Z.min_value();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < Z.size(); ++i) {
        double t = w[i] * std::exp(-a * (Z[i] - lo));
        num += t * Z[i];
        den += t;
    }
    return num / den;
}

struct CurvePair {
    double f = 0.0;
    double f_bar = 0.0;
};

struct NormalCurves {
    Eigen::VectorXd f;
    Eigen::VectorXd f_bar;
};

/// q ~ N(mu, C): f = mu - 2 alpha C s, f-bar = mu - alpha C s. The normal law
/// is unbounded, so general engine guarantees do not cover it.
inline NormalCurves normal_curves(const EsscherMarket& market, const Eigen::VectorXd& mu, const Eigen::MatrixXd& C,
                                  const Eigen::VectorXd& s) {
    if (C.rows() != C.cols() || C.rows() != mu.size() || s.size() != mu.size())
        throw DomainError("normal curves: dimension mismatch");
    if (!C.allFinite()) throw DomainError("covariance has non-finite entries");
    double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
    if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw DomainError("covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) throw DomainError("covariance is not positive semidefinite");
    Eigen::VectorXd Cs = C * s;
    return {mu - 2.0 * market.alpha() * Cs, mu - market.alpha() * Cs};
}

inline void require_nonnegative_s(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("s must be finite and >= 0");
}

inline CurvePair poisson_curves(const EsscherMarket& market, double lambda, double s) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("poisson needs lambda > 0");
    require_nonnegative_s(s);
    const double as = market.alpha() * s;
    double fb = lambda * std::exp(-as);
    return {(1.0 - as) * fb, fb};
}

inline CurvePair bernoulli_curves(const EsscherMarket& market, double p, double s) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli needs p in [0, 1]");
    require_nonnegative_s(s);
    const double as = market.alpha() * s;
    // Divide through by e^{as} so large s does not overflow.
    const double g = std::exp(-as);
    const double d = p * g + (1.0 - p);
    double fb = p * g / d;
    double f = (p * p * g * g + (1.0 - as) * p * (1.0 - p) * g) / (d * d);
    return {f, fb};
}

inline CurvePair gamma_curves(const EsscherMarket& market, double k, double theta, double s) {
    if (!(k > 0.0) || !(theta > 0.0)) throw DomainError("gamma needs k > 0 and theta > 0");
    require_nonnegative_s(s);
    const double d = 1.0 + market.alpha() * theta * s;
    return {k * theta / (d * d), k * theta / d};
}

struct CounterexampleReport {
    double skewness = 0.0;
    double s = 0.0;                   // 1 / alpha
    double f_bar = 0.0;               // f-bar(1 / alpha)
    double f_bar_second = 0.0;        // alpha^2 E^Q[(q - f-bar)^3]
    double second_difference = 0.0;   // central second difference with h = 1e-3 / alpha
};

/// q in {0, 1, 16} with probabilities (0.02, 0.49, 0.49): positive skew, yet
/// f-bar is concave at s = 1 / alpha.
inline CounterexampleReport discrete_counterexample_report(const EsscherMarket& market) {
    static constexpr double support[] = {0.0, 1.0, 16.0};
    static constexpr double probs[] = {0.02, 0.49, 0.49};
    const double a = market.alpha();

    double mean = 0.0;
    for (int i = 0; i < 3; ++i) mean += probs[i] * support[i];
    double m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < 3; ++i) {
        double d = support[i] - mean;
        m2 += probs[i] * d * d;
        m3 += probs[i] * d * d * d;
    }

    auto fbar = [&](double s) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 3; ++i) {
            double t = probs[i] * std::exp(-a * s * support[i]);
            num += t * support[i];
            den += t;
        }
        return num / den;
    };

    CounterexampleReport r;
    r.skewness = m3 / std::pow(m2, 1.5);
    r.s = 1.0 / a;
    r.f_bar = fbar(r.s);
    double den = 0.0, c3 = 0.0;
    for (int i = 0; i < 3; ++i) den += probs[i] * std::exp(-a * r.s * support[i]);
    for (int i = 0; i < 3; ++i) {
        double d = support[i] - r.f_bar;
        c3 += probs[i] * std::exp(-a * r.s * support[i]) / den * d * d * d;
    }
    r.f_bar_second = a * a * c3;
    const double h = 1e-3 / a;
    r.second_difference = (fbar(r.s + h) - 2.0 * r.f_bar + fbar(r.s - h)) / (h * h);
    return r;
}

}  // namespace endodemand
