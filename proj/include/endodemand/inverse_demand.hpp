// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "endodemand/clearing.hpp"
#include "endodemand/error.hpp"
#include "endodemand/parallel.hpp"
#include "endodemand/risk_profile.hpp"
#include "endodemand/scenario.hpp"

namespace endodemand {

/// Proportional liquidation of one portfolio q into a market with aggregate
/// endowment X. Enforces ess_inf(X + q) = ess_inf X + ess_inf q.
class DemandProblem {
public:
    DemandProblem(RandomVariable X, RandomVariable q, RiskProfile profile)
        : X_(std::move(X)), q_(std::move(q)), profile_(std::move(profile)) {
        require_same_space(X_, q_);
        double joint = ess_inf(X_ + q_);
        double split = ess_inf(X_) + ess_inf(q_);
        if (std::abs(joint - split) > 1e-12 * std::max(1.0, std::abs(split))) {
            std::ostringstream msg;
            msg << "joint ruin condition fails: ess_inf(X + q) = " << joint << " but ess_inf X + ess_inf q = "
                << split;
            throw DomainError(msg.str());
        }
        if (!profile_.in_domain(ess_inf(X_))) throw DomainError("ess_inf X lies outside the profile domain");
        // s q has the order of q for s > 0, so sort once.
        ClearingProblem unit(X_, q_, profile_);
        order_.assign(unit.canonical_order().begin(), unit.canonical_order().end());
    }

    const RandomVariable& X() const noexcept { return X_; }
    const RandomVariable& q() const noexcept { return q_; }
    const RiskProfile& profile() const noexcept { return profile_; }

    ClearingProblem at(double s) const {
        if (s > 0.0) return ClearingProblem(X_, s * q_, profile_, order_);
        return ClearingProblem(X_, s * q_, profile_);
    }

private:
    std::vector<std::size_t> order_;
    RandomVariable X_;
    RandomVariable q_;
    RiskProfile profile_;
};

struct DemandPoint {
    double f = 0.0;
    double f_bar = 0.0;
    bool in_domain = true;
};

struct DemandCurve {
    std::vector<double> s_grid;
    std::vector<double> f;
    std::vector<double> f_bar;
    std::vector<bool> in_domain;
    std::optional<double> dom_boundary;
};

namespace detail {

/// The order-book ratio E[q a e] / E[a e] with a = 1 - (sq - V) R'(X + sq - V).
/// Also valid for s < 0, where it is the derivative of the purchase price.
inline double density_ratio(const RandomVariable& X, const RandomVariable& q, const RiskProfile& R, double s,
                            double V) {
    const std::size_t n = X.size();
    auto w = X.space()->weights();
    std::vector<double> e(n);
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        double y = X[k] + s * q[k] - V;
        if (!R.in_domain(y)) throw DomainError("X + sq - V leaves the profile domain");
        e[k] = -R.r(y);
        emax = std::max(emax, e[k]);
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double y = X[k] + s * q[k] - V;
        double a = 1.0 - (s * q[k] - V) * R.r_prime(y);
        double t = w[k] * a * std::exp(e[k] - emax);
        num += t * q[k];
        den += t;
    }
    if (!(den > 0.0)) {
        std::ostringstream msg;
        msg << "order-book denominator " << den << " is not positive at s = " << s
            << " (uniqueness conditions fail)";
        throw DomainError(msg.str());
    }
    return num / den;
}

/// Tilted mean E[q e^{-R(X)}] / E[e^{-R(X)}].
inline double tilted_mean(const RandomVariable& X, const RandomVariable& q, const RiskProfile& R) {
    const std::size_t n = X.size();
    auto w = X.space()->weights();
    std::vector<double> e(n);
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = -R.r(X[k]);
        emax = std::max(emax, e[k]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double t = w[k] * std::exp(e[k] - emax);
        num += t * q[k];
        den += t;
    }
    return num / den;
}

inline DemandPoint evaluate(const DemandProblem& dp, double s, const ClearOptions& opt) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("liquidation amount s must be a finite s >= 0");
    DemandPoint pt;
    if (s == 0.0) {
        pt.f_bar = tilted_mean(dp.X(), dp.q(), dp.profile());
        pt.f = pt.f_bar;
        return pt;
    }
    auto res = clear(dp.at(s), opt);
    pt.f_bar = res.selected / s;
    if (res.existence == Existence::liquidity_capped) {
        pt.in_domain = false;
        pt.f = ess_inf(dp.q());
        return pt;
    }
    if (!res.certificates.any())
        throw DomainError("order-book density needs a uniqueness certificate");
    pt.f = density_ratio(dp.X(), dp.q(), dp.profile(), s, res.selected);
    return pt;
}

}  // namespace detail

/// Average price per unit when s units of q are sold.
inline double vwap(const DemandProblem& dp, double s, const ClearOptions& opt = {}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("liquidation amount s must be a finite s >= 0");
    if (s == 0.0) return detail::tilted_mean(dp.X(), dp.q(), dp.profile());
    return clear(dp.at(s), opt).selected / s;
}

/// Marginal price of the next unit after s units have been sold.
inline double order_book_density(const DemandProblem& dp, double s, const ClearOptions& opt = {}) {
    return detail::evaluate(dp, s, opt).f;
}

/// Whether s q admits a fair clearing price.
inline bool in_price_domain(const DemandProblem& dp, double s) {
    if (dp.profile().domain() == Domain::full_line || s == 0.0) return true;
    return existence_diagnosis(dp.at(s)) != ExistenceDiagnosis::boundary_fails;
}

/// First s in (lo, hi] where s q leaves dom V, located by bisection to width
/// rel_width * hi. Assumes s q is in the domain at lo and not at hi.
inline double locate_domain_boundary(const DemandProblem& dp, double lo, double hi, double rel_width = 1e-6) {
    while (hi - lo > rel_width * hi) {
        double mid = 0.5 * (lo + hi);
        if (in_price_domain(dp, mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Both inverse demand functions on a uniform grid over [0, s_max].
inline DemandCurve demand_curve(const DemandProblem& dp, double s_max, std::size_t n_points,
                                const ClearOptions& opt = {}) {
    if (n_points < 2) throw DomainError("demand curve needs at least 2 points");
    if (!(s_max > 0.0) || !std::isfinite(s_max)) throw DomainError("s_max must be positive");
    DemandCurve c;
    c.s_grid.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        c.s_grid[i] = s_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
    c.s_grid.back() = s_max;
    std::vector<DemandPoint> pts(n_points);
    parallel_for(n_points, [&](std::size_t i) { pts[i] = detail::evaluate(dp, c.s_grid[i], opt); });
    for (const auto& p : pts) {
        c.f.push_back(p.f);
        c.f_bar.push_back(p.f_bar);
        c.in_domain.push_back(p.in_domain);
    }
    if (dp.profile().domain() == Domain::positive_half_line) {
        for (std::size_t i = 1; i < n_points; ++i) {
            if (!in_price_domain(dp, c.s_grid[i])) {
                c.dom_boundary = locate_domain_boundary(dp, c.s_grid[i - 1], c.s_grid[i]);
                break;
            }
        }
    }
    return c;
}

struct LiquiditySlopes {
    double f_slope = 0.0;
    double f_bar_slope = 0.0;
};

/// Slopes of f and f-bar at s = 0 from the tilted moments of q and R'(X).
inline LiquiditySlopes liquidity_at_zero(const DemandProblem& dp) {
    const auto& X = dp.X();
    const auto& q = dp.q();
    const auto& R = dp.profile();
    const std::size_t n = X.size();
    auto w = X.space()->weights();
    std::vector<double> e(n);
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = -R.r(X[k]);
        emax = std::max(emax, e[k]);
    }
    double m0 = 0.0, mq = 0.0, mr = 0.0, mqr = 0.0, mqqr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double t = w[k] * std::exp(e[k] - emax);
        double rp = R.r_prime(X[k]);
        m0 += t;
        mq += t * q[k];
        mr += t * rp;
        mqr += t * q[k] * rp;
        mqqr += t * q[k] * q[k] * rp;
    }
    double eq = mq / m0;
    LiquiditySlopes out;
    out.f_slope = -2.0 * mqqr / m0 + 4.0 * eq * (mqr / m0) - 2.0 * eq * eq * (mr / m0);
    out.f_bar_slope = 0.5 * out.f_slope;
    return out;
}

/// Several portfolios q_1..q_m liquidated jointly in amounts s.
class CrossImpactProblem {
public:
    CrossImpactProblem(RandomVariable X, std::vector<RandomVariable> q, RiskProfile profile)
        : X_(std::move(X)), q_(std::move(q)), profile_(std::move(profile)) {
        if (q_.empty()) throw DomainError("cross-impact problem needs at least one asset");
        double split = ess_inf(X_);
        RandomVariable total = X_;
        for (const auto& qk : q_) {
            require_same_space(X_, qk);
            split += ess_inf(qk);
            total = total + qk;
        }
        double joint = ess_inf(total);
        if (std::abs(joint - split) > 1e-12 * std::max(1.0, std::abs(split)))
            throw DomainError("joint ruin condition fails for the asset vector");
    }

    const RandomVariable& X() const noexcept { return X_; }
    const std::vector<RandomVariable>& q() const noexcept { return q_; }
    const RiskProfile& profile() const noexcept { return profile_; }
    std::size_t assets() const noexcept { return q_.size(); }

    RandomVariable portfolio(std::span<const double> s) const {
        RandomVariable z = s[0] * q_[0];
        for (std::size_t k = 1; k < q_.size(); ++k) z = z + s[k] * q_[k];
        return z;
    }

private:
    RandomVariable X_;
    std::vector<RandomVariable> q_;
    RiskProfile profile_;
};

struct CrossImpactNode {
    std::vector<double> s;
    std::vector<double> f;      // per asset
    std::vector<double> f_bar;  // per asset
    bool in_domain = true;
};

namespace detail {

inline CrossImpactNode cross_node(const CrossImpactProblem& cp, std::vector<double> s, const ClearOptions& opt) {
    const std::size_t m = cp.assets();
    CrossImpactNode node;
    node.s = std::move(s);
    node.f.assign(m, 0.0);
    node.f_bar.assign(m, 0.0);
    for (double sk : node.s)
        if (!(sk >= 0.0) || !std::isfinite(sk)) throw DomainError("liquidation amounts must be finite and >= 0");

    if (m == 1) {
        DemandProblem dp(cp.X(), cp.q()[0], cp.profile());
        auto pt = evaluate(dp, node.s[0], opt);
        node.f[0] = pt.f;
        node.f_bar[0] = pt.f_bar;
        node.in_domain = pt.in_domain;
        return node;
    }

    double total = 0.0;
    for (double sk : node.s) total += sk;
    const auto& X = cp.X();
    const auto& R = cp.profile();
    if (total == 0.0) {
        for (std::size_t k = 0; k < m; ++k) {
            node.f_bar[k] = tilted_mean(X, cp.q()[k], R);
            node.f[k] = node.f_bar[k];
        }
        return node;
    }
    RandomVariable Z = cp.portfolio(node.s);
    auto res = clear(ClearingProblem(X, Z, R), opt);
    if (res.existence == Existence::liquidity_capped) {
        node.in_domain = false;
        double excess = res.selected;
        for (std::size_t k = 0; k < m; ++k) excess -= node.s[k] * ess_inf(cp.q()[k]);
        for (std::size_t k = 0; k < m; ++k) {
            node.f[k] = ess_inf(cp.q()[k]);
            node.f_bar[k] = ess_inf(cp.q()[k]) + excess / total;
        }
        return node;
    }
    if (!res.certificates.any()) throw DomainError("order-book density needs a uniqueness certificate");
    const double V = res.selected;
    const std::size_t n = X.size();
    auto w = X.space()->weights();
    std::vector<double> e(n);
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = -R.r(X[i] + Z[i] - V);
        emax = std::max(emax, e[i]);
    }
    double den_bar = 0.0, den = 0.0;
    std::vector<double> num_bar(m, 0.0), num(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double t = w[i] * std::exp(e[i] - emax);
        double a = 1.0 - (Z[i] - V) * R.r_prime(X[i] + Z[i] - V);
        den_bar += t;
        den += t * a;
        for (std::size_t k = 0; k < m; ++k) {
            double qk = cp.q()[k][i];
            num_bar[k] += t * qk;
            num[k] += t * a * qk;
        }
    }
    if (!(den > 0.0)) throw DomainError("order-book denominator is not positive (uniqueness conditions fail)");
    for (std::size_t k = 0; k < m; ++k) {
        node.f_bar[k] = num_bar[k] / den_bar;
        node.f[k] = num[k] / den;
    }
    return node;
}

}  // namespace detail

/// Per-asset f and f-bar over the Cartesian product of the per-asset grids.
/// Nodes are ordered with the last asset varying fastest.
inline std::vector<CrossImpactNode> cross_impact_grid(const CrossImpactProblem& cp,
                                                      const std::vector<std::vector<double>>& s_grids,
                                                      const ClearOptions& opt = {}) {
    if (s_grids.size() != cp.assets()) throw DomainError("one s-grid per asset required");
    std::size_t count = 1;
    for (const auto& g : s_grids) {
        if (g.empty()) throw DomainError("empty s-grid");
        count *= g.size();
    }
    std::vector<CrossImpactNode> out(count);
    parallel_for(count, [&](std::size_t idx) {
        std::vector<double> s(s_grids.size());
        std::size_t rem = idx;
        for (std::size_t k = s_grids.size(); k-- > 0;) {
            s[k] = s_grids[k][rem % s_grids[k].size()];
            rem /= s_grids[k].size();
        }
        out[idx] = detail::cross_node(cp, std::move(s), opt);
    });
    return out;
}

}  // namespace endodemand
