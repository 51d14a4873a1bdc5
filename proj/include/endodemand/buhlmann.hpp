// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "endodemand/clearing.hpp"
#include "endodemand/error.hpp"
#include "endodemand/risk_profile.hpp"
#include "endodemand/scenario.hpp"

namespace endodemand {

struct Agent {
    AgentUtility utility;
    RandomVariable endowment;
};

/// Market participants with their endowments, all on one scenario space and
/// one utility domain.
class AgentPopulation {
public:
    explicit AgentPopulation(std::vector<Agent> agents) : agents_(std::move(agents)) {
        if (agents_.empty()) throw DomainError("population needs at least one agent");
        domain_ = agents_.front().utility.domain();
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            const auto& a = agents_[i];
            require_same_space(agents_.front().endowment, a.endowment);
            if (a.utility.domain() != domain_)
                throw DomainError("agents mix full-line and half-line utilities");
            if (a.utility.kind() == AgentUtility::Kind::power && !(a.utility.parameter() > 0.0))
                throw DomainError("power agents need eta > 0 (eta = 0 has no risk aversion)");
            if (domain_ == Domain::positive_half_line && !(a.endowment.min_value() > 0.0)) {
                std::ostringstream msg;
                msg << "agent " << i << " has a non-positive endowment on the half-line";
                throw DomainError(msg.str());
            }
            for (double x : a.endowment.values()) {
                double r = a.utility.rho(x);
                if (!(r > 0.0) || !std::isfinite(r)) {
                    std::ostringstream msg;
                    msg << "agent " << i << " has risk aversion " << r << " at " << x;
                    throw DomainError(msg.str());
                }
            }
        }
        aggregate_ = agents_.front().endowment.without_floor();
        for (std::size_t i = 1; i < agents_.size(); ++i) aggregate_ = aggregate_ + agents_[i].endowment.without_floor();
        check_lipschitz();
    }

    std::size_t size() const noexcept { return agents_.size(); }
    const Agent& operator[](std::size_t i) const { return agents_[i]; }
    const std::vector<Agent>& agents() const noexcept { return agents_; }
    Domain domain() const noexcept { return domain_; }
    const RandomVariable& aggregate() const noexcept { return aggregate_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    bool all_exponential() const {
        return std::all_of(agents_.begin(), agents_.end(),
                           [](const Agent& a) { return a.utility.kind() == AgentUtility::Kind::exponential; });
    }

    /// Common eta when every agent has power utility with the same eta.
    std::optional<double> common_power_eta() const {
        if (agents_.front().utility.kind() != AgentUtility::Kind::power) return std::nullopt;
        double eta = agents_.front().utility.parameter();
        for (const auto& a : agents_)
            if (a.utility.kind() != AgentUtility::Kind::power || a.utility.parameter() != eta) return std::nullopt;
        return eta;
    }

private:
    // Lipschitz continuity of custom full-line aversions cannot be verified for
    // opaque functions; a finite-difference slope estimate only raises warnings.
    void check_lipschitz() {
        if (domain_ != Domain::full_line) return;
        double lo = aggregate_.min_value(), hi = aggregate_.max_value();
        double pad = std::max(1.0, hi - lo);
        lo -= pad;
        hi += pad;
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            const auto& u = agents_[i].utility;
            if (u.kind() != AgentUtility::Kind::custom) continue;
            double slope = 0.0;
            const int pts = 1024;
            double prev = u.rho(lo);
            for (int k = 1; k < pts; ++k) {
                double x = lo + (hi - lo) * k / (pts - 1.0);
                double cur = u.rho(x);
                slope = std::max(slope, std::abs(cur - prev) / ((hi - lo) / (pts - 1.0)));
                prev = cur;
            }
            if (!std::isfinite(slope) || slope > 1e6) {
                std::ostringstream msg;
                msg << "agent " << i << ": risk aversion slope estimate " << slope
                    << " suggests it is not Lipschitz on [" << lo << ", " << hi << "]";
                warnings_.push_back(msg.str());
            }
        }
    }

    std::vector<Agent> agents_;
    Domain domain_ = Domain::full_line;
    RandomVariable aggregate_{ScenarioSpace::uniform(1), {0.0}};
    std::vector<std::string> warnings_;
};

/// Allocations Y_i(gamma) and the representative R(gamma) tabulated by RK4,
/// with cubic Hermite interpolation between nodes. Half-line tables are
/// uniform in log(gamma).
class AllocationTable {
public:
    std::size_t agents() const noexcept { return n_; }
    std::size_t nodes() const noexcept { return gamma_.size(); }
    double anchor() const noexcept { return c_; }
    double lower() const noexcept { return gamma_.front(); }
    double upper() const noexcept { return gamma_.back(); }
    const std::vector<double>& gamma() const noexcept { return gamma_; }
    /// max_k |sum_i Y_i(gamma_k) - gamma_k|.
    double conservation_residual() const noexcept { return conservation_; }

    double node_value(std::size_t k, std::size_t i) const { return y_[k * n_ + i]; }
    double node_r(std::size_t k) const { return r_[k]; }
    double node_r_prime(std::size_t k) const { return rp_[k]; }

    double allocation(std::size_t i, double g) const {
        auto [k, t] = locate(g);
        return hermite(g, k, y_[k * n_ + i], y_[(k + 1) * n_ + i], dy_[k * n_ + i], dy_[(k + 1) * n_ + i]);
    }

    double r(double g) const {
        auto [k, t] = locate(g);
        return hermite(g, k, r_[k], r_[k + 1], rp_[k], rp_[k + 1]);
    }

    /// R' from the ODE right-hand side, interpolated linearly between nodes.
    double r_prime(double g) const {
        auto [k, t] = locate(g);
        return rp_[k] + t * (rp_[k + 1] - rp_[k]);
    }

private:
    friend AllocationTable integrate_allocations(const AgentPopulation&, const std::vector<double>&, double, double,
                                                 std::size_t);

    std::pair<std::size_t, double> locate(double g) const {
        if (!(g >= gamma_.front() && g <= gamma_.back())) {
            std::ostringstream msg;
            msg.precision(12);
            msg << "gamma = " << g << " outside the tabulated range [" << gamma_.front() << ", " << gamma_.back()
                << "]";
            throw DomainError(msg.str());
        }
        double t = log_scale_ ? std::log(g) : g;
        std::size_t k;
        if (t < t_anchor_ && n_lo_ > 0) {
            double pos = (t - t_lo_) / dt_lo_;
            k = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_lo_ - 1)));
        } else {
            double pos = (t - t_anchor_) / dt_hi_;
            k = n_lo_ + static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n_hi_ > 0 ? n_hi_ - 1 : 0)));
        }
        k = std::min(k, gamma_.size() - 2);
        // Guard against rounding at segment edges.
        while (k > 0 && g < gamma_[k]) --k;
        while (k + 2 < gamma_.size() && g > gamma_[k + 1]) ++k;
        double h = gamma_[k + 1] - gamma_[k];
        return {k, h > 0.0 ? (g - gamma_[k]) / h : 0.0};
    }

    double hermite(double g, std::size_t k, double p0, double p1, double m0, double m1) const {
        double h = gamma_[k + 1] - gamma_[k];
        if (!(h > 0.0)) return p0;
        double t = (g - gamma_[k]) / h;
        double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * p1 +
               (t3 - t2) * h * m1;
    }

    std::size_t n_ = 0;
    double c_ = 0.0;
    bool log_scale_ = false;
    double t_lo_ = 0.0, t_anchor_ = 0.0, dt_lo_ = 1.0, dt_hi_ = 1.0;
    std::size_t n_lo_ = 0, n_hi_ = 0;
    std::vector<double> gamma_;
    std::vector<double> y_, dy_, r_, rp_;
    double conservation_ = 0.0;
};

namespace detail {

/// Right-hand side dY_i/dgamma = (1/rho_i) / S, dR/dgamma = 1/S with
/// S = sum_j 1/rho_j(Y_j).
inline void allocation_rhs(const AgentPopulation& pop, double g, const double* state, double* out) {
    const std::size_t n = pop.size();
    double S = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = state[i];
        if (pop.domain() == Domain::positive_half_line && !(y > 0.0)) {
            std::ostringstream msg;
            msg.precision(12);
            msg << "allocation of agent " << i << " left the half-line (Y = " << y << ") at gamma = " << g;
            throw DomainError(msg.str());
        }
        double rho = pop[i].utility.rho(y);
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            std::ostringstream msg;
            msg.precision(12);
            msg << "agent " << i << " has risk aversion " << rho << " at Y = " << y << " (gamma = " << g << ")";
            throw DomainError(msg.str());
        }
        out[i] = 1.0 / rho;
        S += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= S;
    out[n] = 1.0 / S;
}

}  // namespace detail

/// RK4 solution of the allocation system from initial values at gamma = c =
/// sum(initial) over [lo, hi] (extended to contain c). `steps` is the total
/// step budget, split between the two sides of c.
inline AllocationTable integrate_allocations(const AgentPopulation& pop, const std::vector<double>& initial,
                                             double lo, double hi, std::size_t steps = 10000) {
    const std::size_t n = pop.size();
    if (initial.size() != n) throw DomainError("one initial allocation per agent required");
    if (!(hi > lo)) throw DomainError("empty gamma range");
    double c = 0.0;
    for (double y : initial) c += y;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    const bool log_scale = pop.domain() == Domain::positive_half_line;
    if (log_scale && !(lo > 0.0)) throw DomainError("half-line gamma range must stay above 0");

    auto to_t = [&](double g) { return log_scale ? std::log(g) : g; };
    auto to_g = [&](double t) { return log_scale ? std::exp(t) : t; };
    const double t_lo = to_t(lo), t_c = to_t(c), t_hi = to_t(hi);
    const double total = t_hi - t_lo;
    std::size_t n_lo = t_c > t_lo ? std::max<std::size_t>(2, static_cast<std::size_t>(steps * (t_c - t_lo) / total))
                                  : 0;
    std::size_t n_hi = t_hi > t_c ? std::max<std::size_t>(2, static_cast<std::size_t>(steps * (t_hi - t_c) / total))
                                  : 0;

    AllocationTable tab;
    tab.n_ = n;
    tab.c_ = c;
    tab.log_scale_ = log_scale;
    tab.t_lo_ = t_lo;
    tab.t_anchor_ = t_c;
    tab.n_lo_ = n_lo;
    tab.n_hi_ = n_hi;
    tab.dt_lo_ = n_lo ? (t_c - t_lo) / static_cast<double>(n_lo) : 1.0;
    tab.dt_hi_ = n_hi ? (t_hi - t_c) / static_cast<double>(n_hi) : 1.0;

    const std::size_t total_nodes = n_lo + n_hi + 1;
    tab.gamma_.assign(total_nodes, 0.0);
    tab.y_.assign(total_nodes * n, 0.0);
    tab.dy_.assign(total_nodes * n, 0.0);
    tab.r_.assign(total_nodes, 0.0);
    tab.rp_.assign(total_nodes, 0.0);

    std::vector<double> state(n + 1), deriv(n + 1);
    auto store = [&](std::size_t k, double g, const std::vector<double>& s) {
        detail::allocation_rhs(pop, g, s.data(), deriv.data());
        tab.gamma_[k] = g;
        for (std::size_t i = 0; i < n; ++i) {
            tab.y_[k * n + i] = s[i];
            tab.dy_[k * n + i] = deriv[i];
        }
        tab.r_[k] = s[n];
        tab.rp_[k] = deriv[n];
    };

    // In the t variable: ds/dt = (dgamma/dt) * F(gamma, s).
    std::vector<double> k1(n + 1), k2(n + 1), k3(n + 1), k4(n + 1), tmp(n + 1);
    auto rhs_t = [&](double t, const std::vector<double>& s, std::vector<double>& out) {
        double g = to_g(t);
        detail::allocation_rhs(pop, g, s.data(), out.data());
        double scale = log_scale ? g : 1.0;
        for (double& v : out) v *= scale;
    };
    auto rk4 = [&](double t, double h, std::vector<double>& s) {
        rhs_t(t, s, k1);
        for (std::size_t j = 0; j <= n; ++j) tmp[j] = s[j] + 0.5 * h * k1[j];
        rhs_t(t + 0.5 * h, tmp, k2);
        for (std::size_t j = 0; j <= n; ++j) tmp[j] = s[j] + 0.5 * h * k2[j];
        rhs_t(t + 0.5 * h, tmp, k3);
        for (std::size_t j = 0; j <= n; ++j) tmp[j] = s[j] + h * k3[j];
        rhs_t(t + h, tmp, k4);
        for (std::size_t j = 0; j <= n; ++j) s[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    };

    for (std::size_t i = 0; i < n; ++i) state[i] = initial[i];
    state[n] = 0.0;
    store(n_lo, c, state);
    for (std::size_t k = 1; k <= n_hi; ++k) {
        double t = t_c + tab.dt_hi_ * static_cast<double>(k - 1);
        rk4(t, tab.dt_hi_, state);
        double tn = k == n_hi ? t_hi : t_c + tab.dt_hi_ * static_cast<double>(k);
        store(n_lo + k, k == n_hi ? hi : to_g(tn), state);
    }
    for (std::size_t i = 0; i < n; ++i) state[i] = initial[i];
    state[n] = 0.0;
    for (std::size_t k = 1; k <= n_lo; ++k) {
        double t = t_c - tab.dt_lo_ * static_cast<double>(k - 1);
        rk4(t, -tab.dt_lo_, state);
        double tn = k == n_lo ? t_lo : t_c - tab.dt_lo_ * static_cast<double>(k);
        store(n_lo - k, k == n_lo ? lo : to_g(tn), state);
    }

    double worst = 0.0;
    for (std::size_t k = 0; k < total_nodes; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += tab.y_[k * n + i];
        worst = std::max(worst, std::abs(sum - tab.gamma_[k]));
    }
    tab.conservation_ = worst;
    return tab;
}

struct EquilibriumOptions {
    std::size_t ode_steps = 10000;
    std::size_t max_iterations = 200;
    /// Shooting residual target, relative to max(1, |c|).
    double shooting_tolerance = 1e-12;
    /// Price tolerance, relative to max(1, |upper|).
    double price_tolerance = 1e-12;
    std::size_t price_scan_points = 17;
    /// Use the closed-form allocations for exponential and equal-eta power populations.
    bool allow_analytic = true;
    /// Proceeds shares; defaults to 1/n each.
    std::vector<double> lambda;
};

struct EquilibriumSolution {
    double price = 0.0;
    RandomVariable density{ScenarioSpace::uniform(1), {1.0}};
    std::vector<RandomVariable> transfers;
    std::vector<double> lambda;
    std::vector<double> initial;  // Y_i(c)
    double anchor = 0.0;          // c = ess_inf of the aggregate endowment
    std::shared_ptr<const AllocationTable> table;  // empty for analytic solutions
    std::vector<double> affine_slope;              // exponential: Y_i = initial_i + slope_i (gamma - c)
    std::vector<double> share;                     // equal-eta power: Y_i = share_i * gamma
    std::optional<double> linear_alpha;
    std::optional<double> power_eta;
    double moment_residual = 0.0;
    std::size_t shooting_iterations = 0;
    bool analytic = false;

    /// Y_i(gamma).
    double allocation(std::size_t i, double g) const {
        if (linear_alpha) return initial[i] + affine_slope[i] * (g - anchor);
        if (power_eta) return share[i] * g;
        return table->allocation(i, g);
    }
};

namespace detail {

struct ShootState {
    std::vector<double> y0;
    std::shared_ptr<AllocationTable> table;
    std::vector<double> residual;  // E^Q[Y_i(gamma)] - E^Q[X_i], all agents
    double theta = 0.0;            // E^Q[Z] - v
    std::vector<double> density;
};

inline double gamma_pad(double lo, double hi) { return 0.05 * std::max(hi - lo, 1e-12 * std::max(1.0, hi)); }

/// Evaluates residuals of the moment conditions for given initial values.
inline ShootState shoot(const AgentPopulation& pop, const RandomVariable& Z, double v, std::vector<double> y0,
                        double g_lo, double g_hi, const EquilibriumOptions& opt) {
    ShootState st;
    st.table = std::make_shared<AllocationTable>(integrate_allocations(pop, y0, g_lo, g_hi, opt.ode_steps));
    st.y0 = std::move(y0);
    const auto& X = pop.aggregate();
    const std::size_t m = X.size();
    const std::size_t n = pop.size();
    auto w = X.space()->weights();
    std::vector<double> e(m);
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        e[k] = -st.table->r(X[k] + Z[k] - v);
        emax = std::max(emax, e[k]);
    }
    double mass = 0.0;
    st.density.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        st.density[k] = w[k] * std::exp(e[k] - emax);
        mass += st.density[k];
    }
    for (double& d : st.density) d /= mass;  // Q-probabilities
    st.residual.assign(n, 0.0);
    double ez = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        double g = X[k] + Z[k] - v;
        ez += st.density[k] * Z[k];
        for (std::size_t i = 0; i < n; ++i)
            st.residual[i] += st.density[k] * (st.table->allocation(i, g) - pop[i].endowment[k]);
    }
    st.theta = ez - v;
    return st;
}

inline double max_abs(const std::vector<double>& v, std::size_t count) {
    double out = 0.0;
    for (std::size_t i = 0; i < count; ++i) out = std::max(out, std::abs(v[i]));
    return out;
}

/// Damped Newton on the first n-1 moment conditions; y0_n = c - sum of the rest.
inline ShootState solve_shooting(const AgentPopulation& pop, const RandomVariable& Z, double v, double c,
                                 std::vector<double> guess, double g_lo, double g_hi, const EquilibriumOptions& opt,
                                 std::size_t& iterations) {
    const std::size_t n = pop.size();
    const double scale = std::max(1.0, std::abs(c));
    auto complete = [&](const Eigen::VectorXd& u) {
        std::vector<double> y(n);
        double rest = c;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            y[i] = u[static_cast<Eigen::Index>(i)];
            rest -= y[i];
        }
        y[n - 1] = rest;
        return y;
    };
    Eigen::VectorXd u(static_cast<Eigen::Index>(n - 1));
    for (std::size_t i = 0; i + 1 < n; ++i) u[static_cast<Eigen::Index>(i)] = guess[i];
    ShootState st = shoot(pop, Z, v, complete(u), g_lo, g_hi, opt);
    if (n == 1) return st;
    const double target = opt.shooting_tolerance * scale;
    const double h = 1e-6 * scale;
    for (iterations = 0; iterations < opt.max_iterations; ++iterations) {
        double err = max_abs(st.residual, n - 1);
        if (err <= target) return st;
        const auto dim = static_cast<Eigen::Index>(n - 1);
        Eigen::MatrixXd J(dim, dim);
        Eigen::VectorXd r(dim);
        for (Eigen::Index i = 0; i < dim; ++i) r[i] = st.residual[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < dim; ++j) {
            Eigen::VectorXd up = u;
            up[j] += h;
            ShootState sp;
            double step = h;
            try {
                sp = shoot(pop, Z, v, complete(up), g_lo, g_hi, opt);
            } catch (const DomainError&) {
                up[j] = u[j] - h;
                step = -h;
                sp = shoot(pop, Z, v, complete(up), g_lo, g_hi, opt);
            }
            for (Eigen::Index i = 0; i < dim; ++i)
                J(i, j) = (sp.residual[static_cast<std::size_t>(i)] - r[i]) / step;
        }
        Eigen::VectorXd delta = J.fullPivLu().solve(-r);
        if (!delta.allFinite()) break;
        double damp = 1.0;
        bool improved = false;
        for (int tries = 0; tries < 40; ++tries, damp *= 0.5) {
            Eigen::VectorXd trial = u + damp * delta;
            try {
                ShootState ts = shoot(pop, Z, v, complete(trial), g_lo, g_hi, opt);
                if (max_abs(ts.residual, n - 1) < err) {
                    u = trial;
                    st = std::move(ts);
                    improved = true;
                    break;
                }
            } catch (const DomainError&) {
            }
        }
        if (!improved) break;
    }
    double err = max_abs(st.residual, n - 1);
    if (err <= target) return st;
    std::ostringstream msg;
    msg.precision(6);
    msg << "shooting did not converge after " << iterations << " iterations at v = " << v << "; residuals:";
    for (std::size_t i = 0; i + 1 < n; ++i) msg << ' ' << st.residual[i];
    throw ConvergenceError(msg.str());
}

inline std::vector<double> resolve_lambda(const AgentPopulation& pop, const EquilibriumOptions& opt) {
    const std::size_t n = pop.size();
    if (opt.lambda.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    if (opt.lambda.size() != n) throw DomainError("one lambda per agent required");
    double total = 0.0;
    for (double l : opt.lambda) total += l;
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("lambda must sum to 1");
    return opt.lambda;
}

inline void assemble_transfers(const AgentPopulation& pop, const RandomVariable& Z, EquilibriumSolution& sol) {
    const auto& X = pop.aggregate();
    const std::size_t n = pop.size();
    sol.transfers.clear();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> y(X.size());
        for (std::size_t k = 0; k < X.size(); ++k) {
            double g = X[k] + Z[k] - sol.price;
            y[k] = -pop[i].endowment[k] + sol.allocation(i, g) + sol.lambda[i] * sol.price;
        }
        sol.transfers.emplace_back(X.space(), std::move(y));
    }
}

inline RandomVariable density_from(const RandomVariable& X, const RandomVariable& Z, const RiskProfile& R, double v) {
    auto w = X.space()->weights();
    std::vector<double> e(X.size());
    double emax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < X.size(); ++k) {
        e[k] = -R.r(X[k] + Z[k] - v);
        emax = std::max(emax, e[k]);
    }
    double mass = 0.0;
    for (std::size_t k = 0; k < X.size(); ++k) {
        e[k] = std::exp(e[k] - emax);
        mass += w[k] * e[k];
    }
    for (double& d : e) d /= mass;
    return RandomVariable(X.space(), std::move(e));
}

inline double q_expectation(const RandomVariable& density, const RandomVariable& Y) {
    auto w = density.space()->weights();
    double out = 0.0;
    for (std::size_t k = 0; k < Y.size(); ++k) out += w[k] * density[k] * Y[k];
    return out;
}

}  // namespace detail

/// Price, pricing density, allocations and transfers of the modified
/// equilibrium in which Z is sold into the population.
inline EquilibriumSolution solve_equilibrium(const AgentPopulation& pop, const RandomVariable& Z,
                                             const EquilibriumOptions& opt = {}) {
    require_same_space(pop.aggregate(), Z);
    const auto& X = pop.aggregate();
    const std::size_t n = pop.size();
    EquilibriumSolution sol;
    sol.lambda = detail::resolve_lambda(pop, opt);
    sol.anchor = X.min_value();
    const double c = sol.anchor;

    auto analytic = [&](const RiskProfile& R) {
        ClearingProblem cp(X, Z.without_floor(), R);
        auto res = clear(cp, ClearOptions{2049, opt.price_tolerance, false});
        if (res.existence == Existence::liquidity_capped)
            throw DomainError("Z admits no fair clearing price in this population");
        sol.price = res.selected;
        sol.density = detail::density_from(X, Z, R, sol.price);
        sol.analytic = true;
    };

    if (opt.allow_analytic && pop.all_exponential()) {
        double tol = 0.0;
        for (const auto& a : pop.agents()) tol += 1.0 / a.utility.parameter();
        const double alpha = 1.0 / tol;
        analytic(linear_profile(alpha, c));
        sol.linear_alpha = alpha;
        double eg = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k)
            eg += X.space()->weight(k) * sol.density[k] * (X[k] + Z[k] - sol.price);
        for (std::size_t i = 0; i < n; ++i) {
            double slope = alpha / pop[i].utility.parameter();
            sol.affine_slope.push_back(slope);
            sol.initial.push_back(detail::q_expectation(sol.density, pop[i].endowment) - slope * (eg - c));
        }
    } else if (opt.allow_analytic && pop.common_power_eta()) {
        const double eta = *pop.common_power_eta();
        analytic(log_profile(eta, c));
        sol.power_eta = eta;
        double eg = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k)
            eg += X.space()->weight(k) * sol.density[k] * (X[k] + Z[k] - sol.price);
        for (std::size_t i = 0; i < n; ++i) {
            sol.share.push_back(detail::q_expectation(sol.density, pop[i].endowment) / eg);
            sol.initial.push_back(sol.share.back() * c);
        }
    } else {
        // Tabulate over every gamma the price search can visit.
        const double lower_v = ess_inf(Z);
        double upper_v = ess_sup(Z);
        const double m = (X + Z.without_floor()).min_value();
        const bool half = pop.domain() == Domain::positive_half_line;
        const double guard = 1e-9 * std::max(1.0, std::abs(m));
        if (half) upper_v = std::min(upper_v, m - guard);
        if (upper_v < lower_v) upper_v = lower_v;
        const double g_max = (X + Z.without_floor()).max_value() - lower_v;
        const double g_min = m - upper_v;
        double g_lo = std::min(c, g_min);
        double g_hi = std::max(c, g_max);
        double pad = detail::gamma_pad(g_lo, g_hi);
        g_hi += pad;
        g_lo = half ? 0.5 * g_lo : g_lo - pad;

        std::vector<double> guess(n);
        double ex = expectation(X);
        for (std::size_t i = 0; i < n; ++i) {
            double ei = expectation(pop[i].endowment);
            guess[i] = ex != 0.0 ? c * ei / ex : c / static_cast<double>(n);
        }

        std::size_t iters = 0;
        std::vector<double> warm = guess;
        auto eval = [&](double v) {
            auto st = detail::solve_shooting(pop, Z, v, c, warm, g_lo, g_hi, opt, iters);
            warm = st.y0;
            return st;
        };

        const double width = opt.price_tolerance * std::max(1.0, std::abs(upper_v));
        detail::ShootState best;
        if (upper_v == lower_v) {
            best = eval(lower_v);
            sol.price = lower_v;
        } else {
            const std::size_t pts = std::max<std::size_t>(3, opt.price_scan_points);
            double prev_v = lower_v;
            auto prev = eval(lower_v);
            std::optional<std::pair<double, double>> bracket;
            if (prev.theta == 0.0) bracket = {lower_v, lower_v};
            for (std::size_t k = 1; k < pts && !bracket; ++k) {
                double v = lower_v + (upper_v - lower_v) * static_cast<double>(k) / static_cast<double>(pts - 1);
                auto cur = eval(v);
                if (cur.theta == 0.0)
                    bracket = {v, v};
                else if ((cur.theta > 0.0) != (prev.theta > 0.0))
                    bracket = {prev_v, v};
                prev_v = v;
                prev = std::move(cur);
            }
            if (!bracket) {
                if (half) throw DomainError("Z admits no fair clearing price in this population");
                throw ConvergenceError("no sign change of E^Q[Z] - v found");
            }
            double lo = bracket->first, hi = bracket->second;
            if (lo != hi) {
                warm = guess;
                double s_lo = eval(lo).theta > 0.0 ? 1.0 : -1.0;
                while (hi - lo > width) {
                    double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    auto st = eval(mid);
                    if (st.theta == 0.0) {
                        lo = hi = mid;
                        break;
                    }
                    if ((st.theta > 0.0) == (s_lo > 0.0))
                        lo = mid;
                    else
                        hi = mid;
                }
            }
            sol.price = 0.5 * (lo + hi);
            best = eval(sol.price);
        }
        sol.shooting_iterations = iters;
        sol.initial = best.y0;
        sol.table = best.table;
        std::vector<double> dens(X.size());
        for (std::size_t k = 0; k < X.size(); ++k) dens[k] = best.density[k] / X.space()->weight(k);
        sol.density = RandomVariable(X.space(), std::move(dens));
    }

    detail::assemble_transfers(pop, Z, sol);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> yi(X.size());
        for (std::size_t k = 0; k < X.size(); ++k) yi[k] = sol.allocation(i, X[k] + Z[k] - sol.price);
        worst = std::max(worst, std::abs(detail::q_expectation(sol.density, RandomVariable(X.space(), std::move(yi))) -
                                         detail::q_expectation(sol.density, pop[i].endowment)));
    }
    sol.moment_residual = worst;
    return sol;
}

/// R of the harmonic representative agent along the solved allocations.
inline RiskProfile representative_profile(const AgentPopulation& pop, const EquilibriumSolution& sol) {
    if (sol.linear_alpha) return linear_profile(*sol.linear_alpha, sol.anchor);
    if (sol.power_eta) return log_profile(*sol.power_eta, sol.anchor);
    if (!sol.table) throw DomainError("solution carries no allocation table");
    auto table = sol.table;
    return RiskProfile::make_custom([table](double g) { return table->r(g); },
                                    [table](double g) { return table->r_prime(g); }, pop.domain(),
                                    pop.domain() == Domain::positive_half_line);
}

/// Largest scenariowise deviation between u_i'(Y_i(gamma)) / E[u_i'(Y_i(gamma))]
/// and the pricing density, per agent. Needs log-marginal utilities.
inline std::vector<double> foc_residuals(const AgentPopulation& pop, const EquilibriumSolution& sol) {
    const auto& X = pop.aggregate();
    auto w = X.space()->weights();
    std::vector<double> out;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& u = pop[i].utility;
        if (!u.has_log_marginal()) throw DomainError("agent has no marginal utility for the FOC check");
        std::vector<double> lm(X.size());
        double lmax = -std::numeric_limits<double>::infinity();
        const double eq = detail::q_expectation(sol.density, sol.transfers[i]);
        for (std::size_t k = 0; k < X.size(); ++k) {
            double wealth = pop[i].endowment[k] + sol.transfers[i][k] - eq;
            lm[k] = u.log_marginal(wealth);
            lmax = std::max(lmax, lm[k]);
        }
        double mass = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k) {
            lm[k] = std::exp(lm[k] - lmax);
            mass += w[k] * lm[k];
        }
        double worst = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k) worst = std::max(worst, std::abs(lm[k] / mass - sol.density[k]));
        out.push_back(worst);
    }
    return out;
}

}  // namespace endodemand
