// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "endodemand/error.hpp"
#include "endodemand/parallel.hpp"
#include "endodemand/risk_profile.hpp"
#include "endodemand/scenario.hpp"

namespace endodemand {

enum class ExistenceDiagnosis { full_line_guaranteed, boundary_ok, boundary_fails, singular_atom };

inline const char* to_string(ExistenceDiagnosis d) {
    switch (d) {
        case ExistenceDiagnosis::full_line_guaranteed: return "full_line_guaranteed";
        case ExistenceDiagnosis::boundary_ok: return "boundary_ok";
        case ExistenceDiagnosis::boundary_fails: return "boundary_fails";
        default: return "singular_atom";
    }
}

enum class Existence { fair_price, liquidity_capped, full_line };

inline const char* to_string(Existence e) {
    switch (e) {
        case Existence::fair_price: return "fair_price";
        case Existence::liquidity_capped: return "liquidity_capped";
        default: return "full_line";
    }
}

/// Sufficient conditions for at most one clearing price. The last two are
/// checked on a finite z-grid and are therefore grid certificates, not proofs.
struct UniquenessCertificates {
    bool comonotone = false;
    bool linear_R = false;
    bool monotone_map = false;
    bool concave_map = false;

    bool any() const { return comonotone || linear_R || monotone_map || concave_map; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (comonotone) out.emplace_back("comonotone");
        if (linear_R) out.emplace_back("linear_R");
        if (monotone_map) out.emplace_back("monotone_map");
        if (concave_map) out.emplace_back("concave_map");
        return out;
    }
};

struct ExistenceReport {
    ExistenceDiagnosis diagnosis = ExistenceDiagnosis::full_line_guaranteed;
    double boundary = std::numeric_limits<double>::infinity();  // ess_inf(X + Z)
    std::optional<double> h_at_boundary;                          // H_Z(boundary) or its sampled liminf
    bool liminf_used = false;
};

struct ClearOptions {
    std::size_t grid_points = 2049;
    double tolerance = 1e-10;
    /// Skip the single-bisection shortcut even when a certificate holds.
    bool force_scan = false;
};

struct ClearingResult {
    std::vector<double> roots;
    double selected = 0.0;
    Existence existence = Existence::full_line;
    ExistenceDiagnosis diagnosis = ExistenceDiagnosis::full_line_guaranteed;
    UniquenessCertificates certificates;
    double bracket_resolution = 0.0;
    double scan_lower = 0.0;
    double scan_upper = 0.0;
    bool scanned = false;
};

/// Aggregate endowment X, liquidated claim Z and risk profile R.
///
/// Scenarios are stored in a canonical order (sorted by Z, then X, then
/// weight), so every reduction is independent of the caller's scenario order.
class ClearingProblem {
public:
    /// `order_hint` is a candidate canonical order (e.g. from a rescaled Z); it
    /// is used only if it verifies, otherwise the scenarios are sorted.
    ClearingProblem(RandomVariable X, RandomVariable Z, RiskProfile profile,
                    std::span<const std::size_t> order_hint = {})
        : X_(std::move(X)), Z_(std::move(Z)), profile_(std::move(profile)) {
        require_same_space(X_, Z_);
        const std::size_t n = X_.size();
        std::vector<std::size_t> order(n);
        if (order_hint.size() == n)
            std::copy(order_hint.begin(), order_hint.end(), order.begin());
        else
            std::iota(order.begin(), order.end(), std::size_t{0});
        auto w = X_.space()->weights();
        auto less = [&](std::size_t i, std::size_t j) {
            if (Z_[i] != Z_[j]) return Z_[i] < Z_[j];
            if (X_[i] != X_[j]) return X_[i] < X_[j];
            return w[i] < w[j];
        };
        if (!std::is_sorted(order.begin(), order.end(), less)) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), less);
        }
        perm_ = std::move(order);
        x_.resize(n);
        z_.resize(n);
        w_.resize(n);
        y_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            x_[k] = X_[perm_[k]];
            z_[k] = Z_[perm_[k]];
            w_[k] = w[perm_[k]];
            y_[k] = x_[k] + z_[k];
        }
        inf_x_ = ess_inf(X_);
        inf_z_ = ess_inf(Z_);
        sup_z_ = ess_sup(Z_);
        double min_y = *std::min_element(y_.begin(), y_.end());
        inf_y_ = (X_.law_floor() || Z_.law_floor()) ? std::min(min_y, inf_x_ + inf_z_) : min_y;
        for (std::size_t k = 0; k < n; ++k)
            if (y_[k] == inf_y_) mass_at_inf_y_ += w_[k];
        x_deterministic_ = X_.is_deterministic();

        // Sorted by z: comonotone iff every block of equal z sits at or above the
        // largest y of all smaller z.
        comonotone_ = true;
        double running = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n;) {
            std::size_t end = k;
            double lo = y_[k], hi = y_[k];
            while (end < n && z_[end] == z_[k]) {
                lo = std::min(lo, y_[end]);
                hi = std::max(hi, y_[end]);
                ++end;
            }
            if (lo < running) {
                comonotone_ = false;
                break;
            }
            running = std::max(running, hi);
            k = end;
        }

        if (!profile_.in_domain(inf_x_)) {
            std::ostringstream msg;
            msg << "ess_inf X = " << inf_x_ << " lies outside the " << to_string(profile_.domain())
                << " profile domain";
            throw DomainError(msg.str());
        }
    }

    const RandomVariable& X() const noexcept { return X_; }
    const RandomVariable& Z() const noexcept { return Z_; }
    const RiskProfile& profile() const noexcept { return profile_; }

    double ess_inf_z() const noexcept { return inf_z_; }
    double ess_sup_z() const noexcept { return sup_z_; }
    double ess_inf_x() const noexcept { return inf_x_; }
    /// ess_inf(X + Z), honoring law floors.
    double ess_inf_total() const noexcept { return inf_y_; }
    double mass_at_ess_inf_total() const noexcept { return mass_at_inf_y_; }
    bool x_deterministic() const noexcept { return x_deterministic_; }
    bool z_and_total_comonotone() const noexcept { return comonotone_; }
    /// Original scenario index of each canonical position.
    std::span<const std::size_t> canonical_order() const noexcept { return perm_; }

    std::size_t size() const noexcept { return x_.size(); }
    std::span<const double> canonical_x() const noexcept { return x_; }
    std::span<const double> canonical_z() const noexcept { return z_; }
    std::span<const double> canonical_weights() const noexcept { return w_; }

    /// Half-line guard band below ess_inf(X + Z).
    double guard() const noexcept { return 1e-9 * std::max(1.0, std::abs(inf_y_)); }

    /// Weighted sums of exp(-R(X + Z - v) - shift) with the largest exponent
    /// removed. `shift` is returned so callers can undo it.
    struct TiltSums {
        double mass = 0.0;    // E[e]
        double first = 0.0;   // E[Z e]
        double centered = 0.0;  // E[(Z - v) e], exact sign at the ends of [ess_inf Z, ess_sup Z]
        double shift = 0.0;   // max exponent
    };

    TiltSums tilt_sums(double v) const {
        const std::size_t n = x_.size();
        thread_local std::vector<double> scratch;
        scratch.resize(n);
        double emax = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            double arg = y_[k] - v;
            if (!profile_.in_domain(arg)) domain_failure(k, v, arg);
            double e = -profile_.r(arg);
            if (std::isnan(e) || e == -std::numeric_limits<double>::infinity() ||
                e == std::numeric_limits<double>::infinity())
                domain_failure(k, v, arg);
            scratch[k] = e;
            emax = std::max(emax, e);
        }
        TiltSums s;
        s.shift = emax;
        for (std::size_t k = 0; k < n; ++k) {
            double t = w_[k] * std::exp(scratch[k] - emax);
            s.mass += t;
            s.first += t * z_[k];
            s.centered += t * (z_[k] - v);
        }
        return s;
    }

    /// Theta_Z(v) divided by exp(shift): same sign, never overflows.
    double theta_scaled(double v) const {
        return tilt_sums(v).centered;
    }

private:
    [[noreturn]] void domain_failure(std::size_t k, double v, double arg) const {
        std::ostringstream msg;
        msg.precision(17);
        msg << "X + Z - v = " << arg << " at scenario " << perm_[k] << " (v = " << v
            << ") lies outside the " << to_string(profile_.domain()) << " profile domain";
        throw DomainError(msg.str());
    }

    RandomVariable X_;
    RandomVariable Z_;
    RiskProfile profile_;
    std::vector<std::size_t> perm_;
    std::vector<double> x_, z_, w_, y_;
    double inf_x_ = 0.0, inf_z_ = 0.0, sup_z_ = 0.0, inf_y_ = 0.0, mass_at_inf_y_ = 0.0;
    bool x_deterministic_ = false;
    bool comonotone_ = false;

};

/// H_Z(v): the exponentially tilted expectation of Z.
inline double h_map(const ClearingProblem& problem, double v) {
    auto s = problem.tilt_sums(v);
    return s.first / s.mass;
}

/// Theta_Z(v) = E[(Z - v) exp(-R(X + Z - v))]. May overflow to +-inf for
/// extreme tilts; the sign is always meaningful.
inline double theta(const ClearingProblem& problem, double v) {
    auto s = problem.tilt_sums(v);
    return s.centered * std::exp(s.shift);
}

namespace detail {

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

/// Scan interval [ess_inf Z, upper].
inline std::pair<double, double> scan_interval(const ClearingProblem& p) {
    double lower = p.ess_inf_z();
    double upper = p.ess_sup_z();
    if (p.profile().domain() == Domain::positive_half_line) {
        double cap = p.ess_inf_total();
        if (p.profile().lower_singularity()) cap -= p.guard();
        upper = std::min(upper, cap);
    }
    return {lower, std::max(lower, upper)};
}

/// Bracketed root of Theta on [lo, hi] (TOMS 748) to the given width.
/// `lo_sign` is the nonzero sign at lo; the sign at hi is assumed opposite.
inline double bisect(const ClearingProblem& p, double lo, double hi, double width, int lo_sign = 1) {
    if (!(hi > lo)) return lo;
    auto f = [&](double v) { return p.theta_scaled(v); };
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (sign_of(flo) == sign_of(fhi)) {
        // Rounding at an endpoint can flip the recorded sign; fall back to halving.
        for (int it = 0; it < 400 && hi - lo > width; ++it) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            int s = sign_of(f(mid));
            if (s == 0) return mid;
            (s == lo_sign ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    auto done = [width](double a, double b) { return std::abs(b - a) <= width; };
    std::uintmax_t max_iter = 400;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, done, max_iter);
    return 0.5 * (r.first + r.second);
}

inline std::vector<double> theta_signs_on_grid(const ClearingProblem& p, std::span<const double> grid) {
    std::vector<double> vals(grid.size());
    if (grid.size() * p.size() < (1u << 17)) {
        for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = p.theta_scaled(grid[i]);
    } else {
        parallel_for(grid.size(), [&](std::size_t i) { vals[i] = p.theta_scaled(grid[i]); });
    }
    return vals;
}

}  // namespace detail

/// Existence classification together with the boundary evaluation it used.
inline ExistenceReport existence_report(const ClearingProblem& p) {
    ExistenceReport r;
    if (p.profile().domain() == Domain::full_line) return r;
    const double m = p.ess_inf_total();
    r.boundary = m;
    if (p.profile().lower_singularity() && p.mass_at_ess_inf_total() > 0.0) {
        r.diagnosis = ExistenceDiagnosis::singular_atom;
        return r;
    }
    try {
        r.h_at_boundary = h_map(p, m);
    } catch (const DomainError&) {
        // H undefined at the boundary: sample v_k increasing to m and keep the
        // smallest of the trailing values as the liminf estimate.
        r.liminf_used = true;
        double gap = m - p.ess_inf_z();
        if (!(gap > 0.0)) gap = std::max(1.0, std::abs(m));
        std::vector<double> tail;
        for (int k = 1; k <= 40; ++k) {
            double v = m - gap * std::ldexp(1.0, -k);
            if (!(v < m)) break;
            try {
                tail.push_back(h_map(p, v));
            } catch (const DomainError&) {
            }
        }
        if (tail.empty()) throw DomainError("H_Z is undefined on every probe below ess_inf(X + Z)");
        std::size_t keep = std::min<std::size_t>(10, tail.size());
        r.h_at_boundary = *std::min_element(tail.end() - static_cast<std::ptrdiff_t>(keep), tail.end());
        r.diagnosis = *r.h_at_boundary < m ? ExistenceDiagnosis::boundary_ok : ExistenceDiagnosis::boundary_fails;
        return r;
    }
    r.diagnosis = *r.h_at_boundary <= m ? ExistenceDiagnosis::boundary_ok : ExistenceDiagnosis::boundary_fails;
    return r;
}

inline ExistenceDiagnosis existence_diagnosis(const ClearingProblem& p) { return existence_report(p).diagnosis; }

/// Evaluates the four sufficient uniqueness conditions. (c) uses that R' is
/// nonincreasing, so z R'(X + z) <= 1 at the smallest X implies it for every
/// X. (d) is checked for every distinct X value, up to `max_distinct_x`;
/// beyond that it is reported as not certified.
inline UniquenessCertificates uniqueness_certificates(const ClearingProblem& p, std::size_t z_points = 512,
                                                      std::size_t max_distinct_x = 4096) {
    UniquenessCertificates c;
    c.comonotone = p.x_deterministic() || p.z_and_total_comonotone();
    c.linear_R = p.profile().is_linear();
    const auto& R = p.profile();
    const double span = p.ess_sup_z() - p.ess_inf_z();
    auto grid_z = [&](std::size_t k) {
        return span * static_cast<double>(k) / static_cast<double>(z_points - 1);
    };

    {
        const double x = p.ess_inf_x();
        bool ok = true;
        for (std::size_t k = 0; k < z_points && ok; ++k) {
            double z = grid_z(k);
            if (!R.in_domain(x + z)) continue;
            double rp = R.r_prime(x + z);
            if (!std::isfinite(rp)) continue;
            ok = z * rp <= 1.0 + 1e-12;
        }
        c.monotone_map = ok;
    }

    std::vector<double> xs(p.canonical_x().begin(), p.canonical_x().end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() <= max_distinct_x && span > 0.0) {
        bool ok = true;
        std::vector<double> g(z_points);
        for (double x : xs) {
            double gmax = 0.0;
            std::size_t first = 0;
            for (std::size_t k = 0; k < z_points; ++k) {
                double z = grid_z(k);
                if (!R.in_domain(x + z)) {
                    first = k + 1;
                    continue;
                }
                g[k] = z * std::exp(-R.r(x + z));
                gmax = std::max(gmax, std::abs(g[k]));
            }
            const double noise = 16.0 * std::numeric_limits<double>::epsilon() * gmax;
            for (std::size_t k = first + 1; k + 1 < z_points; ++k) {
                if (g[k - 1] - 2.0 * g[k] + g[k + 1] > noise) {
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        c.concave_map = ok;
    } else if (span == 0.0) {
        c.concave_map = true;
    }
    return c;
}

/// Every sign change of Theta on [ess_inf Z, upper], refined by bisection to
/// width tol * max(1, |upper|). Roots closer than one grid cell may merge.
inline std::vector<double> find_all_roots(const ClearingProblem& p, std::size_t grid_points = 2049,
                                          double tol = 1e-10) {
    if (grid_points < 3) throw DomainError("find_all_roots needs at least 3 grid points");
    if (!(tol > 0.0)) throw DomainError("root tolerance must be positive");
    auto [lower, upper] = detail::scan_interval(p);
    if (upper == lower) {
        if (detail::sign_of(p.theta_scaled(lower)) == 0) return {lower};
        return {};
    }
    std::vector<double> grid(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k)
        grid[k] = lower + (upper - lower) * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    grid.back() = upper;
    auto vals = detail::theta_signs_on_grid(p, grid);
    const double width = tol * std::max(1.0, std::abs(upper));
    std::vector<double> roots;
    for (std::size_t k = 0; k < grid_points; ++k) {
        int s = detail::sign_of(vals[k]);
        if (s == 0) {
            roots.push_back(grid[k]);
            continue;
        }
        if (k + 1 < grid_points) {
            int t = detail::sign_of(vals[k + 1]);
            if (t != 0 && t != s) {
                roots.push_back(detail::bisect(p, grid[k], grid[k + 1], width, s));
            }
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

namespace detail {

inline ClearingResult finish(const ClearingProblem& p, ClearingResult res, const ExistenceReport& ex) {
    res.diagnosis = ex.diagnosis;
    const bool half = p.profile().domain() == Domain::positive_half_line;
    if (half && res.roots.empty() &&
        (ex.diagnosis == ExistenceDiagnosis::boundary_ok || ex.diagnosis == ExistenceDiagnosis::singular_atom)) {
        // The crossing lies inside the guard band: report it at the scan bound.
        res.roots.push_back(res.scan_upper);
    }
    if (!res.roots.empty()) {
        res.selected = res.roots.front();
        res.existence = half ? Existence::fair_price : Existence::full_line;
    } else if (half) {
        res.selected = p.ess_inf_total();
        res.existence = Existence::liquidity_capped;
    } else {
        throw ConvergenceError("no sign change of Theta found on a full-line profile");
    }
    return res;
}

}  // namespace detail

/// V-bar(Z): the smallest clearing price, or ess_inf(X + Z) when the market
/// cannot absorb Z at a fair price (half-line profiles only).
inline ClearingResult clear(const ClearingProblem& p, const ClearOptions& opt = {}) {
    if (opt.grid_points < 3) throw DomainError("clear needs at least 3 grid points");
    if (!(opt.tolerance > 0.0)) throw DomainError("root tolerance must be positive");
    ClearingResult res;
    res.certificates = uniqueness_certificates(p);
    auto ex = existence_report(p);
    auto [lower, upper] = detail::scan_interval(p);
    res.scan_lower = lower;
    res.scan_upper = upper;
    const double width = opt.tolerance * std::max(1.0, std::abs(upper));

    if (!opt.force_scan && (res.certificates.comonotone || res.certificates.linear_R)) {
        // Theta - v is strictly decreasing here, so one bracket holds the only root.
        res.bracket_resolution = width;
        if (upper == lower) {
            if (detail::sign_of(p.theta_scaled(lower)) == 0) res.roots.push_back(lower);
        } else {
            int s_hi = detail::sign_of(p.theta_scaled(upper));
            if (s_hi == 0) {
                res.roots.push_back(upper);
            } else if (s_hi < 0) {
                int s_lo = detail::sign_of(p.theta_scaled(lower));
                if (s_lo == 0)
                    res.roots.push_back(lower);
                else
                    res.roots.push_back(detail::bisect(p, lower, upper, width));
            }
        }
        return detail::finish(p, std::move(res), ex);
    }

    res.scanned = true;
    res.bracket_resolution = (upper - lower) / static_cast<double>(opt.grid_points - 1);
    res.roots = find_all_roots(p, opt.grid_points, opt.tolerance);
    return detail::finish(p, std::move(res), ex);
}

/// sup{v >= ess_inf Z : Theta_Z(v) >= 0, ess_inf(X + Z) - v in the domain}.
/// Equals the selected price whenever a uniqueness certificate holds.
inline double sup_representation_price(const ClearingProblem& p, std::size_t grid_points = 2049,
                                       double tol = 1e-10) {
    auto [lower, upper] = detail::scan_interval(p);
    if (upper == lower) return lower;
    if (p.profile().domain() == Domain::positive_half_line && p.theta_scaled(upper) >= 0.0)
        return p.ess_inf_total();
    double last_ok = lower;
    std::size_t last_k = 0;
    for (std::size_t k = 0; k < grid_points; ++k) {
        double v = lower + (upper - lower) * static_cast<double>(k) / static_cast<double>(grid_points - 1);
        if (p.theta_scaled(v) >= 0.0) {
            last_ok = v;
            last_k = k;
        }
    }
    if (last_k + 1 >= grid_points) return last_ok;
    double hi = lower + (upper - lower) * static_cast<double>(last_k + 1) / static_cast<double>(grid_points - 1);
    return detail::bisect(p, last_ok, hi, tol * std::max(1.0, std::abs(upper)));
}

/// Prices under a systemic-ruin Bernoulli factor: for each p the space is
/// extended by an independent B ~ Bernoulli(p) and both Z and X collapse to
/// their essential infima on {B = 0}.
inline std::vector<double> ruin_limit_price(const ClearingProblem& problem, std::span<const double> p_sequence,
                                            const ClearOptions& opt = {}) {
    const auto& R = problem.profile();
    if (R.domain() != Domain::positive_half_line || !R.lower_singularity())
        throw DomainError("ruin limit needs a half-line profile with a lower singularity");
    if (!uniqueness_certificates(problem).any())
        throw DomainError("ruin limit needs a uniqueness certificate");
    const double inf_x = problem.ess_inf_x();
    const double inf_z = problem.ess_inf_z();
    const double m = problem.ess_inf_total();
    if (std::abs(m - (inf_x + inf_z)) > 1e-12 * std::max(1.0, std::abs(m)))
        throw DomainError("ruin limit needs ess_inf(X + Z) = ess_inf X + ess_inf Z");
    for (std::size_t i = 0; i < p_sequence.size(); ++i) {
        double p = p_sequence[i];
        if (!(p > 0.0 && p < 1.0)) throw DomainError("ruin probabilities must lie in (0, 1)");
        if (i > 0 && !(p > p_sequence[i - 1])) throw DomainError("p_sequence must be increasing");
    }

    const auto& X = problem.X();
    const auto& Z = problem.Z();
    std::vector<double> out;
    out.reserve(p_sequence.size());
    for (double p : p_sequence) {
        auto bern = bernoulli_variable(p);
        ProductSpace prod(X.space(), bern.space());
        auto B = prod.lift_right(bern);
        auto Xl = prod.lift_left(X);
        auto Zl = prod.lift_left(Z);
        std::vector<double> xp(B.size()), zp(B.size());
        for (std::size_t k = 0; k < B.size(); ++k) {
            xp[k] = B[k] * (Xl[k] - inf_x) + inf_x;
            zp[k] = B[k] * (Zl[k] - inf_z) + inf_z;
        }
        ClearingProblem cp(RandomVariable(prod.space(), std::move(xp), inf_x),
                           RandomVariable(prod.space(), std::move(zp), inf_z), R);
        out.push_back(clear(cp, opt).selected);
    }
    return out;
}

}  // namespace endodemand
