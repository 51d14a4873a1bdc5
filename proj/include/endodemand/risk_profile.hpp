// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "endodemand/error.hpp"

namespace endodemand {

enum class Domain { full_line, positive_half_line };

inline const char* to_string(Domain d) {
    return d == Domain::full_line ? "full_line" : "positive_half_line";
}

/// Integrated representative risk aversion R with its exact derivative.
///
/// The linear and logarithmic profiles are evaluated inline; custom profiles
/// go through type-erased callables. Profiles are immutable and safe to share
/// across threads.
class RiskProfile {
public:
    enum class Kind { linear, log, custom };

    using Function = std::function<double(double)>;

    Kind kind() const noexcept { return kind_; }
    Domain domain() const noexcept { return domain_; }
    bool lower_singularity() const noexcept { return singular_; }
    bool is_linear() const noexcept { return kind_ == Kind::linear; }
    double alpha() const noexcept { return alpha_; }
    double eta() const noexcept { return eta_; }
    double x_ref() const noexcept { return x_ref_; }

    double r(double x) const {
        switch (kind_) {
            case Kind::linear: return alpha_ * (x - x_ref_);
            case Kind::log: return eta_ == 0.0 ? 0.0 : eta_ * (std::log(x) - log_ref_);
            default: return r_(x);
        }
    }

    double r_prime(double x) const {
        switch (kind_) {
            case Kind::linear: return alpha_;
            case Kind::log: return eta_ == 0.0 ? 0.0 : eta_ / x;
            default: return r_prime_(x);
        }
    }

    /// exp(-R(x)); the log profile skips the exp/log round trip.
    double tilt(double x) const {
        if (kind_ == Kind::log) {
            if (eta_ == 0.0) return 1.0;
            if (eta_ == 1.0) return x_ref_ / x;
            return std::pow(x / x_ref_, -eta_);
        }
        return std::exp(-r(x));
    }

    /// Whether x lies in the (open) domain; the closed boundary 0 is admitted
    /// for half-line profiles without a singularity.
    bool in_domain(double x) const {
        if (domain_ == Domain::full_line) return std::isfinite(x);
        return singular_ ? x > 0.0 : x >= 0.0;
    }

    static RiskProfile make_linear(double alpha, double x_ref) {
        RiskProfile p;
        p.kind_ = Kind::linear;
        p.domain_ = Domain::full_line;
        p.alpha_ = alpha;
        p.x_ref_ = x_ref;
        return p;
    }

    static RiskProfile make_log(double eta, double x_ref) {
        RiskProfile p;
        p.kind_ = Kind::log;
        p.domain_ = Domain::positive_half_line;
        p.eta_ = eta;
        p.x_ref_ = x_ref;
        p.log_ref_ = std::log(x_ref);
        p.singular_ = eta > 0.0;
        return p;
    }

    static RiskProfile make_custom(Function r, Function r_prime, Domain domain, bool lower_singularity) {
        RiskProfile p;
        p.kind_ = Kind::custom;
        p.domain_ = domain;
        p.singular_ = domain == Domain::positive_half_line && lower_singularity;
        p.r_ = std::move(r);
        p.r_prime_ = std::move(r_prime);
        return p;
    }

private:
    RiskProfile() = default;

    Kind kind_ = Kind::linear;
    Domain domain_ = Domain::full_line;
    bool singular_ = false;
    double alpha_ = 0.0;
    double eta_ = 0.0;
    double x_ref_ = 0.0;
    double log_ref_ = 0.0;
    Function r_;
    Function r_prime_;
};

/// R(x) = alpha (x - x_ref) on the whole line.
inline RiskProfile linear_profile(double alpha, double x_ref) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("linear profile needs alpha > 0");
    if (!std::isfinite(x_ref)) throw DomainError("linear profile needs a finite reference point");
    return RiskProfile::make_linear(alpha, x_ref);
}

/// R(x) = eta (log x - log x_ref) on the positive half-line. eta = 0 is the
/// risk-neutral profile R = 0.
inline RiskProfile log_profile(double eta, double x_ref) {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("log profile needs eta >= 0");
    if (!(x_ref > 0.0) || !std::isfinite(x_ref)) throw DomainError("log profile needs x_ref > 0");
    return RiskProfile::make_log(eta, x_ref);
}

/// Interval on which grid validation samples a profile.
struct WorkingInterval {
    double lower;
    double upper;
};

struct ProfileViolation {
    double x;
    std::string what;
};

/// Grid check of a profile: r strictly increasing, r' positive and
/// nonincreasing, and r' consistent with central differences of r to 1e-6
/// relative. Returns every violating grid point.
inline std::vector<ProfileViolation> validate_profile(const RiskProfile& profile,
                                                      WorkingInterval interval,
                                                      std::size_t grid_points = 1024) {
    if (!(interval.upper > interval.lower) || grid_points < 3)
        throw DomainError("validation interval is empty");
    std::vector<ProfileViolation> out;
    std::vector<double> xs(grid_points), r(grid_points), rp(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i) {
        xs[i] = interval.lower + (interval.upper - interval.lower) * static_cast<double>(i) /
                                     static_cast<double>(grid_points - 1);
        r[i] = profile.r(xs[i]);
        rp[i] = profile.r_prime(xs[i]);
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t i = 0; i < grid_points; ++i) {
        if (!std::isfinite(r[i]) || !std::isfinite(rp[i])) {
            out.push_back({xs[i], "non-finite value"});
            continue;
        }
        if (!(rp[i] > 0.0)) out.push_back({xs[i], "r_prime not positive"});
        if (i > 0) {
            if (!(r[i] > r[i - 1])) out.push_back({xs[i], "r not strictly increasing"});
            if (rp[i] > rp[i - 1] + 1e-12 * std::max(std::abs(rp[i]), std::abs(rp[i - 1])))
                out.push_back({xs[i], "r_prime increasing (r not concave)"});
        }
        if (i > 0 && i + 1 < grid_points) {
            double h = 1e-5 * std::max(1.0, std::abs(xs[i]));
            double hi = profile.r(xs[i] + h);
            double lo = profile.r(xs[i] - h);
            double fd = (hi - lo) / (2.0 * h);
            double noise = 8.0 * eps * (std::abs(hi) + std::abs(lo)) / (2.0 * h);
            if (std::abs(fd - rp[i]) > 1e-6 * std::abs(rp[i]) + noise) {
                std::ostringstream msg;
                msg.precision(12);
                msg << "r_prime " << rp[i] << " disagrees with finite difference " << fd;
                out.push_back({xs[i], msg.str()});
            }
        }
    }
    return out;
}

/// Custom profile from R and its exact derivative, validated on the working
/// interval. Throws DomainError listing violations.
inline RiskProfile custom_profile(RiskProfile::Function r, RiskProfile::Function r_prime,
                                  Domain domain, bool lower_singularity, WorkingInterval interval,
                                  std::size_t grid_points = 1024) {
    if (!r || !r_prime) throw DomainError("custom profile needs both r and r_prime");
    if (domain == Domain::positive_half_line && interval.lower <= 0.0)
        throw DomainError("half-line working interval must start above 0");
    auto profile = RiskProfile::make_custom(std::move(r), std::move(r_prime), domain, lower_singularity);
    auto violations = validate_profile(profile, interval, grid_points);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "custom profile violates monotonicity/concavity at " << violations.size() << " grid points:";
        std::size_t shown = 0;
        for (const auto& v : violations) {
            if (shown++ == 8) {
                msg << " ...";
                break;
            }
            msg << " [x=" << v.x << ": " << v.what << "]";
        }
        throw DomainError(msg.str());
    }
    return profile;
}

/// Default validation interval used when callers do not name one.
inline WorkingInterval default_interval(Domain domain) {
    return domain == Domain::full_line ? WorkingInterval{-10.0, 10.0} : WorkingInterval{1e-3, 10.0};
}

/// Utility specification of one market participant, described by its
/// absolute risk aversion rho(x) = -u''(x)/u'(x).
class AgentUtility {
public:
    enum class Kind { exponential, power, custom };

    static AgentUtility exponential(double alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("exponential utility needs alpha > 0");
        AgentUtility u;
        u.kind_ = Kind::exponential;
        u.param_ = alpha;
        return u;
    }

    /// Power utility with relative risk aversion eta (log utility at eta = 1).
    static AgentUtility power(double eta) {
        if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("power utility needs eta >= 0");
        AgentUtility u;
        u.kind_ = Kind::power;
        u.param_ = eta;
        return u;
    }

    /// Custom aversion. `log_marginal` (log u') is optional and only used by
    /// first-order-condition diagnostics.
    static AgentUtility custom(std::function<double(double)> rho, Domain domain = Domain::full_line,
                               std::function<double(double)> log_marginal = {}) {
        if (!rho) throw DomainError("custom utility needs a risk aversion function");
        AgentUtility u;
        u.kind_ = Kind::custom;
        u.domain_ = domain;
        u.rho_ = std::move(rho);
        u.log_marginal_ = std::move(log_marginal);
        return u;
    }

    Kind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return param_; }

    Domain domain() const noexcept {
        if (kind_ == Kind::exponential) return Domain::full_line;
        if (kind_ == Kind::power) return Domain::positive_half_line;
        return domain_;
    }

    double rho(double x) const {
        switch (kind_) {
            case Kind::exponential: return param_;
            case Kind::power: return param_ / x;
            default: return rho_(x);
        }
    }

    bool has_log_marginal() const { return kind_ != Kind::custom || static_cast<bool>(log_marginal_); }

    /// log u'(x) up to an additive constant.
    double log_marginal(double x) const {
        switch (kind_) {
            case Kind::exponential: return -param_ * x;
            case Kind::power: return -param_ * std::log(x);
            default:
                if (!log_marginal_) throw DomainError("custom utility has no marginal utility");
                return log_marginal_(x);
        }
    }

private:
    AgentUtility() = default;

    Kind kind_ = Kind::exponential;
    Domain domain_ = Domain::full_line;
    double param_ = 1.0;
    std::function<double(double)> rho_;
    std::function<double(double)> log_marginal_;
};

/// n (sum_i 1 / rho_i(y_i))^{-1}: the harmonic representative aversion.
inline double harmonic_aversion(std::span<const AgentUtility> agents, std::span<const double> wealth) {
    if (agents.empty()) throw DomainError("harmonic aversion needs at least one agent");
    if (agents.size() != wealth.size()) throw DomainError("one wealth level per agent required");
    double tolerance_sum = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        double rho = agents[i].rho(wealth[i]);
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            std::ostringstream msg;
            msg << "agent " << i << " has non-positive risk aversion " << rho << " at wealth " << wealth[i];
            throw DomainError(msg.str());
        }
        tolerance_sum += 1.0 / rho;
    }
    return static_cast<double>(agents.size()) / tolerance_sum;
}

}  // namespace endodemand
