// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "endodemand/error.hpp"

namespace endodemand {

/// Finite probability space. Weights are strictly positive and sum to one
/// within kWeightTolerance; nothing is renormalized behind the caller's back.
class ScenarioSpace {
public:
    static constexpr double kWeightTolerance = 1e-12;

    explicit ScenarioSpace(std::vector<double> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) throw DomainError("scenario space needs at least one scenario");
        // Neumaier summation: the plain sum of 1e6 equal weights drifts past the tolerance.
        double total = 0.0, carry = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            double w = weights_[i];
            if (!std::isfinite(w) || w <= 0.0) {
                std::ostringstream msg;
                msg << "scenario weight " << i << " = " << w << " is not strictly positive";
                throw DomainError(msg.str());
            }
            double t = total + w;
            carry += std::abs(total) >= w ? (total - t) + w : (w - t) + total;
            total = t;
        }
        total += carry;
        if (std::abs(total - 1.0) > kWeightTolerance) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "scenario weights sum to " << total << ", not 1";
            throw DomainError(msg.str());
        }
    }

    static std::shared_ptr<const ScenarioSpace> make(std::vector<double> weights) {
        return std::make_shared<const ScenarioSpace>(std::move(weights));
    }

    static std::shared_ptr<const ScenarioSpace> uniform(std::size_t n) {
        if (n == 0) throw DomainError("scenario space needs at least one scenario");
        return make(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t size() const noexcept { return weights_.size(); }
    std::span<const double> weights() const noexcept { return weights_; }
    double weight(std::size_t i) const { return weights_[i]; }

    bool operator==(const ScenarioSpace& other) const { return weights_ == other.weights_; }

private:
    std::vector<double> weights_;
};

using SpacePtr = std::shared_ptr<const ScenarioSpace>;

/// Real payoff per scenario.
///
/// A variable produced by sampling a continuous law may carry `law_floor`, the
/// essential infimum of that law (0 for a lognormal sample). Essential-infimum
/// queries then report the law's bound instead of the sample minimum, so a
/// finite sample does not manufacture an atom at its smallest draw. The floor
/// is propagated through shifts, nonnegative scaling and sums, where the sum
/// of floors is a valid lower bound.
class RandomVariable {
public:
    RandomVariable(SpacePtr space, std::vector<double> values,
                   std::optional<double> law_floor = std::nullopt)
        : space_(std::move(space)), values_(std::move(values)), floor_(law_floor) {
        if (!space_) throw DomainError("random variable without a scenario space");
        if (values_.size() != space_->size()) {
            std::ostringstream msg;
            msg << "random variable has " << values_.size() << " values for "
                << space_->size() << " scenarios";
            throw DomainError(msg.str());
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                std::ostringstream msg;
                msg << "random variable value at scenario " << i << " is not finite";
                throw DomainError(msg.str());
            }
        }
        if (floor_) {
            double lo = *std::min_element(values_.begin(), values_.end());
            if (!std::isfinite(*floor_) || *floor_ > lo)
                throw DomainError("law floor exceeds the smallest realized value");
        }
    }

    static RandomVariable constant(SpacePtr space, double c) {
        std::size_t n = space ? space->size() : 0;
        return RandomVariable(std::move(space), std::vector<double>(n, c));
    }

    const SpacePtr& space() const noexcept { return space_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::optional<double> law_floor() const noexcept { return floor_; }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    bool is_deterministic() const {
        return std::all_of(values_.begin(), values_.end(),
                           [&](double v) { return v == values_.front(); }) &&
               (!floor_ || *floor_ == values_.front());
    }

    /// Same values and space with the law floor dropped.
    RandomVariable without_floor() const { return RandomVariable(space_, values_); }

    friend RandomVariable operator+(const RandomVariable& a, double c) {
        std::vector<double> out(a.values_);
        for (double& v : out) v += c;
        std::optional<double> fl;
        if (a.floor_) fl = *a.floor_ + c;
        return RandomVariable(a.space_, std::move(out), fl);
    }
    friend RandomVariable operator+(double c, const RandomVariable& a) { return a + c; }
    friend RandomVariable operator-(const RandomVariable& a, double c) { return a + (-c); }

    friend RandomVariable operator*(double c, const RandomVariable& a) {
        std::vector<double> out(a.values_);
        for (double& v : out) v *= c;
        std::optional<double> fl;
        if (a.floor_ && c >= 0.0) fl = *a.floor_ * c;
        return RandomVariable(a.space_, std::move(out), fl);
    }
    friend RandomVariable operator*(const RandomVariable& a, double c) { return c * a; }

    friend RandomVariable operator+(const RandomVariable& a, const RandomVariable& b);
    friend RandomVariable operator-(const RandomVariable& a, const RandomVariable& b);

private:
    SpacePtr space_;
    std::vector<double> values_;
    std::optional<double> floor_;
};

/// True when both variables live on the same space (identical object or identical weights).
inline bool same_space(const RandomVariable& a, const RandomVariable& b) {
    return a.space() == b.space() || *a.space() == *b.space();
}

inline void require_same_space(const RandomVariable& a, const RandomVariable& b) {
    if (!same_space(a, b)) throw DomainError("random variables live on different scenario spaces");
}

inline double expectation(const RandomVariable& rv) {
    auto w = rv.space()->weights();
    double total = 0.0;
    for (std::size_t i = 0; i < rv.size(); ++i) total += w[i] * rv[i];
    return total;
}

inline double variance(const RandomVariable& rv) {
    double mean = expectation(rv);
    auto w = rv.space()->weights();
    double total = 0.0;
    for (std::size_t i = 0; i < rv.size(); ++i) total += w[i] * (rv[i] - mean) * (rv[i] - mean);
    return total;
}

inline double ess_inf(const RandomVariable& rv) {
    return rv.law_floor() ? *rv.law_floor() : rv.min_value();
}

inline double ess_sup(const RandomVariable& rv) { return rv.max_value(); }

inline RandomVariable operator+(const RandomVariable& a, const RandomVariable& b) {
    require_same_space(a, b);
    std::vector<double> out(a.values_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values_[i] + b.values_[i];
    std::optional<double> fl;
    if (a.floor_ || b.floor_) fl = ess_inf(a) + ess_inf(b);
    return RandomVariable(a.space_, std::move(out), fl);
}

inline RandomVariable operator-(const RandomVariable& a, const RandomVariable& b) {
    require_same_space(a, b);
    std::vector<double> out(a.values_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values_[i] - b.values_[i];
    return RandomVariable(a.space_, std::move(out));
}

/// Probability that rv equals its essential infimum.
inline double mass_at_ess_inf(const RandomVariable& rv) {
    double lo = ess_inf(rv);
    auto w = rv.space()->weights();
    double mass = 0.0;
    for (std::size_t i = 0; i < rv.size(); ++i)
        if (rv[i] == lo) mass += w[i];
    return mass;
}

/// (a(w) - a(w'))(b(w) - b(w')) >= 0 for every pair of scenarios. O(n log n):
/// after sorting by a, every block of equal a must sit entirely at or above
/// the largest b of all strictly smaller a.
inline bool is_comonotonic(const RandomVariable& a, const RandomVariable& b) {
    require_same_space(a, b);
    std::vector<std::size_t> order(a.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
    });
    double running_max = -INFINITY;
    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k;
        double block_min = b[order[k]];
        double block_max = b[order[k]];
        while (end < order.size() && a[order[end]] == a[order[k]]) {
            block_min = std::min(block_min, b[order[end]]);
            block_max = std::max(block_max, b[order[end]]);
            ++end;
        }
        if (block_min < running_max) return false;
        running_max = std::max(running_max, block_max);
        k = end;
    }
    return true;
}

/// Reorders scenarios (with their weights). Used to exercise law invariance.
inline RandomVariable permute(const RandomVariable& rv, std::span<const std::size_t> perm,
                              const SpacePtr& permuted_space) {
    std::vector<double> out(rv.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out[i] = rv[perm[i]];
    return RandomVariable(permuted_space, std::move(out), rv.law_floor());
}

inline SpacePtr permute(const ScenarioSpace& space, std::span<const std::size_t> perm) {
    std::vector<double> w(space.size());
    for (std::size_t i = 0; i < perm.size(); ++i) w[i] = space.weight(perm[i]);
    return ScenarioSpace::make(std::move(w));
}

/// Product of two independent spaces; joint scenario (i, j) has index i * right.size() + j.
class ProductSpace {
public:
    ProductSpace(SpacePtr left, SpacePtr right) : left_(std::move(left)), right_(std::move(right)) {
        std::vector<double> w;
        w.reserve(left_->size() * right_->size());
        for (double a : left_->weights())
            for (double b : right_->weights()) w.push_back(a * b);
        joint_ = ScenarioSpace::make(std::move(w));
    }

    const SpacePtr& space() const noexcept { return joint_; }

    RandomVariable lift_left(const RandomVariable& rv) const {
        check(rv, left_);
        std::vector<double> out;
        out.reserve(joint_->size());
        for (std::size_t i = 0; i < left_->size(); ++i)
            for (std::size_t j = 0; j < right_->size(); ++j) out.push_back(rv[i]);
        return RandomVariable(joint_, std::move(out), rv.law_floor());
    }

    RandomVariable lift_right(const RandomVariable& rv) const {
        check(rv, right_);
        std::vector<double> out;
        out.reserve(joint_->size());
        for (std::size_t i = 0; i < left_->size(); ++i)
            for (std::size_t j = 0; j < right_->size(); ++j) out.push_back(rv[j]);
        return RandomVariable(joint_, std::move(out), rv.law_floor());
    }

private:
    static void check(const RandomVariable& rv, const SpacePtr& expected) {
        if (rv.space() != expected && !(*rv.space() == *expected))
            throw DomainError("variable does not live on the factor space");
    }

    SpacePtr left_;
    SpacePtr right_;
    SpacePtr joint_;
};

/// Finite law with the given support; zero-probability atoms are dropped.
inline RandomVariable discrete_variable(std::span<const double> support,
                                        std::span<const double> probabilities) {
    if (support.size() != probabilities.size())
        throw DomainError("support and probabilities differ in length");
    std::vector<double> values;
    std::vector<double> weights;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (probabilities[i] < 0.0 || !std::isfinite(probabilities[i]))
            throw DomainError("negative or non-finite probability");
        if (probabilities[i] == 0.0) continue;
        values.push_back(support[i]);
        weights.push_back(probabilities[i]);
    }
    return RandomVariable(ScenarioSpace::make(std::move(weights)), std::move(values));
}

inline RandomVariable bernoulli_variable(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli probability outside [0, 1]");
    const double support[] = {0.0, 1.0};
    const double probs[] = {1.0 - p, p};
    return discrete_variable(support, probs);
}

/// Poisson law truncated where the remaining tail mass drops below `tail`.
/// The retained probabilities are rescaled by their total, which differs
/// from one by less than `tail`.
inline RandomVariable poisson_variable(double lambda, double tail = 1e-15) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("poisson rate must be positive");
    std::vector<double> support;
    std::vector<double> probs;
    for (int k = 0;; ++k) {
        double p = std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
        support.push_back(k);
        probs.push_back(p);
        // Geometric bound on the mass beyond k once terms are decreasing.
        if (k + 2 > lambda) {
            double next = p * lambda / (k + 1.0);
            double bound = next / (1.0 - lambda / (k + 2.0));
            if (bound < tail) break;
        }
        if (k > 100000) throw DomainError("poisson truncation did not terminate");
    }
    double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    std::vector<double> kept_support;
    std::vector<double> kept_probs;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i] / total;
        if (p <= 0.0) continue;
        kept_support.push_back(support[i]);
        kept_probs.push_back(p);
    }
    double kept_total = std::accumulate(kept_probs.begin(), kept_probs.end(), 0.0);
    for (double& p : kept_probs) p /= kept_total;
    return discrete_variable(kept_support, kept_probs);
}

}  // namespace endodemand
