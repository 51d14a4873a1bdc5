// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic randomized fixture suites shared by the property tests and the
// acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "endodemand/clearing.hpp"
#include "endodemand/io.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace endodemand;

enum class Family { linear, log, saturating, log_deterministic_x };

struct ClearFixture {
    std::string name;
    Family family;
    double param = 1.0;  // alpha, eta or shift
    oracle::Market market;

    SpacePtr space() const { return ScenarioSpace::make(market.w); }

    RiskProfile profile() const {
        switch (family) {
            case Family::linear: return linear_profile(param, 0.0);
            case Family::saturating: return saturating_profile(param);
            default: return log_profile(param, 1.0);
        }
    }

    /// Independent evaluation of R for the oracle.
    oracle::Fn oracle_r() const {
        const double p = param;
        switch (family) {
            case Family::linear: return [p](double x) { return p * x; };
            case Family::saturating: return [p](double x) { return 1.0 - std::exp(-(x - p)); };
            default: return [p](double x) { return p * std::log(x); };
        }
    }

    ClearingProblem problem() const {
        auto sp = space();
        return ClearingProblem(RandomVariable(sp, market.x), RandomVariable(sp, market.z), profile());
    }
};

inline ClearFixture three_equilibria() {
    return {"three_equilibria", Family::saturating, 2.3, {{0.01, 0.99}, {1e-5, 100.0}, {2.0, 1e-5}}};
}

inline ClearFixture random_fixture(std::mt19937_64& rng, Family fam, std::size_t index) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t n = oracle::random_size(rng, 2, 12);
    ClearFixture f;
    f.family = fam;
    f.market.w = oracle::random_weights(rng, n);
    switch (fam) {
        case Family::linear:
            f.name = "linear";
            f.param = 0.2 + 2.8 * u(rng);
            f.market.x = oracle::random_values(rng, n, -2.0, 4.0);
            f.market.z = oracle::random_values(rng, n, -1.0, 2.0);
            break;
        case Family::log:
            f.name = "log";
            f.param = 0.3 + 2.7 * u(rng);
            f.market.x = oracle::random_values(rng, n, 0.5, 4.0);
            f.market.z = oracle::random_values(rng, n, 0.0, 2.0);
            break;
        case Family::saturating:
            f.name = "saturating";
            f.param = 3.0 * u(rng);
            f.market.x = oracle::random_values(rng, n, -1.0, 3.0);
            f.market.z = oracle::random_values(rng, n, 0.0, 2.5);
            break;
        case Family::log_deterministic_x:
            f.name = "log_det_x";
            f.param = 0.3 + 2.7 * u(rng);
            f.market.x.assign(n, 0.5 + 3.0 * u(rng));
            f.market.z = oracle::random_values(rng, n, 0.0, 2.0);
            break;
    }
    f.name += "_" + std::to_string(index);
    return f;
}

/// 30 fixtures of each family plus the three-equilibrium example.
inline std::vector<ClearFixture> clearing_suite(std::uint64_t seed = 20240501) {
    std::mt19937_64 rng(seed);
    std::vector<ClearFixture> out{three_equilibria()};
    for (auto fam : {Family::linear, Family::log, Family::saturating, Family::log_deterministic_x})
        for (std::size_t i = 0; i < 30; ++i) out.push_back(random_fixture(rng, fam, i));
    return out;
}

/// Liquidation fixture satisfying ess_inf(X + q) = ess_inf X + ess_inf q.
struct DemandFixture {
    std::string name;
    Family family;
    double param = 1.0;
    std::vector<double> w, x, q;

    RiskProfile profile() const {
        return family == Family::linear ? linear_profile(param, 0.0) : log_profile(param, 1.0);
    }
};

inline DemandFixture random_demand_fixture(std::mt19937_64& rng, std::size_t index) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t n = oracle::random_size(rng, 2, 10);
    DemandFixture f;
    int kind = static_cast<int>(index % 3);
    f.w = oracle::random_weights(rng, n);
    f.q = oracle::random_values(rng, n, 0.0, 2.0);
    if (kind == 0) {
        f.family = Family::linear;
        f.param = 0.2 + 1.8 * u(rng);
        f.x = oracle::random_values(rng, n, -1.0, 3.0);
    } else if (kind == 1) {
        f.family = Family::log;
        f.param = 0.3 + 2.0 * u(rng);
        f.x.assign(n, 0.5 + 2.5 * u(rng));
    } else {
        f.family = Family::log;
        f.param = 0.3 + 2.0 * u(rng);
        f.x = oracle::random_values(rng, n, 0.5, 3.0);
    }
    // Put the smallest X on the scenario of the smallest q.
    std::size_t iq = static_cast<std::size_t>(std::min_element(f.q.begin(), f.q.end()) - f.q.begin());
    std::size_t ix = static_cast<std::size_t>(std::min_element(f.x.begin(), f.x.end()) - f.x.begin());
    std::swap(f.x[iq], f.x[ix]);
    f.name = std::string(kind == 0 ? "linear" : kind == 1 ? "log_det_x" : "log") + "_" + std::to_string(index);
    return f;
}

}  // namespace fixtures
