// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "endodemand/buhlmann.hpp"
#include "endodemand/closed_forms.hpp"
#include "oracles.hpp"

using namespace endodemand;

namespace {

struct Fixture {
    SpacePtr sp = ScenarioSpace::make({0.25, 0.35, 0.4});
    RandomVariable X1{sp, {1.0, 2.0, 3.0}};
    RandomVariable X2{sp, {2.0, 1.5, 4.0}};
    RandomVariable Z{sp, {0.3, 0.1, 0.6}};
};

AgentPopulation population(std::vector<AgentUtility> u, std::vector<RandomVariable> x) {
    std::vector<Agent> a;
    for (std::size_t i = 0; i < u.size(); ++i) a.push_back(Agent{u[i], x[i]});
    return AgentPopulation(std::move(a));
}

void check_equilibrium(const AgentPopulation& pop, const RandomVariable& Z, const EquilibriumSolution& sol) {
    const auto& X = pop.aggregate();
    EXPECT_NEAR(expectation(sol.density), 1.0, 1e-10);
    for (double d : sol.density.values()) EXPECT_GE(d, 0.0);
    double scale = std::max(1.0, ess_sup(X));
    for (std::size_t k = 0; k < X.size(); ++k) {
        double sum = 0.0;
        for (const auto& y : sol.transfers) sum += y[k];
        EXPECT_NEAR(sum, Z[k], 1e-8 * scale);
    }
    double ez = detail::q_expectation(sol.density, Z);
    EXPECT_NEAR(ez, sol.price, 1e-8);
    for (std::size_t i = 0; i < pop.size(); ++i)
        EXPECT_NEAR(detail::q_expectation(sol.density, sol.transfers[i]) - sol.lambda[i] * ez, 0.0, 1e-6);
    for (double r : foc_residuals(pop, sol)) EXPECT_LE(r, 1e-6);
}

}  // namespace

TEST(Allocations, ExponentialAgentsAreAffine) {
    Fixture f;
    auto pop = population({AgentUtility::exponential(1.0), AgentUtility::exponential(3.0)}, {f.X1, f.X2});
    const double alpha = 1.0 / (1.0 + 1.0 / 3.0);
    auto tab = integrate_allocations(pop, {1.0, 2.0}, -2.0, 10.0, 4000);
    for (double g : {-1.5, 0.0, 3.0, 7.7}) {
        EXPECT_NEAR(tab.allocation(0, g), 1.0 + alpha / 1.0 * (g - 3.0), 1e-10);
        EXPECT_NEAR(tab.allocation(1, g), 2.0 + alpha / 3.0 * (g - 3.0), 1e-10);
        EXPECT_NEAR(tab.r_prime(g), alpha, 1e-12);
    }
    EXPECT_LE(tab.conservation_residual(), 1e-9 * 12.0);
}

TEST(Allocations, SingleAgentTakesEverything) {
    Fixture f;
    auto pop = population({AgentUtility::power(2.0)}, {f.X1});
    auto tab = integrate_allocations(pop, {1.0}, 0.5, 6.0);
    for (double g : {0.6, 1.0, 2.5, 5.9}) EXPECT_NEAR(tab.allocation(0, g), g, 1e-10);
}

TEST(Allocations, EqualPowerAgentsSplitEvenly) {
    Fixture f;
    auto pop = population({AgentUtility::power(1.5), AgentUtility::power(1.5), AgentUtility::power(1.5)},
                          {f.X1, f.X2, f.X1});
    auto tab = integrate_allocations(pop, {1.0, 1.0, 1.0}, 0.3, 12.0);
    for (double g : {0.4, 3.0, 11.0})
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(tab.allocation(i, g), g / 3.0, 1e-9);
    EXPECT_THROW(tab.allocation(0, 20.0), DomainError);
}

TEST(Allocations, RejectsBadInputs) {
    Fixture f;
    auto pop = population({AgentUtility::power(1.0), AgentUtility::power(2.0)}, {f.X1, f.X2});
    EXPECT_THROW(integrate_allocations(pop, {1.0}, 0.5, 3.0), DomainError);
    EXPECT_THROW(integrate_allocations(pop, {1.0, 1.0}, 0.0, 3.0), DomainError);
    EXPECT_THROW(integrate_allocations(pop, {1.0, 1.0}, 3.0, 3.0), DomainError);
}

TEST(Equilibrium, ZeroClaimExponentialDensity) {
    Fixture f;
    auto pop = population({AgentUtility::exponential(2.0), AgentUtility::exponential(0.5)}, {f.X1, f.X2});
    const double alpha = 1.0 / (0.5 + 2.0);
    auto Z0 = RandomVariable::constant(f.sp, 0.0);
    for (bool analytic : {true, false}) {
        EquilibriumOptions opt;
        opt.allow_analytic = analytic;
        auto sol = solve_equilibrium(pop, Z0, opt);
        auto X = f.X1 + f.X2;
        double mass = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k) mass += f.sp->weight(k) * std::exp(-alpha * X[k]);
        for (std::size_t k = 0; k < X.size(); ++k)
            EXPECT_NEAR(sol.density[k], std::exp(-alpha * X[k]) / mass, 1e-8) << analytic;
        EXPECT_NEAR(sol.price, 0.0, 1e-10);
        check_equilibrium(pop, Z0, sol);
    }
}

TEST(Equilibrium, SingleAgentZeroClaimHasNoTrade) {
    Fixture f;
    auto pop = population({AgentUtility::power(1.0)}, {f.X1});
    auto sol = solve_equilibrium(pop, RandomVariable::constant(f.sp, 0.0));
    for (double y : sol.transfers[0].values()) EXPECT_NEAR(y, 0.0, 1e-12);
}

TEST(Equilibrium, ExponentialMatchesEsscherWithDeterministicEndowment) {
    auto sp = ScenarioSpace::make({0.25, 0.35, 0.4});
    auto X1 = RandomVariable::constant(sp, 1.0), X2 = RandomVariable::constant(sp, 2.5);
    RandomVariable Z(sp, {0.3, 0.1, 0.6});
    auto pop = population({AgentUtility::exponential(1.0), AgentUtility::exponential(2.0)}, {X1, X2});
    double target = esscher_price(EsscherMarket::from_agents(std::vector<double>{1.0, 2.0}), Z);
    for (bool analytic : {true, false}) {
        EquilibriumOptions opt;
        opt.allow_analytic = analytic;
        auto sol = solve_equilibrium(pop, Z, opt);
        EXPECT_NEAR(sol.price, target, 1e-8) << analytic;
        EXPECT_EQ(sol.analytic, analytic);
        check_equilibrium(pop, Z, sol);
    }
}

TEST(Equilibrium, MixedPowerPopulationSatisfiesConditions) {
    Fixture f;
    auto pop = population({AgentUtility::power(0.5), AgentUtility::power(2.0)}, {f.X1, f.X2});
    auto sol = solve_equilibrium(pop, f.Z);
    EXPECT_FALSE(sol.analytic);
    EXPECT_LE(sol.moment_residual, 1e-9);
    check_equilibrium(pop, f.Z, sol);
    auto rep = representative_profile(pop, sol);
    auto cleared = clear(ClearingProblem(pop.aggregate(), f.Z, rep));
    EXPECT_NEAR(cleared.selected, sol.price, 1e-6);
}

TEST(Equilibrium, CustomLambdaIsHonored) {
    Fixture f;
    auto pop = population({AgentUtility::exponential(1.0), AgentUtility::exponential(1.0)}, {f.X1, f.X2});
    EquilibriumOptions opt;
    opt.lambda = {0.8, 0.2};
    auto sol = solve_equilibrium(pop, f.Z, opt);
    check_equilibrium(pop, f.Z, sol);
    opt.lambda = {0.8, 0.3};
    EXPECT_THROW(solve_equilibrium(pop, f.Z, opt), DomainError);
}

TEST(Representative, ExponentialIsLinear) {
    Fixture f;
    auto pop = population({AgentUtility::exponential(1.0), AgentUtility::exponential(4.0)}, {f.X1, f.X2});
    for (bool analytic : {true, false}) {
        EquilibriumOptions opt;
        opt.allow_analytic = analytic;
        auto sol = solve_equilibrium(pop, f.Z, opt);
        auto rep = representative_profile(pop, sol);
        for (double g : {2.5, 3.5, 5.0, 7.0}) EXPECT_NEAR(rep.r_prime(g), 0.8, 1e-10);
        EXPECT_NEAR(rep.r(5.0) - rep.r(3.0), 0.8 * 2.0, 1e-8);
        auto lin = clear(ClearingProblem(pop.aggregate(), f.Z, linear_profile(0.8, 0.0))).selected;
        EXPECT_NEAR(sol.price, lin, 1e-8);
    }
}

TEST(Representative, EqualPowerIsLog) {
    Fixture f;
    auto pop = population({AgentUtility::power(1.5), AgentUtility::power(1.5)}, {f.X1, f.X2});
    EquilibriumOptions opt;
    opt.allow_analytic = false;
    auto sol = solve_equilibrium(pop, f.Z, opt);
    auto rep = representative_profile(pop, sol);
    const double c = sol.anchor;
    for (double g : {2.0, 3.0, 4.5, 7.5}) EXPECT_NEAR(rep.r(g), 1.5 * (std::log(g) - std::log(c)), 1e-6);
    auto analytic = solve_equilibrium(pop, f.Z);
    EXPECT_NEAR(sol.price, analytic.price, 1e-6);
    check_equilibrium(pop, f.Z, sol);
}

TEST(Representative, SingleCustomAgent) {
    Fixture f;
    auto rho = [](double x) { return 1.0 / (1.0 + x); };
    auto u = AgentUtility::custom(rho, Domain::positive_half_line, [](double x) { return -std::log1p(x); });
    auto pop = population({u}, {f.X1});
    auto tab = integrate_allocations(pop, {1.0}, 0.5, 5.0, 2000);
    for (std::size_t k = 0; k < tab.nodes(); k += 97) EXPECT_NEAR(tab.node_r_prime(k), rho(tab.gamma()[k]), 1e-12);
}

TEST(Representative, AversionNonincreasingForDecreasingAgentAversions) {
    Fixture f;
    auto pop = population({AgentUtility::power(0.5), AgentUtility::power(2.0), AgentUtility::power(4.0)},
                          {f.X1, f.X2, f.X1});
    auto tab = integrate_allocations(pop, {0.5, 1.5, 1.0}, 0.2, 20.0);
    for (std::size_t k = 1; k < tab.nodes(); ++k)
        EXPECT_LE(tab.node_r_prime(k), tab.node_r_prime(k - 1) * (1.0 + 1e-12));
}

TEST(Population, Validation) {
    Fixture f;
    auto other = ScenarioSpace::make({0.5, 0.5});
    EXPECT_THROW(population({AgentUtility::exponential(1.0), AgentUtility::exponential(1.0)},
                            {f.X1, RandomVariable::constant(other, 1.0)}),
                 DomainError);
    EXPECT_THROW(population({AgentUtility::power(1.0)}, {RandomVariable(f.sp, {0.0, 1.0, 2.0})}), DomainError);
    EXPECT_THROW(AgentPopulation(std::vector<Agent>{}), DomainError);
}
