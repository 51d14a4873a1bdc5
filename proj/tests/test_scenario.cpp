// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "endodemand/sampling.hpp"
#include "endodemand/scenario.hpp"
#include "oracles.hpp"

using namespace endodemand;

TEST(ScenarioSpace, RejectsBadWeights) {
    EXPECT_THROW(ScenarioSpace::make({}), DomainError);
    EXPECT_THROW(ScenarioSpace::make({0.5, 0.0, 0.5}), DomainError);
    EXPECT_THROW(ScenarioSpace::make({0.6, -0.1, 0.5}), DomainError);
    EXPECT_THROW(ScenarioSpace::make({0.5, 0.5 + 1e-10}), DomainError);
    EXPECT_THROW(ScenarioSpace::make({0.5, NAN}), DomainError);
    EXPECT_NO_THROW(ScenarioSpace::make({0.5, 0.5 + 5e-13}));
}

TEST(ScenarioSpace, LargeUniformSpaceSumsWithinTolerance) {
    EXPECT_NO_THROW(ScenarioSpace::uniform(1000000));
    EXPECT_NO_THROW(ScenarioSpace::uniform(3));
}

TEST(RandomVariable, RejectsLengthMismatchAndNonFinite) {
    auto sp = ScenarioSpace::make({0.5, 0.5});
    EXPECT_THROW(RandomVariable(sp, {1.0}), DomainError);
    EXPECT_THROW(RandomVariable(sp, {1.0, INFINITY}), DomainError);
    EXPECT_THROW(RandomVariable(sp, {1.0, 2.0}, 1.5), DomainError);
}

TEST(Expectation, Examples) {
    auto half = ScenarioSpace::make({0.5, 0.5});
    EXPECT_DOUBLE_EQ(expectation(RandomVariable(half, {0.0, 1.0})), 0.5);
    EXPECT_DOUBLE_EQ(expectation(RandomVariable::constant(half, 3.25)), 3.25);
    auto c = ScenarioSpace::make({0.01, 0.99});
    EXPECT_NEAR(expectation(RandomVariable(c, {2.0, 1e-5})), 0.0200099, 1e-15);
}

TEST(EssentialBounds, Examples) {
    auto c = ScenarioSpace::make({0.01, 0.99});
    RandomVariable Z(c, {2.0, 1e-5});
    EXPECT_EQ(ess_inf(Z), 1e-5);
    EXPECT_EQ(ess_sup(Z), 2.0);
    auto k = RandomVariable::constant(c, -4.0);
    EXPECT_EQ(ess_inf(k), -4.0);
    EXPECT_EQ(ess_sup(k), -4.0);
    auto three = ScenarioSpace::make({0.2, 0.3, 0.5});
    EXPECT_EQ(ess_inf(RandomVariable(three, {-1.0, 0.0, 3.0})), -1.0);
}

TEST(EssentialBounds, LawFloorIsHonored) {
    auto sp = ScenarioSpace::uniform(3);
    RandomVariable q(sp, {0.5, 1.0, 2.0}, 0.0);
    EXPECT_EQ(ess_inf(q), 0.0);
    EXPECT_EQ(ess_inf(2.0 * q), 0.0);
    EXPECT_EQ(ess_inf(q + 1.0), 1.0);
    EXPECT_EQ(ess_inf(q.without_floor()), 0.5);
    EXPECT_FALSE(q.is_deterministic());
}

TEST(Comonotonic, Examples) {
    auto c = ScenarioSpace::make({0.01, 0.99});
    RandomVariable Z(c, {2.0, 1e-5});
    EXPECT_TRUE(is_comonotonic(Z, Z + 7.0));
    EXPECT_FALSE(is_comonotonic(Z, RandomVariable(c, {2.0 + 1e-5, 100.0 + 1e-5})));
    auto h = ScenarioSpace::make({0.5, 0.5});
    EXPECT_TRUE(is_comonotonic(RandomVariable(h, {1.0, 2.0}), RandomVariable(h, {3.0, 3.0})));
    auto other = ScenarioSpace::make({0.25, 0.75});
    EXPECT_THROW(is_comonotonic(RandomVariable(h, {1.0, 2.0}), RandomVariable(other, {1.0, 2.0})), DomainError);
}

TEST(ScenarioProperties, LinearityBoundsAndComonotonicity) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        std::size_t n = oracle::random_size(rng, 1, 30);
        auto sp = ScenarioSpace::make(oracle::random_weights(rng, n));
        RandomVariable X(sp, oracle::random_values(rng, n, -5, 5));
        RandomVariable Z(sp, oracle::random_values(rng, n, -5, 5));
        double a = std::uniform_real_distribution<double>(-3, 3)(rng);
        double b = std::uniform_real_distribution<double>(-3, 3)(rng);
        double lhs = expectation(a * X + b * Z);
        double rhs = a * expectation(X) + b * expectation(Z);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
        EXPECT_GE(ess_inf(X + Z), ess_inf(X) + ess_inf(Z) - 1e-15);
        auto D = RandomVariable::constant(sp, a);
        EXPECT_DOUBLE_EQ(ess_inf(D + Z), a + ess_inf(Z));
        EXPECT_TRUE(is_comonotonic(Z, D + Z));
    }
}

TEST(ProductSpace, LiftsAreIndependent) {
    auto b = bernoulli_variable(0.3);
    auto q = RandomVariable(ScenarioSpace::make({0.2, 0.8}), {1.0, 4.0});
    ProductSpace prod(b.space(), q.space());
    auto B = prod.lift_left(b);
    auto Q = prod.lift_right(q);
    EXPECT_EQ(prod.space()->size(), 4u);
    EXPECT_NEAR(expectation(B), 0.3, 1e-15);
    EXPECT_NEAR(expectation(Q), expectation(q), 1e-15);
    std::vector<double> bq(4);
    for (std::size_t i = 0; i < 4; ++i) bq[i] = B[i] * Q[i];
    EXPECT_NEAR(expectation(RandomVariable(prod.space(), bq)), 0.3 * expectation(q), 1e-15);
}

TEST(Permute, MovesWeightsWithValues) {
    auto sp = ScenarioSpace::make({0.1, 0.2, 0.7});
    RandomVariable Z(sp, {1.0, 2.0, 3.0});
    std::vector<std::size_t> perm{2, 0, 1};
    auto psp = permute(*sp, perm);
    auto pZ = permute(Z, perm, psp);
    EXPECT_DOUBLE_EQ(expectation(pZ), expectation(Z));
    EXPECT_EQ(pZ[0], 3.0);
    EXPECT_EQ(psp->weight(0), 0.7);
}

TEST(Builders, PoissonAndBernoulli) {
    auto p = poisson_variable(2.0);
    EXPECT_NEAR(expectation(p), 2.0, 1e-13);
    EXPECT_NEAR(variance(p), 2.0, 1e-12);
    EXPECT_EQ(ess_inf(p), 0.0);
    auto b = bernoulli_variable(1.0);
    EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0], 1.0);
    EXPECT_THROW(bernoulli_variable(1.5), DomainError);
    EXPECT_THROW(poisson_variable(0.0), DomainError);
}

TEST(Builders, GammaQuadratureMoments) {
    auto g = gamma_variable(2.0, 1.5);
    EXPECT_NEAR(expectation(g), 3.0, 1e-12);
    EXPECT_NEAR(variance(g), 2.0 * 1.5 * 1.5, 1e-11);
    EXPECT_EQ(ess_inf(g), 0.0);
}

TEST(Sampling, Examples) {
    auto ones = sample_one({BernoulliLaw{1.0}, 1000, 5});
    for (double v : ones.values()) EXPECT_EQ(v, 1.0);

    const std::size_t N = 1000000;
    auto ln = sample_one({LognormalLaw{-0.125, 0.25}, N, 42});
    double m = expectation(ln);
    double sd = std::sqrt(variance(ln));
    EXPECT_LT(std::abs(m - 1.0), 3.0 * sd / std::sqrt(double(N)));
    EXPECT_EQ(ess_inf(ln), 0.0);

    auto po = sample_one({PoissonLaw{2.0}, N, 43});
    EXPECT_LT(std::abs(expectation(po) - 2.0), 3.0 * std::sqrt(2.0 / N) * 1.1);
}

TEST(Sampling, ReproducibleAndSeedSensitive) {
    auto a = sample_one({LognormalLaw{0.0, 1.0}, 5000, 99});
    auto b = sample_one({LognormalLaw{0.0, 1.0}, 5000, 99});
    auto c = sample_one({LognormalLaw{0.0, 1.0}, 5000, 100});
    ASSERT_EQ(a.size(), b.size());
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST(Sampling, MultivariateNormalHonorsCovariance) {
    Eigen::MatrixXd C(2, 2);
    C << 1.0, 0.6, 0.6, 2.0;
    auto v = sample({NormalLaw{{1.0, -1.0}, C}, 400000, 7});
    ASSERT_EQ(v.size(), 2u);
    EXPECT_TRUE(same_space(v[0], v[1]));
    double m0 = expectation(v[0]), m1 = expectation(v[1]);
    double acc = 0.0;
    for (std::size_t i = 0; i < v[0].size(); ++i) acc += (v[0][i] - m0) * (v[1][i] - m1);
    double cov = acc / double(v[0].size());
    EXPECT_NEAR(m0, 1.0, 0.01);
    EXPECT_NEAR(m1, -1.0, 0.01);
    EXPECT_NEAR(variance(v[0]), 1.0, 0.02);
    EXPECT_NEAR(variance(v[1]), 2.0, 0.03);
    EXPECT_NEAR(cov, 0.6, 0.02);
}

TEST(Sampling, RejectsInvalidConfigs) {
    EXPECT_THROW(sample_one({LognormalLaw{0.0, 0.0}, 10, 1}), DomainError);
    EXPECT_THROW(sample_one({GammaLaw{-1.0, 1.0}, 10, 1}), DomainError);
    EXPECT_THROW(sample_one({PoissonLaw{2.0}, 1, 1}), DomainError);
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(sample({NormalLaw{{0.0, 0.0}, bad}, 10, 1}), DomainError);
    EXPECT_THROW(sample_one({DiscreteLaw{{0.0, 1.0}, {0.5, 0.6}}, 10, 1}), DomainError);
}
