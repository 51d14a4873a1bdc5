// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "property_checks.hpp"

namespace {

void expect_report(const props::Report& r) {
    EXPECT_GE(r.fixtures, 100u) << r.summary();
    EXPECT_EQ(r.failures, 0u) << r.summary();
}

}  // namespace

TEST(Properties, Bounds) { expect_report(props::bounds()); }
TEST(Properties, Translativity) { expect_report(props::translativity()); }
TEST(Properties, LawInvariance) { expect_report(props::law_invariance()); }
TEST(Properties, LipschitzMonotoneUnderMonotoneMap) { expect_report(props::lipschitz_monotone()); }
TEST(Properties, ConcavityUnderConcaveMap) { expect_report(props::concavity()); }
TEST(Properties, VwapNonincreasingAboveFloor) { expect_report(props::vwap_shape()); }
TEST(Properties, IntegralIdentity) { expect_report(props::integral_identity()); }
TEST(Properties, EsscherAlphaMonotone) { expect_report(props::esscher_alpha_monotone()); }
TEST(Properties, NoCrossImpactForIndependentAssets) { expect_report(props::no_cross_impact()); }
TEST(Properties, OracleEquivalence) { expect_report(props::oracle_equivalence()); }

TEST(Properties, HMapMatchesOracle) {
    std::mt19937_64 rng(109);
    std::size_t checked = 0;
    for (const auto& f : fixtures::clearing_suite()) {
        auto p = f.problem();
        auto [lo, hi] = endodemand::detail::scan_interval(p);
        auto R = f.oracle_r();
        for (double v : oracle::random_values(rng, 10, lo, hi)) {
            double want = static_cast<double>(oracle::h(f.market, R, v));
            EXPECT_NEAR(endodemand::h_map(p, v), want, 1e-12 * std::max(1.0, std::abs(want))) << f.name;
            ++checked;
        }
    }
    EXPECT_GE(checked, 1000u);
}
