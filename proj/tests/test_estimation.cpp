// SPDX-License-Identifier: Apache-2.0
//
// cellfree: cooperative downlink beamforming for cell-free massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "test_support.hpp"

namespace cellfree {
namespace {

NetworkConfig uplink(int K, int L, double snr_ul)
{
    NetworkConfig c;
    c.num_ues = K;
    c.num_aps = 1;
    c.num_pilots = L;
    c.snr_ul = snr_ul;
    return c;
}

TEST(EstimateVariance, SingleUeOnItsPilot)
{
    const NetworkConfig c = uplink(1, 10, 10.0);
    const RMat rho = RMat::Ones(1, 1);
    const RMat rho_hat = estimate_variance(rho, assign_pilots(c), c);
    EXPECT_NEAR(rho_hat(0, 0), 1.0 / 1.01, 1e-15);
    EXPECT_NEAR(rho_hat(0, 0), 0.990099, 1e-6);
}

TEST(EstimateVariance, TwoUesSharingAPilot)
{
    // K = 11, L = 10: UEs 0 and 10 share pilot 0.
    const NetworkConfig c = uplink(11, 10, 10.0);
    const RMat rho = RMat::Ones(11, 1);
    const RMat rho_hat = estimate_variance(rho, assign_pilots(c), c);
    EXPECT_NEAR(rho_hat(0, 0), 1.0 / 2.01, 1e-15);
    EXPECT_NEAR(rho_hat(10, 0), 0.49751, 1e-5);
    EXPECT_NEAR(rho_hat(1, 0), 1.0 / 1.01, 1e-15);
}

TEST(EstimateVariance, PerfectEstimationLimit)
{
    const NetworkConfig c = uplink(3, 3, 1e12);
    RMat rho(3, 1);
    rho << 0.7, 1e-3, 2.0;
    const RMat rho_hat = estimate_variance(rho, assign_pilots(c), c);
    for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(rho_hat(k, 0), rho(k, 0), 1e-9 * rho(k, 0));

    const NetworkConfig exact = uplink(3, 3, std::numeric_limits<double>::infinity());
    EXPECT_EQ(error_variance(rho, assign_pilots(exact), exact).maxCoeff(), 0.0);
}

TEST(EstimateVariance, NeverExceedsTrueVarianceAndErrorsAreConsistent)
{
    NetworkConfig c;
    c.num_ues = 17;
    c.num_aps = 9;
    c.num_pilots = 5;
    c.snr_ul = 3.0;
    const Geometry g = sample_geometry(c, 4);
    const PilotAssignment pa = assign_pilots(c);
    const RMat rho_hat = estimate_variance(g.rho, pa, c);
    const RMat rho_tilde = error_variance(g.rho, pa, c);
    for (Eigen::Index k = 0; k < rho_hat.rows(); ++k)
        for (Eigen::Index i = 0; i < rho_hat.cols(); ++i) {
            EXPECT_GT(rho_hat(k, i), 0.0);
            EXPECT_LE(rho_hat(k, i), g.rho(k, i));
            EXPECT_GE(rho_tilde(k, i), 0.0);
            EXPECT_NEAR(rho_tilde(k, i) + rho_hat(k, i), g.rho(k, i), 1e-14 * g.rho(k, i));
        }
}

TEST(EstimateVariance, ContaminationStrictlyDegradesEstimate)
{
    // Growing K with L = 2 adds UEs to UE 0's cohort one at a time.
    RMat rho(7, 1);
    rho << 1.0, 0.3, 0.5, 0.2, 0.05, 0.9, 0.4;
    double previous = std::numeric_limits<double>::infinity();
    for (int K = 1; K <= 7; K += 2) {
        const NetworkConfig c = uplink(K, 2, 10.0);
        const RMat r = estimate_variance(rho.topRows(K), assign_pilots(c), c);
        EXPECT_LT(r(0, 0), previous);
        previous = r(0, 0);
    }
}

TEST(EstimateVariance, RejectsMismatchedPilots)
{
    const NetworkConfig c = uplink(3, 2, 10.0);
    EXPECT_THROW(estimate_variance(RMat::Ones(4, 1), assign_pilots(c), c), std::invalid_argument);
}

TEST(SampleChannelSet, PerfectCsiGivesExactEstimates)
{
    NetworkConfig c;
    c.num_ues = 4;
    c.num_aps = 3;
    c.num_pilots = 4;
    c.snr_ul = std::numeric_limits<double>::infinity();
    const Geometry g = sample_geometry(c, 2);
    const ChannelSet cs = sample_channel_set(g, assign_pilots(c), c, 3);
    EXPECT_EQ(cs.rho_tilde.maxCoeff(), 0.0);
    ASSERT_TRUE(cs.h_true.has_value());
    EXPECT_EQ(*cs.h_true, cs.h_hat);
}

class ChannelSetMoments : public ::testing::Test {
protected:
    // One UE, one AP with 10^5 antennas gives 10^5 i.i.d. entries.
    void SetUp() override
    {
        c.num_ues = 2;
        c.num_aps = 1;
        c.antennas_per_ap = 100000;
        c.num_pilots = 1;
        c.snr_ul = 2.0;
        Geometry g;
        g.rho = RMat::Ones(2, 1);
        g.rho(1, 0) = 0.5;
        cs = sample_channel_set(g, assign_pilots(c), c, 77);
    }
    NetworkConfig c;
    ChannelSet cs;
};

TEST_F(ChannelSetMoments, EstimateVarianceMatches)
{
    const double n = double(cs.h_hat.rows());
    const double empirical = cs.h_hat.col(0).squaredNorm() / n;
    EXPECT_NEAR(empirical / cs.rho_hat(0, 0), 1.0, 0.02);
    const CVec err = cs.h_true->col(0) - cs.h_hat.col(0);
    EXPECT_NEAR(err.squaredNorm() / n / cs.rho_tilde(0, 0), 1.0, 0.02);
}

TEST_F(ChannelSetMoments, EstimateAndErrorUncorrelated)
{
    const CVec est = cs.h_hat.col(0);
    const CVec err = cs.h_true->col(0) - est;
    const cplx corr = est.dot(err) / (est.norm() * err.norm());
    EXPECT_LT(std::abs(corr), 0.01);
}

TEST(SampleChannelSet, ReproducibleUnderSeed)
{
    NetworkConfig c;
    const Geometry g = sample_geometry(c, 2);
    const PilotAssignment pa = assign_pilots(c);
    const ChannelSet a = sample_channel_set(g, pa, c, 5);
    const ChannelSet b = sample_channel_set(g, pa, c, 5);
    EXPECT_EQ(a.h_hat, b.h_hat);
    EXPECT_EQ(*a.h_true, *b.h_true);
    EXPECT_EQ(a.ap_channels(3), a.h_hat.middleRows(3 * c.antennas_per_ap, c.antennas_per_ap));
}

} // namespace
} // namespace cellfree
