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

#include <set>

namespace cellfree {
namespace {

TEST(PathLoss, ReferenceDistanceGivesUnitGain) { EXPECT_DOUBLE_EQ(path_loss(30.0, 30.0, 3.0), 1.0); }

TEST(PathLoss, TenTimesReferenceDistance) { EXPECT_NEAR(path_loss(300.0, 30.0, 3.0), 1e-3, 1e-15); }

TEST(PathLoss, ClampsBelowOneMetre)
{
    EXPECT_DOUBLE_EQ(path_loss(0.0, 30.0, 3.0), path_loss(1.0, 30.0, 3.0));
    EXPECT_DOUBLE_EQ(path_loss(0.25, 30.0, 3.0), path_loss(1.0, 30.0, 3.0));
    EXPECT_TRUE(std::isfinite(path_loss(0.0, 30.0, 3.0)));
}

TEST(PathLoss, StrictlyDecreasingInDistance)
{
    for (double eta : {0.5, 2.0, 3.0, 4.5}) {
        double prev = path_loss(1.0, 30.0, eta);
        for (double d = 1.5; d < 1000.0; d *= 1.3) {
            const double now = path_loss(d, 30.0, eta);
            EXPECT_LT(now, prev) << "eta=" << eta << " d=" << d;
            prev = now;
        }
    }
}

TEST(NetworkConfig, RejectsInvalidFields)
{
    NetworkConfig ok;
    EXPECT_NO_THROW(ok.validate());
    auto broken = [&](auto mutate) {
        NetworkConfig c = ok;
        mutate(c);
        return c;
    };
    EXPECT_THROW(broken([](NetworkConfig& c) { c.num_ues = 0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.num_pilots = 0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.radius = 0.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.pathloss_exp = -1.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.snr_ul = 0.0; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.per_ap_budget = {1.0}; }).validate(), std::invalid_argument);
    EXPECT_THROW(broken([](NetworkConfig& c) { c.per_ap_budget.assign(std::size_t(c.num_aps), 0.0); }).validate(),
                 std::invalid_argument);
}

TEST(NetworkConfig, BudgetsDefaultToDownlinkSnr)
{
    NetworkConfig c;
    c.num_aps = 3;
    c.snr_dl = 100.0;
    EXPECT_TRUE(c.budgets().isApprox(RVec::Constant(3, 100.0)));
    c.per_ap_budget = {1.0, 2.0, 3.0};
    EXPECT_DOUBLE_EQ(c.budgets()(2), 3.0);
}

TEST(SampleGeometry, SameSeedSameGeometry)
{
    NetworkConfig c;
    const Geometry a = sample_geometry(c, 42);
    const Geometry b = sample_geometry(c, 42);
    EXPECT_EQ(a.rho, b.rho);
    for (std::size_t k = 0; k < a.ue_positions.size(); ++k) {
        EXPECT_EQ(a.ue_positions[k].x, b.ue_positions[k].x);
        EXPECT_EQ(a.ue_positions[k].y, b.ue_positions[k].y);
    }
    const Geometry other = sample_geometry(c, 43);
    EXPECT_NE(a.rho, other.rho);
}

TEST(SampleGeometry, PositionsInsideDiskAndGainsFollowDistance)
{
    NetworkConfig c;
    c.num_ues = 20;
    c.num_aps = 30;
    const Geometry g = sample_geometry(c, 5);
    ASSERT_EQ(g.rho.rows(), 20);
    ASSERT_EQ(g.rho.cols(), 30);
    for (const auto& p : g.ue_positions)
        EXPECT_LE(std::hypot(p.x, p.y), c.radius);
    for (const auto& p : g.ap_positions)
        EXPECT_LE(std::hypot(p.x, p.y), c.radius);
    for (int k = 0; k < c.num_ues; ++k)
        for (int i = 0; i < c.num_aps; ++i) {
            const auto& u = g.ue_positions[std::size_t(k)];
            const auto& a = g.ap_positions[std::size_t(i)];
            const double d = std::max(std::hypot(u.x - a.x, u.y - a.y), 1.0);
            EXPECT_NEAR(g.rho(k, i), std::pow(d / 30.0, -3.0), 1e-12 * g.rho(k, i));
            EXPECT_GT(g.rho(k, i), 0.0);
        }
}

TEST(SampleGeometry, UniformOverDiskArea)
{
    // P(r < R/2) = 1/4 for a uniform drop over the disk.
    Rng rng(9);
    const int n = 100000;
    int inner = 0;
    for (int j = 0; j < n; ++j) {
        const Point p = sample_in_disk(rng, 350.0);
        inner += std::hypot(p.x, p.y) < 175.0;
    }
    EXPECT_NEAR(double(inner) / n, 0.25, 0.01);
}

TEST(AssignPilots, RoundRobinWraps)
{
    NetworkConfig c;
    c.num_ues = 12;
    c.num_pilots = 10;
    const PilotAssignment pa = assign_pilots(c);
    // UE 11 and UE 12 (one-based) reuse pilots 1 and 2.
    EXPECT_EQ(pa.pilot_of_ue[10], 0);
    EXPECT_EQ(pa.pilot_of_ue[11], 1);
    EXPECT_EQ(pa.cohorts[0], (std::vector<int>{0, 10}));
    EXPECT_EQ(pa.cohorts[2], (std::vector<int>{2}));
}

TEST(AssignPilots, OrthogonalWhenKEqualsL)
{
    NetworkConfig c;
    c.num_ues = 7;
    c.num_pilots = 7;
    const PilotAssignment pa = assign_pilots(c);
    for (const auto& cohort : pa.cohorts)
        EXPECT_EQ(cohort.size(), 1u);
}

TEST(AssignPilots, FourUesTwoPilots)
{
    NetworkConfig c;
    c.num_ues = 4;
    c.num_pilots = 2;
    const PilotAssignment pa = assign_pilots(c);
    EXPECT_EQ(pa.cohorts[0], (std::vector<int>{0, 2}));
    EXPECT_EQ(pa.cohorts[1], (std::vector<int>{1, 3}));
}

TEST(AssignPilots, CohortsPartitionUes)
{
    for (int K = 1; K <= 25; ++K)
        for (int L = 1; L <= 12; ++L) {
            NetworkConfig c;
            c.num_ues = K;
            c.num_pilots = L;
            const PilotAssignment pa = assign_pilots(c);
            std::multiset<int> seen;
            for (std::size_t l = 0; l < pa.cohorts.size(); ++l)
                for (int k : pa.cohorts[l]) {
                    seen.insert(k);
                    EXPECT_EQ(pa.pilot_of_ue[std::size_t(k)], int(l));
                }
            ASSERT_EQ(seen.size(), std::size_t(K));
            for (int k = 0; k < K; ++k) {
                EXPECT_EQ(seen.count(k), 1u);
                EXPECT_GE(pa.pilot_of_ue[std::size_t(k)], 0);
                EXPECT_LT(pa.pilot_of_ue[std::size_t(k)], L);
            }
        }
}

TEST(SampleTrueChannels, ZeroGainGivesZeroVector)
{
    NetworkConfig c;
    c.num_ues = 1;
    c.num_aps = 1;
    c.antennas_per_ap = 4;
    Geometry g;
    g.rho = RMat::Zero(1, 1);
    const CMat h = sample_true_channels(g, c, 3);
    EXPECT_EQ(h.norm(), 0.0);
}

TEST(SampleTrueChannels, CircularlySymmetricMoments)
{
    // One UE, one AP with 10^5 antennas: 10^5 independent entries of CN(0, 1).
    NetworkConfig c;
    c.num_ues = 1;
    c.num_aps = 1;
    c.antennas_per_ap = 100000;
    Geometry g;
    g.rho = RMat::Ones(1, 1);
    const CMat h = sample_true_channels(g, c, 17);
    const double n = double(h.size());
    const double total = h.squaredNorm() / n;
    const double re = h.real().squaredNorm() / n;
    const double im = h.imag().squaredNorm() / n;
    EXPECT_NEAR(total, 1.0, 0.02);
    EXPECT_NEAR(re, 0.5, 0.01);
    EXPECT_NEAR(im, 0.5, 0.01);
    EXPECT_NEAR(std::abs(h.sum()) / n, 0.0, 0.01);
}

TEST(SampleTrueChannels, ReproducibleUnderSeed)
{
    NetworkConfig c;
    const Geometry g = sample_geometry(c, 1);
    EXPECT_EQ(sample_true_channels(g, c, 8), sample_true_channels(g, c, 8));
    EXPECT_NE(sample_true_channels(g, c, 8), sample_true_channels(g, c, 9));
}

TEST(Seeds, SubStreamsDiffer)
{
    EXPECT_NE(derive_seed(1, SeedPurpose::geometry), derive_seed(1, SeedPurpose::channels));
    EXPECT_NE(derive_seed(1, SeedPurpose::geometry, 0), derive_seed(1, SeedPurpose::geometry, 1));
    EXPECT_EQ(derive_seed(5, SeedPurpose::weights, 3), derive_seed(5, SeedPurpose::weights, 3));
}

TEST(Units, DecibelConversion)
{
    EXPECT_DOUBLE_EQ(db_to_linear(20.0), 100.0);
    EXPECT_DOUBLE_EQ(db_to_linear(0.0), 1.0);
    EXPECT_NEAR(db_to_linear(-10.0), 0.1, 1e-15);
}

} // namespace
} // namespace cellfree
