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

#pragma once

#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellfree {

struct NetworkConfig {
    int num_ues = 12;
    int num_aps = 16;
    int antennas_per_ap = 2;
    int num_pilots = 10;
    double radius = 350.0;       // m
    double ref_distance = 30.0;  // m
    double pathloss_exp = 3.0;
    double snr_dl = 100.0;       // linear
    double snr_ul = 10.0;        // linear
    double noise_dl = 1.0;
    double noise_ul = 1.0;
    std::vector<double> per_ap_budget; // empty: every AP gets snr_dl * noise_dl

    Eigen::Index antennas_total() const { return Eigen::Index(num_aps) * antennas_per_ap; }

    RVec budgets() const
    {
        if (per_ap_budget.empty())
            return RVec::Constant(num_aps, snr_dl * noise_dl);
        return Eigen::Map<const RVec>(per_ap_budget.data(), Eigen::Index(per_ap_budget.size()));
    }

    void validate() const
    {
        if (num_ues < 1 || num_aps < 1 || antennas_per_ap < 1 || num_pilots < 1)
            throw std::invalid_argument("NetworkConfig: K, M, n_A and L must all be >= 1");
        if (!(radius > 0.0) || !(ref_distance > 0.0) || !(pathloss_exp > 0.0))
            throw std::invalid_argument("NetworkConfig: radius, reference distance and path-loss exponent must be > 0");
        if (!(snr_dl > 0.0) || !(snr_ul > 0.0))
            throw std::invalid_argument("NetworkConfig: SNRs must be > 0");
        if (!(noise_dl > 0.0) || !(noise_ul > 0.0))
            throw std::invalid_argument("NetworkConfig: noise powers must be > 0");
        if (!per_ap_budget.empty()) {
            if (per_ap_budget.size() != std::size_t(num_aps))
                throw std::invalid_argument("NetworkConfig: per_ap_budget must have one entry per AP");
            if (std::any_of(per_ap_budget.begin(), per_ap_budget.end(), [](double p) { return !(p > 0.0); }))
                throw std::invalid_argument("NetworkConfig: per-AP budgets must be > 0");
        }
    }
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Geometry {
    std::vector<Point> ue_positions;
    std::vector<Point> ap_positions;
    RMat rho; // K x M large-scale gains
};

// Pilot indices are zero-based here: UE k uses pilot `pilot_of_ue[k]` in [0, L).
struct PilotAssignment {
    std::vector<int> pilot_of_ue;
    std::vector<std::vector<int>> cohorts; // UEs sharing each pilot, ascending

    const std::vector<int>& cohort_of(int k) const { return cohorts[std::size_t(pilot_of_ue[std::size_t(k)])]; }
};

// Distances below one metre are clamped to one metre.
inline double path_loss(double distance, double ref_distance, double exponent)
{
    const double d = std::max(distance, 1.0);
    return std::pow(d / ref_distance, -exponent);
}

inline Point sample_in_disk(Rng& rng, double radius)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double r = radius * std::sqrt(unit(rng));
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    return {r * std::cos(theta), r * std::sin(theta)};
}

inline RMat large_scale_gains(const std::vector<Point>& ues, const std::vector<Point>& aps, const NetworkConfig& config)
{
    RMat rho(Eigen::Index(ues.size()), Eigen::Index(aps.size()));
    for (std::size_t k = 0; k < ues.size(); ++k)
        for (std::size_t i = 0; i < aps.size(); ++i) {
            const double d = std::hypot(ues[k].x - aps[i].x, ues[k].y - aps[i].y);
            rho(Eigen::Index(k), Eigen::Index(i)) = path_loss(d, config.ref_distance, config.pathloss_exp);
        }
    return rho;
}

inline Geometry sample_geometry(const NetworkConfig& config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    Geometry g;
    g.ue_positions.reserve(std::size_t(config.num_ues));
    g.ap_positions.reserve(std::size_t(config.num_aps));
    for (int k = 0; k < config.num_ues; ++k)
        g.ue_positions.push_back(sample_in_disk(rng, config.radius));
    for (int i = 0; i < config.num_aps; ++i)
        g.ap_positions.push_back(sample_in_disk(rng, config.radius));
    g.rho = large_scale_gains(g.ue_positions, g.ap_positions, config);
    return g;
}

// Round-robin: UE k (zero-based) gets pilot k mod L.
inline PilotAssignment assign_pilots(const NetworkConfig& config)
{
    if (config.num_ues < 1 || config.num_pilots < 1)
        throw std::invalid_argument("assign_pilots: K and L must be >= 1");
    PilotAssignment pa;
    pa.pilot_of_ue.resize(std::size_t(config.num_ues));
    pa.cohorts.assign(std::size_t(config.num_pilots), {});
    for (int k = 0; k < config.num_ues; ++k) {
        const int l = k % config.num_pilots;
        pa.pilot_of_ue[std::size_t(k)] = l;
        pa.cohorts[std::size_t(l)].push_back(k);
    }
    return pa;
}

// Stacked channels, (M n_A) x K: column k is [h_{k,1}; ...; h_{k,M}], each block CN(0, rho[k][i] I).
inline CMat sample_true_channels(const Geometry& geometry, const NetworkConfig& config, std::uint64_t seed)
{
    const Eigen::Index K = geometry.rho.rows();
    const Eigen::Index M = geometry.rho.cols();
    const Eigen::Index n = config.antennas_per_ap;
    Rng rng(seed);
    CMat h(M * n, K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < M; ++i)
            h.col(k).segment(i * n, n) = complex_gaussian_vector(rng, n, geometry.rho(k, i));
    return h;
}

} // namespace cellfree
