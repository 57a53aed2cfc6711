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

#include "scenario.hpp"

#include <optional>

namespace cellfree {

// What the central processor knows about the access links.
// h_hat is (M n_A) x K; rows [i n_A, (i+1) n_A) hold AP i's local estimates.
struct ChannelSet {
    CMat h_hat;
    RMat rho_hat;   // K x M
    RMat rho_tilde; // K x M
    std::optional<CMat> h_true;
    int antennas_per_ap = 1;
    double noise_dl = 1.0;

    Eigen::Index num_ues() const { return h_hat.cols(); }
    Eigen::Index num_aps() const { return rho_tilde.cols(); }

    // \hat{H}_i, n_A x K
    auto ap_channels(Eigen::Index i) const { return h_hat.middleRows(i * antennas_per_ap, antennas_per_ap); }
};

namespace detail {

// Denominator 1 / (L snr_ul) + sum_{l in K_{l_k}} rho[l][i]; the cohort includes k itself.
inline RMat contaminated_power(const RMat& rho, const PilotAssignment& pilots, const NetworkConfig& config)
{
    const double ul = double(config.num_pilots) * config.snr_ul;
    if (!(ul > 0.0))
        throw std::invalid_argument("estimate_variance: L * snr_ul must be > 0");
    const Eigen::Index K = rho.rows();
    const Eigen::Index M = rho.cols();
    if (pilots.pilot_of_ue.size() != std::size_t(K))
        throw std::invalid_argument("estimate_variance: pilot assignment does not match K");
    RMat den = RMat::Constant(K, M, 1.0 / ul);
    for (Eigen::Index k = 0; k < K; ++k)
        for (int l : pilots.cohort_of(int(k)))
            den.row(k) += rho.row(l);
    return den;
}

} // namespace detail

// Variance of the linear-MMSE estimate under pilot contamination.
inline RMat estimate_variance(const RMat& rho, const PilotAssignment& pilots, const NetworkConfig& config)
{
    const RMat den = detail::contaminated_power(rho, pilots, config);
    return rho.cwiseProduct(rho).cwiseQuotient(den);
}

// rho - rho_hat, written as rho (den - rho) / den so that it is exactly zero in the
// noiseless, uncontaminated limit.
inline RMat error_variance(const RMat& rho, const PilotAssignment& pilots, const NetworkConfig& config)
{
    const RMat den = detail::contaminated_power(rho, pilots, config);
    return rho.cwiseProduct(den - rho).cwiseQuotient(den).cwiseMax(0.0);
}

// h_true = h_hat + h_tilde with h_hat ~ CN(0, rho_hat I) and independent h_tilde ~ CN(0, rho_tilde I).
inline ChannelSet sample_channel_set(const Geometry& geometry, const PilotAssignment& pilots, const NetworkConfig& config,
                                     std::uint64_t seed)
{
    config.validate();
    ChannelSet cs;
    cs.antennas_per_ap = config.antennas_per_ap;
    cs.noise_dl = config.noise_dl;
    cs.rho_hat = estimate_variance(geometry.rho, pilots, config);
    cs.rho_tilde = error_variance(geometry.rho, pilots, config);

    const Eigen::Index K = geometry.rho.rows();
    const Eigen::Index M = geometry.rho.cols();
    const Eigen::Index n = config.antennas_per_ap;
    Rng rng(seed);
    cs.h_hat.resize(M * n, K);
    CMat h_true(M * n, K);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < M; ++i) {
            const CVec est = complex_gaussian_vector(rng, n, cs.rho_hat(k, i));
            const CVec err = complex_gaussian_vector(rng, n, cs.rho_tilde(k, i));
            cs.h_hat.col(k).segment(i * n, n) = est;
            h_true.col(k).segment(i * n, n) = est + err;
        }
    cs.h_true = std::move(h_true);
    return cs;
}

} // namespace cellfree
