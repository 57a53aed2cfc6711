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

#include <cellfree/harness.hpp>

namespace cellfree::testing {

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Synthetic channel set: gains log-uniform over two decades, error variances a random
// fraction (up to error_level) of each gain.
inline ChannelSet random_channel_set(Eigen::Index K, Eigen::Index M, int n, std::uint64_t seed, double error_level = 0.5,
                                     double noise = 1.0)
{
    Rng rng(seed);
    ChannelSet cs;
    cs.antennas_per_ap = n;
    cs.noise_dl = noise;
    cs.h_hat.resize(M * n, K);
    cs.rho_hat.resize(K, M);
    cs.rho_tilde.resize(K, M);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < M; ++i) {
            const double gain = std::pow(10.0, uniform(rng, -1.5, 0.5));
            cs.rho_hat(k, i) = gain;
            cs.rho_tilde(k, i) = error_level * uniform(rng, 0.0, 1.0) * gain;
            cs.h_hat.col(k).segment(i * n, n) = complex_gaussian_vector(rng, n, gain);
        }
    return cs;
}

inline WmmseAux random_aux(Eigen::Index K, std::uint64_t seed)
{
    Rng rng(seed);
    WmmseAux aux{CVec(K), RVec(K)};
    for (Eigen::Index k = 0; k < K; ++k) {
        aux.u(k) = complex_gaussian(rng, 0.2);
        aux.w(k) = uniform(rng, 0.5, 3.0);
    }
    return aux;
}

inline RateWeights random_mu(Eigen::Index K, std::uint64_t seed) { return random_weights(K, seed); }

inline RVec random_budgets(Eigen::Index M, std::uint64_t seed, double lo = 0.5, double hi = 20.0)
{
    Rng rng(seed);
    RVec p(M);
    for (Eigen::Index i = 0; i < M; ++i)
        p(i) = uniform(rng, lo, hi);
    return p;
}

// Subproblem with Q = I_K (x) S + c I for a random PSD S (rank `rank`, default full).
inline SubproblemData random_subproblem(Eigen::Index n, Eigen::Index K, std::uint64_t seed, double c_lo = 0.05,
                                        double c_hi = 1.0, Eigen::Index rank = -1)
{
    Rng rng(seed);
    if (rank < 0)
        rank = n;
    CMat g(n, std::max<Eigen::Index>(rank, 1));
    for (Eigen::Index r = 0; r < g.rows(); ++r)
        for (Eigen::Index col = 0; col < g.cols(); ++col)
            g(r, col) = rank == 0 ? cplx(0.0) : complex_gaussian(rng, 1.0);
    const CMat S = g * g.adjoint();
    const double c = uniform(rng, c_lo, c_hi);
    const CVec b = complex_gaussian_vector(rng, n * K, uniform(rng, 0.1, 4.0));
    return make_subproblem(S, c, b);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline double rel_diff(const CVec& a, const CVec& b)
{
    const double scale = std::max({a.norm(), b.norm(), 1e-300});
    return (a - b).norm() / scale;
}

} // namespace cellfree::testing
