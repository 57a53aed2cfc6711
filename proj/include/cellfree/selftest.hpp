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

#include "harness.hpp"
#include "oracle.hpp"

#include <functional>
#include <string>
#include <vector>

namespace cellfree {

struct SelftestCheck {
    std::string name;
    bool passed = false;
    double worst = 0.0; // largest observed error measure
    double tolerance = 0.0;
};

namespace detail::selftest {

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline ChannelSet channels(Eigen::Index K, Eigen::Index M, int n, Rng& rng)
{
    ChannelSet cs;
    cs.antennas_per_ap = n;
    cs.h_hat.resize(M * n, K);
    cs.rho_hat.resize(K, M);
    cs.rho_tilde.resize(K, M);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < M; ++i) {
            const double gain = std::pow(10.0, uniform(rng, -1.5, 0.5));
            cs.rho_hat(k, i) = gain;
            cs.rho_tilde(k, i) = 0.5 * uniform(rng, 0.0, 1.0) * gain;
            cs.h_hat.col(k).segment(i * n, n) = complex_gaussian_vector(rng, n, gain);
        }
    return cs;
}

inline WmmseAux aux(Eigen::Index K, Rng& rng)
{
    WmmseAux a{CVec(K), RVec(K)};
    for (Eigen::Index k = 0; k < K; ++k) {
        a.u(k) = complex_gaussian(rng, 0.2);
        a.w(k) = uniform(rng, 0.5, 3.0);
    }
    return a;
}

inline SubproblemData subproblem(Eigen::Index n, Eigen::Index K, Rng& rng)
{
    CMat g(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            g(r, c) = complex_gaussian(rng, 1.0);
    return make_subproblem(g * g.adjoint(), uniform(rng, 0.05, 1.0), complex_gaussian_vector(rng, n * K, 1.0));
}

inline RVec budgets(Eigen::Index M, Rng& rng)
{
    RVec p(M);
    for (Eigen::Index i = 0; i < M; ++i)
        p(i) = uniform(rng, 0.5, 20.0);
    return p;
}

inline double rel(const CVec& a, const CVec& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300}); }

} // namespace detail::selftest

// Invariant checks on small random instances; cheap enough for a post-build smoke run.
inline std::vector<SelftestCheck> run_selftest(std::uint64_t seed = 1)
{
    namespace st = detail::selftest;
    std::vector<SelftestCheck> out;
    auto check = [&](std::string name, double tolerance, const std::function<double(Rng&)>& body) {
        Rng rng(derive_seed(seed, SeedPurpose::selftest, out.size()));
        SelftestCheck c{std::move(name), false, 0.0, tolerance};
        try {
            c.worst = body(rng);
            c.passed = c.worst <= tolerance;
        } catch (const std::exception&) {
            c.worst = std::numeric_limits<double>::infinity();
        }
        out.push_back(std::move(c));
    };

    check("shifted solve matches dense inverse", 1e-10, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const SubproblemData sub = st::subproblem(1 + t % 4, 1 + t % 6, rng);
            const double lambda = st::uniform(rng, 0.0, 3.0);
            worst = std::max(worst, st::rel(shifted_solve(sub, lambda), oracle::dense_shifted_inverse(sub.dense_q(), lambda, sub.b)));
        }
        return worst;
    });

    check("subproblem KKT conditions", 1e-6, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const SubproblemData sub = st::subproblem(1 + t % 4, 1 + t % 6, rng);
            const double budget = st::uniform(rng, 0.01, 2.0);
            const SubproblemSolution sol = solve_subproblem(sub, budget);
            const CVec residual = sub.dense_q() * sol.x + sol.lambda * sol.x + sub.b;
            worst = std::max({worst, residual.norm() / sub.b.norm(),
                              sol.lambda * std::abs(sol.x.squaredNorm() - budget) / budget,
                              std::max(0.0, sol.x.squaredNorm() / budget - 1.0) * 1e3});
        }
        return worst;
    });

    check("single-antenna closed form", 1e-9, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const SubproblemData sub = st::subproblem(1, 1 + t % 6, rng);
            const double budget = st::uniform(rng, 0.05, 5.0);
            worst = std::max(worst, st::rel(scaled_norm_solve(sub, budget), solve_subproblem(sub, budget).x));
        }
        return worst;
    });

    check("coupling vector reformulation", 1e-10, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            const Eigen::Index K = 1 + t % 6;
            const Eigen::Index M = 1 + t % 8;
            const ChannelSet cs = st::channels(K, M, 2, rng);
            const WmmseAux a = st::aux(K, rng);
            const RateWeights mu = RateWeights::unit(K);
            const Beamformer v = random_feasible_init(M, 2, K, st::budgets(M, rng), rng());
            const CVec d = coupling_vector(v, a, cs, mu);
            for (Eigen::Index i = 0; i < M; ++i)
                worst = std::max(worst, st::rel(build_subproblem(i, v, a, cs, mu).b,
                                                build_subproblem_from_coupling(i, v, a, cs, mu, d).b));
        }
        return worst;
    });

    check("sequential surrogate monotone", 1e-9, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const Eigen::Index K = 2 + t;
            const Eigen::Index M = 1 + t;
            const ChannelSet cs = st::channels(K, M, 1 + t % 3, rng);
            const RVec p = st::budgets(M, rng);
            SolverConfig config;
            config.record_substeps = true;
            config.max_outer_iters = 50;
            const SolverReport r = run_sequential(cs, random_weights(K, rng()), p, config,
                                                  random_feasible_init(M, cs.antennas_per_ap, K, p, rng()));
            for (std::size_t j = 1; j < r.substep_trace.size(); ++j)
                worst = std::max(worst, (r.substep_trace[j] - r.substep_trace[j - 1]) /
                                            std::max(1.0, std::abs(r.substep_trace[j - 1])));
        }
        return worst;
    });

    check("solver outputs feasible", 1e-9, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const Eigen::Index K = 3;
            const Eigen::Index M = 2 + t;
            const ChannelSet cs = st::channels(K, M, 2, rng);
            const RVec p = st::budgets(M, rng);
            const Beamformer init = random_feasible_init(M, 2, K, p, rng());
            SolverConfig config;
            config.max_outer_iters = 50;
            std::vector<Beamformer> outputs{run_sequential(cs, RateWeights::unit(K), p, config, init).beamformer,
                                            mrt_precoder(cs, p), zf_precoder(cs, p)};
            config.mode = SolverMode::parallel;
            outputs.push_back(run_grwmmse(cs, RateWeights::unit(K), p, config, init).beamformer);
            outputs.push_back(run_wmmse(cs, RateWeights::unit(K), p, config, init).beamformer);
            for (const auto& v : outputs)
                worst = std::max(worst, v.max_load(p) - 1.0);
        }
        return worst;
    });

    check("aux update makes bound tight", 1e-10, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            const ChannelSet cs = st::channels(4, 3, 2, rng);
            const Beamformer v = random_feasible_init(3, 2, 4, st::budgets(3, rng), rng());
            const RateWeights mu = random_weights(4, rng());
            const double bound = mu.mu.sum() / std::numbers::ln2 - weighted_sum_rate(v, cs, mu);
            worst = std::max(worst, std::abs(surrogate_objective(v, update_aux(v, cs), cs, mu) - bound) /
                                        std::max(1.0, std::abs(bound)));
        }
        return worst;
    });

    check("zero-forcing nulls", 1e-9, [](Rng& rng) {
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            const ChannelSet cs = st::channels(4, 3, 2, rng);
            const Beamformer v = zf_precoder(cs, st::budgets(3, rng));
            for (Eigen::Index k = 0; k < 4; ++k)
                for (Eigen::Index l = 0; l < 4; ++l)
                    if (l != k)
                        worst = std::max(worst, std::abs(cs.h_hat.col(k).dot(v.ue_beam(l))) /
                                                    (cs.h_hat.col(k).norm() * v.ue_beam(l).norm()));
        }
        return worst;
    });

    return out;
}

} // namespace cellfree
