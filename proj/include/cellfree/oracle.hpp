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

// Brute-force reference computations for tests. Nothing here shares code with the solvers
// beyond Eigen itself.

#include "rate_model.hpp"

#include <Eigen/LU>

#include <vector>

namespace cellfree::oracle {

struct QcqpResult {
    CVec x;
    double objective = 0.0;
    long long iterations = 0;
};

// min x^H Q x + 2 Re{b^H x} s.t. ||x||^2 <= P by projected gradient from x = 0 with step
// 1 / (2 lambda_max(Q) + 1), until the objective moves by less than tol.
inline QcqpResult projected_gradient_qcqp(const CMat& q, const CVec& b, double budget, double tol,
                                          long long max_iters = 50'000'000, std::vector<double>* trace = nullptr)
{
    if (!(budget > 0.0))
        throw std::invalid_argument("projected_gradient_qcqp: budget must be > 0");
    const double lmax = Eigen::SelfAdjointEigenSolver<CMat>(q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double step = 1.0 / (2.0 * std::max(lmax, 0.0) + 1.0);
    const double radius = std::sqrt(budget);
    auto objective = [&](const CVec& x) { return std::real(x.dot(q * x)) + 2.0 * std::real(b.dot(x)); };

    QcqpResult res;
    res.x = CVec::Zero(b.size());
    res.objective = 0.0;
    while (res.iterations < max_iters) {
        CVec next = res.x - step * 2.0 * (q * res.x + b);
        const double n = next.norm();
        if (n > radius)
            next *= radius / n;
        const double value = objective(next);
        ++res.iterations;
        const double change = res.objective - value;
        res.x = std::move(next);
        res.objective = value;
        if (trace)
            trace->push_back(value);
        if (std::abs(change) < tol)
            break;
    }
    return res;
}

// -(Q + lambda I)^{-1} b with the full system formed explicitly.
inline CVec dense_shifted_inverse(const CMat& q, double lambda, const CVec& b)
{
    const CMat shifted = q + lambda * CMat::Identity(q.rows(), q.cols());
    Eigen::FullPivLU<CMat> lu(shifted);
    if (!lu.isInvertible())
        throw std::domain_error("dense_shifted_inverse: singular system");
    return -lu.solve(b);
}

struct McEstimate {
    double mean = 0.0;
    double ci95 = 0.0; // half width
};

// Ergodic rate of UE k with the true channel \hat{h} + \tilde{h} known at the receiver,
// \tilde{h}_{k,i} ~ CN(0, rho_tilde[k][i] I).
inline McEstimate mc_expected_rate(const Beamformer& v, const ChannelSet& cs, Eigen::Index k, long long num_draws,
                                   std::uint64_t seed)
{
    if (num_draws < 100)
        throw std::invalid_argument("mc_expected_rate: at least 100 draws required");
    const Eigen::Index n = cs.antennas_per_ap;
    const Eigen::Index M = cs.num_aps();
    const Eigen::Index K = cs.num_ues();
    const CMat& beams = v.matrix();
    const CVec h_hat = cs.h_hat.col(k);
    const bool exact = (cs.rho_tilde.row(k).array() == 0.0).all();

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    RVec sd(M);
    for (Eigen::Index i = 0; i < M; ++i)
        sd(i) = std::sqrt(0.5 * cs.rho_tilde(k, i));

    const long long draws = exact ? 1 : num_draws;
    double sum = 0.0;
    double sum_sq = 0.0;
    CVec h(h_hat.size());
    for (long long t = 0; t < draws; ++t) {
        h = h_hat;
        if (!exact)
            for (Eigen::Index i = 0; i < M; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    h(i * n + j) += cplx(sd(i) * normal(rng), sd(i) * normal(rng));
        double interference = 0.0;
        double signal = 0.0;
        for (Eigen::Index l = 0; l < K; ++l) {
            const double g = std::norm(h.dot(beams.col(l)));
            if (l == k)
                signal = g;
            else
                interference += g;
        }
        const double r = std::log2(1.0 + signal / (interference + cs.noise_dl));
        sum += r;
        sum_sq += r * r;
    }
    McEstimate est;
    est.mean = sum / double(draws);
    if (draws > 1) {
        const double var = std::max(0.0, (sum_sq - double(draws) * est.mean * est.mean) / double(draws - 1));
        est.ci95 = 1.959963984540054 * std::sqrt(var / double(draws));
    }
    return est;
}

} // namespace cellfree::oracle
