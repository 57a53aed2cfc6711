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

#include "rate_model.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

namespace cellfree {

// Per-AP quadratic subproblem
//   min_x  x^H Q x + 2 Re{b^H x}   s.t. ||x||^2 <= P,   Q = I_K (x) S + c I,
// held in the eigenbasis of the n_A x n_A block S so every solve costs O(n_A^2 K)
// regardless of the number of APs.
struct SubproblemData {
    CMat S;             // \hat{H}_i A \hat{H}_i^H
    double c = 0.0;     // C_i = c I
    CVec b;             // length n_A K, stacked per UE
    CMat eigvecs;       // U, S = U diag(d) U^H
    RVec eigvals;       // d, clamped at zero
    CMat b_rotated;     // U^H reshape(b, n_A, K)

    Eigen::Index antennas() const { return S.rows(); }
    Eigen::Index num_ues() const { return b.size() / S.rows(); }

    // Dense Q_i; only for checks, never on the solver path.
    CMat dense_q() const
    {
        const Eigen::Index n = antennas();
        const Eigen::Index K = num_ues();
        CMat q = CMat::Zero(n * K, n * K);
        for (Eigen::Index k = 0; k < K; ++k)
            q.block(k * n, k * n, n, n) = S;
        q.diagonal().array() += c;
        return q;
    }
};

// Finishes a subproblem from S, c, b: Hermitizes S and caches its eigen-decomposition.
inline SubproblemData make_subproblem(CMat S, double c, CVec b)
{
    const Eigen::Index n = S.rows();
    if (S.cols() != n || n < 1 || b.size() % n != 0)
        throw std::invalid_argument("make_subproblem: dimension mismatch");
    if (c < 0.0)
        throw std::invalid_argument("make_subproblem: c must be nonnegative");
    SubproblemData sub;
    sub.S = 0.5 * (S + S.adjoint());
    sub.c = c;
    sub.b = std::move(b);
    Eigen::SelfAdjointEigenSolver<CMat> eig(sub.S);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("make_subproblem: eigen-decomposition failed");
    sub.eigvecs = eig.eigenvectors();
    sub.eigvals = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::Map<const CMat> b_mat(sub.b.data(), n, sub.b.size() / n);
    sub.b_rotated = sub.eigvecs.adjoint() * b_mat;
    return sub;
}

// A = diag(mu_k w_k |u_k|^2) and the diagonal of B, mu_k w_k u_k.
struct BlockWeights {
    RVec a;
    CVec q;
};

inline BlockWeights block_weights(const WmmseAux& aux, const RateWeights& mu)
{
    BlockWeights bw{RVec(aux.u.size()), CVec(aux.u.size())};
    for (Eigen::Index k = 0; k < aux.u.size(); ++k) {
        bw.a(k) = mu.mu(k) * aux.w(k) * std::norm(aux.u(k));
        bw.q(k) = mu.mu(k) * aux.w(k) * aux.u(k);
    }
    return bw;
}

namespace detail {

inline void check_aux(const WmmseAux& aux, const RateWeights& mu, Eigen::Index K)
{
    if (aux.u.size() != K || aux.w.size() != K || mu.mu.size() != K)
        throw std::invalid_argument("aux / weights do not match the number of UEs");
}

// S_i, c_i and the -B \hat{h}_{A,i} part of b_i (as an n_A x K matrix).
inline void local_terms(Eigen::Index i, const BlockWeights& bw, const ChannelSet& cs, CMat& S, double& c, CMat& b_mat)
{
    const CMat hi = cs.ap_channels(i);
    const CMat hi_a = hi * bw.a.asDiagonal();
    S = hi_a * hi.adjoint();
    c = bw.a.dot(cs.rho_tilde.col(i));
    b_mat = -(hi * bw.q.asDiagonal());
}

} // namespace detail

// Subproblem for AP i with all other blocks of v held fixed; coupling summed AP by AP.
inline SubproblemData build_subproblem(Eigen::Index i, const Beamformer& v, const WmmseAux& aux, const ChannelSet& cs,
                                       const RateWeights& mu)
{
    check_dimensions(v, cs);
    detail::check_aux(aux, mu, cs.num_ues());
    if (i < 0 || i >= cs.num_aps())
        throw std::invalid_argument("build_subproblem: AP index out of range");
    const BlockWeights bw = block_weights(aux, mu);
    CMat S;
    double c = 0.0;
    CMat b_mat;
    detail::local_terms(i, bw, cs, S, c, b_mat);

    const CMat hi_a = cs.ap_channels(i) * bw.a.asDiagonal();
    for (Eigen::Index m = 0; m < cs.num_aps(); ++m) {
        if (m == i)
            continue;
        const CMat cross = hi_a * cs.ap_channels(m).adjoint(); // \hat{H}_i A \hat{H}_m^H
        b_mat.noalias() += cross * v.ap_block(m);
    }
    return make_subproblem(std::move(S), c, Eigen::Map<const CVec>(b_mat.data(), b_mat.size()));
}

// d = sum_m vec(A \hat{H}_m^H V_m), length K^2, one pass over the APs.
inline CVec coupling_vector(const Beamformer& v, const WmmseAux& aux, const ChannelSet& cs, const RateWeights& mu)
{
    check_dimensions(v, cs);
    detail::check_aux(aux, mu, cs.num_ues());
    const RVec a = block_weights(aux, mu).a;
    const Eigen::Index K = cs.num_ues();
    CMat acc = CMat::Zero(K, K);
    for (Eigen::Index m = 0; m < cs.num_aps(); ++m)
        acc.noalias() += cs.ap_channels(m).adjoint() * v.ap_block(m);
    acc = a.asDiagonal() * acc;
    return Eigen::Map<const CVec>(acc.data(), acc.size());
}

// Same subproblem as build_subproblem, with the coupling recovered from a precomputed d.
inline SubproblemData build_subproblem_from_coupling(Eigen::Index i, const Beamformer& v, const WmmseAux& aux,
                                                     const ChannelSet& cs, const RateWeights& mu, const CVec& d)
{
    check_dimensions(v, cs);
    detail::check_aux(aux, mu, cs.num_ues());
    const Eigen::Index K = cs.num_ues();
    if (d.size() != K * K)
        throw std::invalid_argument("build_subproblem_from_coupling: d must have length K^2");
    const BlockWeights bw = block_weights(aux, mu);
    CMat S;
    double c = 0.0;
    CMat b_mat;
    detail::local_terms(i, bw, cs, S, c, b_mat);

    const CMat hi = cs.ap_channels(i);
    const Eigen::Map<const CMat> d_mat(d.data(), K, K);
    const CMat own = bw.a.asDiagonal() * (hi.adjoint() * v.ap_block(i));
    b_mat.noalias() += hi * (d_mat - own);
    return make_subproblem(std::move(S), c, Eigen::Map<const CVec>(b_mat.data(), b_mat.size()));
}

namespace detail {

// Eigen-directions with d_j + c + lambda at this level are treated as null directions.
inline bool is_null_direction(const SubproblemData& sub, double shifted)
{
    const double scale = sub.eigvals.maxCoeff() + sub.c;
    return shifted <= 1e-13 * scale || shifted <= std::numeric_limits<double>::min();
}

inline bool row_is_zero(const SubproblemData& sub, Eigen::Index j)
{
    return sub.b_rotated.row(j).squaredNorm() <= 1e-28 * std::max(sub.b.squaredNorm(), std::numeric_limits<double>::min());
}

} // namespace detail

// x(lambda) = -(Q + lambda I)^{-1} b via I_K (x) U diag(1 / (d_j + c + lambda)) U^H.
// Null directions with no component of b are dropped (pseudoinverse).
inline CVec shifted_solve(const SubproblemData& sub, double lambda)
{
    if (lambda < 0.0)
        throw std::invalid_argument("shifted_solve: lambda must be nonnegative");
    const Eigen::Index n = sub.antennas();
    CMat scaled = sub.b_rotated;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double shifted = sub.eigvals(j) + sub.c + lambda;
        if (detail::is_null_direction(sub, shifted)) {
            if (!detail::row_is_zero(sub, j))
                throw std::domain_error("shifted_solve: unbounded direction (singular Q with b in its null space)");
            scaled.row(j).setZero();
        } else {
            scaled.row(j) /= shifted;
        }
    }
    const CMat x = -(sub.eigvecs * scaled);
    return Eigen::Map<const CVec>(x.data(), x.size());
}

// p(lambda) = ||x(lambda)||^2 = b^H (Q + lambda I)^{-2} b; +inf along a singular direction.
inline double power_of_dual(const SubproblemData& sub, double lambda)
{
    if (lambda < 0.0)
        throw std::invalid_argument("power_of_dual: lambda must be nonnegative");
    double p = 0.0;
    for (Eigen::Index j = 0; j < sub.antennas(); ++j) {
        const double shifted = sub.eigvals(j) + sub.c + lambda;
        if (detail::is_null_direction(sub, shifted)) {
            if (!detail::row_is_zero(sub, j))
                return std::numeric_limits<double>::infinity();
            continue;
        }
        p += sub.b_rotated.row(j).squaredNorm() / (shifted * shifted);
    }
    return p;
}

inline double subproblem_objective(const SubproblemData& sub, const CVec& x)
{
    const Eigen::Index n = sub.antennas();
    const Eigen::Map<const CMat> x_mat(x.data(), n, x.size() / n);
    const double quad = std::real((x_mat.adjoint() * sub.S * x_mat).trace()) + sub.c * x.squaredNorm();
    return quad + 2.0 * std::real(sub.b.dot(x));
}

struct SubproblemSolution {
    CVec x;
    double lambda = 0.0;
    int bisection_steps = 0;
};

// KKT solution: lambda = 0 when the unconstrained minimizer fits the budget, otherwise
// bisection for p(lambda) = P on [0, ||b|| / sqrt(P)].
inline SubproblemSolution solve_subproblem(const SubproblemData& sub, double budget, double bisect_tol = 1e-9)
{
    if (!(budget > 0.0))
        throw std::invalid_argument("solve_subproblem: budget must be > 0");
    if (!(bisect_tol > 0.0))
        throw std::invalid_argument("solve_subproblem: bisection tolerance must be > 0");
    SubproblemSolution sol;
    const double b_norm = sub.b.norm();
    if (b_norm == 0.0) {
        sol.x = CVec::Zero(sub.b.size());
        return sol;
    }
    if (power_of_dual(sub, 0.0) <= budget) {
        sol.x = shifted_solve(sub, 0.0);
        return sol;
    }

    const double lambda_max = b_norm / std::sqrt(budget);
    const double width_tol = 1e-12 * (1.0 + lambda_max);
    double lo = 0.0;
    double hi = lambda_max; // p(hi) <= P holds throughout
    double lambda = hi;
    while (true) {
        const double mid = 0.5 * (lo + hi);
        const double p = power_of_dual(sub, mid);
        ++sol.bisection_steps;
        if (p > budget)
            lo = mid;
        else
            hi = mid;
        // The power test only fires on the feasible side, so every exit returns p(lambda) <= P.
        if (p <= budget && budget - p <= bisect_tol * budget) {
            lambda = mid;
            break;
        }
        if (hi - lo <= width_tol || sol.bisection_steps >= 200) {
            lambda = hi;
            break;
        }
    }
    sol.lambda = lambda;
    sol.x = shifted_solve(sub, lambda);
    return sol;
}

// Single-antenna APs: Q = alpha I and the constrained minimizer is a clipped scaling of -b.
inline CVec scaled_norm_solve(const SubproblemData& sub, double budget)
{
    if (sub.antennas() != 1)
        throw std::invalid_argument("scaled_norm_solve: requires n_A = 1");
    if (!(budget > 0.0))
        throw std::invalid_argument("scaled_norm_solve: budget must be > 0");
    const double b_norm = sub.b.norm();
    if (b_norm == 0.0)
        return CVec::Zero(sub.b.size());
    const double alpha = std::real(sub.S(0, 0)) + sub.c;
    const double clip = std::sqrt(budget) / b_norm;
    const double scale = alpha > 0.0 ? std::min(1.0 / alpha, clip) : clip;
    return -scale * sub.b;
}

enum class SolverMode { sequential, parallel };

struct SolverConfig {
    int max_outer_iters = 500;
    std::optional<double> outer_tol;  // absolute delta; unset means outer_tol_rel * sum_i P_i
    double outer_tol_rel = 1e-5;
    double bisect_tol = 1e-9;
    double step_beta0 = 1.0;
    double step_eps = 0.1;
    SolverMode mode = SolverMode::sequential;
    int threads = 1;                  // parallel mode: workers for the per-AP solves
    bool closed_form_single_antenna = true;
    bool record_substeps = false;     // sequential mode: surrogate after every block and aux update

    double delta(const RVec& budgets) const { return outer_tol ? *outer_tol : outer_tol_rel * budgets.sum(); }

    void validate() const
    {
        if (max_outer_iters < 1)
            throw std::invalid_argument("SolverConfig: max_outer_iters must be >= 1");
        if (outer_tol && !(*outer_tol > 0.0))
            throw std::invalid_argument("SolverConfig: outer_tol must be > 0");
        if (!outer_tol && !(outer_tol_rel > 0.0))
            throw std::invalid_argument("SolverConfig: outer_tol_rel must be > 0");
        if (!(bisect_tol > 0.0))
            throw std::invalid_argument("SolverConfig: bisect_tol must be > 0");
        if (!(step_beta0 >= 0.0 && step_beta0 <= 1.0) || !(step_eps >= 0.0 && step_eps <= 1.0))
            throw std::invalid_argument("SolverConfig: step_beta0 and step_eps must lie in [0, 1]");
        if (threads < 1)
            throw std::invalid_argument("SolverConfig: threads must be >= 1");
    }
};

struct SolverReport {
    Beamformer beamformer;
    std::vector<double> objective_trace; // weighted sum-rate after each aux update
    std::vector<double> surrogate_trace; // surrogate at the same points
    std::vector<double> substep_trace;   // only with record_substeps
    int iterations = 0;
    double wall_time = 0.0;              // seconds
    bool converged = false;
    long long coupling_products = 0;     // n_A x K blocks multiplied into some b_i, a work proxy
    long long inner_steps = 0;          // bisection steps (G-R-WMMSE) or dual iterations (WMMSE)
};

// I.i.d. Gaussian blocks, each AP scaled to spend its full budget.
inline Beamformer random_feasible_init(Eigen::Index num_aps, int antennas_per_ap, Eigen::Index num_ues,
                                       const RVec& budgets, std::uint64_t seed)
{
    if (budgets.size() != num_aps)
        throw std::invalid_argument("random_feasible_init: one budget per AP required");
    Rng rng(seed);
    Beamformer v(num_aps, antennas_per_ap, num_ues);
    for (Eigen::Index k = 0; k < num_ues; ++k)
        for (Eigen::Index r = 0; r < v.matrix().rows(); ++r)
            v.matrix()(r, k) = complex_gaussian(rng, 1.0);
    for (Eigen::Index i = 0; i < num_aps; ++i)
        v.ap_block(i) *= std::sqrt(budgets(i) / v.ap_power(i));
    return v;
}

namespace detail {

inline void check_run_inputs(const ChannelSet& cs, const RateWeights& mu, const RVec& budgets, const SolverConfig& config,
                             const Beamformer& init)
{
    config.validate();
    check_dimensions(init, cs);
    if (mu.mu.size() != cs.num_ues() || (mu.mu.array() <= 0.0).any())
        throw std::invalid_argument("solver: weights must be positive, one per UE");
    if (budgets.size() != cs.num_aps() || (budgets.array() <= 0.0).any())
        throw std::invalid_argument("solver: budgets must be positive, one per AP");
    if (!init.feasible(budgets, config.bisect_tol))
        throw std::invalid_argument("solver: initial beamformer violates the per-AP power constraints");
}

inline CVec solve_block(const SubproblemData& sub, double budget, const SolverConfig& config, long long& steps)
{
    if (config.closed_form_single_antenna && sub.antennas() == 1)
        return scaled_norm_solve(sub, budget);
    SubproblemSolution sol = solve_subproblem(sub, budget, config.bisect_tol);
    steps += sol.bisection_steps;
    return std::move(sol.x);
}

inline double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace detail

// Gauss-Seidel sweep over APs, then the closed-form aux update, until the beams settle.
inline SolverReport run_sequential(const ChannelSet& cs, const RateWeights& mu, const RVec& budgets,
                                   const SolverConfig& config, const Beamformer& init)
{
    detail::check_run_inputs(cs, mu, budgets, config, init);
    const auto start = std::chrono::steady_clock::now();
    const double delta = config.delta(budgets);
    const Eigen::Index M = cs.num_aps();

    SolverReport report;
    Beamformer v = init;
    WmmseAux aux = update_aux(v, cs);
    report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
    report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));
    if (config.record_substeps)
        report.substep_trace.push_back(report.surrogate_trace.back());

    for (int it = 0; it < config.max_outer_iters; ++it) {
        const CMat previous = v.matrix();
        for (Eigen::Index i = 0; i < M; ++i) {
            const SubproblemData sub = build_subproblem(i, v, aux, cs, mu);
            report.coupling_products += M - 1;
            v.set_ap_stack(i, detail::solve_block(sub, budgets(i), config, report.inner_steps));
            if (config.record_substeps)
                report.substep_trace.push_back(surrogate_objective(v, aux, cs, mu));
        }
        aux = update_aux(v, cs);
        ++report.iterations;
        report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
        report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));
        if (config.record_substeps)
            report.substep_trace.push_back(report.surrogate_trace.back());
        if ((v.matrix() - previous).squaredNorm() <= delta) {
            report.converged = true;
            break;
        }
    }
    report.beamformer = std::move(v);
    report.wall_time = detail::seconds_since(start);
    return report;
}

// Step-size schedule of the damped Jacobi iteration.
inline double next_step_size(double beta, double eps) { return beta * (1.0 - eps * beta); }

// Jacobi best responses for all APs from one snapshot, blended into the previous beams with a
// decaying step. The per-AP solves only read shared state and write their own block.
inline SolverReport run_parallel(const ChannelSet& cs, const RateWeights& mu, const RVec& budgets,
                                 const SolverConfig& config, const Beamformer& init)
{
    detail::check_run_inputs(cs, mu, budgets, config, init);
    const auto start = std::chrono::steady_clock::now();
    const double delta = config.delta(budgets);
    const Eigen::Index M = cs.num_aps();

    SolverReport report;
    Beamformer v = init;
    WmmseAux aux = update_aux(v, cs);
    report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
    report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));

    double beta = config.step_beta0;
    const int workers = int(std::min<Eigen::Index>(config.threads, M));
    std::vector<long long> steps(std::size_t(workers), 0);
    for (int it = 0; it < config.max_outer_iters; ++it) {
        const Beamformer previous = v;
        const CVec d = coupling_vector(previous, aux, cs, mu);
        report.coupling_products += M;

        auto update_range = [&](int worker) {
            for (Eigen::Index i = worker; i < M; i += workers) {
                const SubproblemData sub = build_subproblem_from_coupling(i, previous, aux, cs, mu, d);
                const CVec best = detail::solve_block(sub, budgets(i), config, steps[std::size_t(worker)]);
                v.set_ap_stack(i, beta * best + (1.0 - beta) * previous.ap_stack(i));
            }
        };
        if (workers == 1) {
            update_range(0);
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(std::size_t(workers));
            for (int w = 0; w < workers; ++w)
                pool.emplace_back(update_range, w);
        }

        aux = update_aux(v, cs);
        ++report.iterations;
        report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
        report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));
        if ((v.matrix() - previous.matrix()).squaredNorm() <= delta) {
            report.converged = true;
            break;
        }
        beta = next_step_size(beta, config.step_eps);
    }
    for (long long s : steps)
        report.inner_steps += s;
    report.beamformer = std::move(v);
    report.wall_time = detail::seconds_since(start);
    return report;
}

inline SolverReport run_grwmmse(const ChannelSet& cs, const RateWeights& mu, const RVec& budgets,
                                const SolverConfig& config, const Beamformer& init)
{
    return config.mode == SolverMode::sequential ? run_sequential(cs, mu, budgets, config, init)
                                                 : run_parallel(cs, mu, budgets, config, init);
}

} // namespace cellfree
