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

#include "grwmmse.hpp"

#include <algorithm>

namespace cellfree {

// Copy of the channel set that pretends the estimates are exact; used to drive the non-robust
// solver. Rates must still be evaluated on the original set.
inline ChannelSet non_robust_view(const ChannelSet& cs)
{
    ChannelSet view = cs;
    view.rho_tilde.setZero();
    return view;
}

namespace detail {

// Scale the whole beamformer so the most loaded AP sits exactly at its budget.
inline void scale_to_tightest_ap(Beamformer& v, const RVec& budgets)
{
    const double load = v.max_load(budgets);
    if (load > 0.0)
        v.matrix() *= 1.0 / std::sqrt(load);
}

inline void normalize_columns(CMat& m)
{
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        const double n = m.col(k).norm();
        if (n > 0.0)
            m.col(k) /= n;
    }
}

} // namespace detail

// Equal per-UE power, one global scale anchored to the tightest AP.
inline Beamformer mrt_precoder(const ChannelSet& cs, const RVec& budgets)
{
    if (budgets.size() != cs.num_aps())
        throw std::invalid_argument("mrt_precoder: one budget per AP required");
    CMat dirs = cs.h_hat;
    detail::normalize_columns(dirs);
    Beamformer v(std::move(dirs), cs.antennas_per_ap);
    detail::scale_to_tightest_ap(v, budgets);
    return v;
}

// Directions \hat{H} (\hat{H}^H \hat{H})^{-1}, formed through a thin QR so the nulls stay accurate
// for badly conditioned channels; same power loading as MRT.
inline Beamformer zf_precoder(const ChannelSet& cs, const RVec& budgets)
{
    if (budgets.size() != cs.num_aps())
        throw std::invalid_argument("zf_precoder: one budget per AP required");
    const CMat& h = cs.h_hat;
    const Eigen::Index n = h.rows();
    const Eigen::Index K = h.cols();
    if (n < K)
        throw std::runtime_error("zf_precoder: fewer transmit antennas than UEs");
    Eigen::ColPivHouseholderQR<CMat> pivoted(h);
    pivoted.setThreshold(1e-12);
    if (pivoted.rank() < K)
        throw std::runtime_error("zf_precoder: estimated channel matrix is rank deficient");

    Eigen::HouseholderQR<CMat> qr(h);
    const CMat q_thin = qr.householderQ() * CMat::Identity(n, K);
    const CMat r = qr.matrixQR().topRows(K).triangularView<Eigen::Upper>();
    // V = Q R^{-H}, i.e. V^H = R^{-1} Q^H
    const CMat v_adj = r.triangularView<Eigen::Upper>().solve(q_thin.adjoint());
    CMat dirs = v_adj.adjoint();
    detail::normalize_columns(dirs);
    Beamformer v(std::move(dirs), cs.antennas_per_ap);
    detail::scale_to_tightest_ap(v, budgets);
    return v;
}

// Per-AP multipliers of the joint beam update, carried between outer WMMSE iterations.
struct DualState {
    RVec lambda;
    double step = 0.0; // last accepted step length
    std::vector<double> history; // dual objective at each accepted step
};

enum class DualMethod {
    gradient, // projected gradient ascent, each component scaled by its own curvature
    newton,   // projected Newton ascent on the free multipliers
};

struct WmmseOptions {
    double dual_tol = 1e-6;   // relative, for feasibility and complementary slackness
    int max_dual_iters = 2000;
    DualMethod method = DualMethod::gradient;
};

struct BeamUpdate {
    Beamformer beamformer;
    bool converged = false;
    int dual_iters = 0;
};

namespace detail {

struct JointSystem {
    CMat r;   // sum_l a_l (h_l h_l^H + E_l)
    CMat rhs; // columns mu_k w_k u_k \hat{h}_k
    Eigen::Index num_aps = 0;
    int antennas_per_ap = 1;
};

inline JointSystem joint_system(const ChannelSet& cs, const WmmseAux& aux, const RateWeights& mu)
{
    const BlockWeights bw = block_weights(aux, mu);
    JointSystem sys;
    sys.num_aps = cs.num_aps();
    sys.antennas_per_ap = cs.antennas_per_ap;
    sys.r = cs.h_hat * bw.a.asDiagonal() * cs.h_hat.adjoint();
    const RVec c = cs.rho_tilde.transpose() * bw.a;
    for (Eigen::Index i = 0; i < sys.num_aps; ++i)
        sys.r.diagonal().segment(i * sys.antennas_per_ap, sys.antennas_per_ap).array() += c(i);
    sys.rhs = cs.h_hat * bw.q.asDiagonal();
    return sys;
}

struct DualPoint {
    CMat v;
    RVec powers;
    RMat jacobian;  // d p_i / d lambda_j, negative semidefinite
    double dual_value = 0.0;
};

// Inner minimizer of the Lagrangian for fixed multipliers and the dual function value there.
inline DualPoint evaluate_dual(const JointSystem& sys, const RVec& lambda, const RVec& budgets)
{
    const Eigen::Index n = sys.r.rows();
    const Eigen::Index na = sys.antennas_per_ap;
    CMat shifted = sys.r;
    for (Eigen::Index i = 0; i < sys.num_aps; ++i)
        shifted.diagonal().segment(i * na, na).array() += lambda(i);
    Eigen::LLT<CMat> llt(shifted);
    if (llt.info() != Eigen::Success) {
        // Singular only at lambda = 0 with exact CSI; a vanishing floor gives the min-norm minimizer.
        const double floor = 1e-12 * std::max(std::real(sys.r.trace()) / double(n), std::numeric_limits<double>::min());
        shifted.diagonal().array() += floor;
        llt.compute(shifted);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("wmmse_beam_update: joint system is not positive definite");
    }
    DualPoint pt;
    pt.v = llt.solve(sys.rhs);
    const CMat inverse = llt.solve(CMat::Identity(n, n));
    const Eigen::Index M = sys.num_aps;
    pt.powers.resize(M);
    for (Eigen::Index i = 0; i < M; ++i)
        pt.powers(i) = pt.v.middleRows(i * na, na).squaredNorm();
    // d p_i / d lambda_j = -2 Re tr(V_i^H X_{ij} V_j), X = (R + Lambda)^{-1}
    pt.jacobian.resize(M, M);
    for (Eigen::Index j = 0; j < M; ++j) {
        const CMat xv = inverse.middleCols(j * na, na) * pt.v.middleRows(j * na, na);
        for (Eigen::Index i = 0; i < M; ++i)
            pt.jacobian(i, j) =
                -2.0 * std::real(pt.v.middleRows(i * na, na).conjugate().cwiseProduct(xv.middleRows(i * na, na)).sum());
    }
    pt.jacobian = 0.5 * (pt.jacobian + pt.jacobian.transpose()).eval();
    // g(lambda) = -Re tr(rhs^H V) - lambda^T P
    pt.dual_value = -std::real((sys.rhs.adjoint() * pt.v).trace()) - lambda.dot(budgets);
    return pt;
}

inline bool dual_converged(const DualPoint& pt, const RVec& lambda, const RVec& budgets, double tol)
{
    for (Eigen::Index i = 0; i < budgets.size(); ++i) {
        if (pt.powers(i) > budgets(i) * (1.0 + tol))
            return false;
        if (lambda(i) > 0.0 && std::abs(pt.powers(i) - budgets(i)) > tol * budgets(i))
            return false;
    }
    return true;
}

// Multipliers pinned at zero with a pushing gradient stay put; the rest move along the
// curvature-scaled gradient or, for Newton, the reduced Newton step (scaled gradient when the
// reduced Hessian cannot be factored).
inline RVec ascent_direction(const DualPoint& pt, const RVec& lambda, const RVec& gradient, DualMethod method)
{
    const Eigen::Index M = lambda.size();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < M; ++i)
        if (lambda(i) > 0.0 || gradient(i) > 0.0)
            free.push_back(i);
    RVec direction = RVec::Zero(M);
    if (free.empty())
        return direction;
    const auto F = Eigen::Index(free.size());
    RMat curvature(F, F);
    RVec g(F);
    for (Eigen::Index a = 0; a < F; ++a) {
        g(a) = gradient(free[std::size_t(a)]);
        for (Eigen::Index b = 0; b < F; ++b)
            curvature(a, b) = -pt.jacobian(free[std::size_t(a)], free[std::size_t(b)]);
    }
    RVec d;
    if (method == DualMethod::newton) {
        Eigen::LLT<RMat> llt(curvature);
        if (llt.info() == Eigen::Success)
            d = llt.solve(g);
    }
    if (d.size() != F || !d.allFinite() || d.dot(g) <= 0.0)
        d = g.cwiseQuotient(curvature.diagonal().cwiseMax(1e-300));
    for (Eigen::Index a = 0; a < F; ++a)
        direction(free[std::size_t(a)]) = d(a);
    return direction;
}

} // namespace detail

// Joint per-AP-constrained beam update of conventional WMMSE by ascent on the concave dual,
// with the Lagrangian minimized in closed form at every step. Backtracking halves the step
// until the dual does not decrease. The result is rescaled per AP to be exactly feasible.
inline BeamUpdate wmmse_beam_update(const ChannelSet& cs, const WmmseAux& aux, const RateWeights& mu,
                                    const RVec& budgets, DualState& state, const WmmseOptions& options = {})
{
    detail::check_aux(aux, mu, cs.num_ues());
    const Eigen::Index M = cs.num_aps();
    if (budgets.size() != M || (budgets.array() <= 0.0).any())
        throw std::invalid_argument("wmmse_beam_update: budgets must be positive, one per AP");
    if (state.lambda.size() != M)
        state.lambda = RVec::Zero(M);

    const detail::JointSystem sys = detail::joint_system(cs, aux, mu);
    BeamUpdate out;
    detail::DualPoint current = detail::evaluate_dual(sys, state.lambda, budgets);
    while (out.dual_iters < options.max_dual_iters) {
        if (detail::dual_converged(current, state.lambda, budgets, options.dual_tol)) {
            out.converged = true;
            break;
        }
        ++out.dual_iters;
        const RVec gradient = current.powers - budgets;
        const RVec direction = detail::ascent_direction(current, state.lambda, gradient, options.method);
        bool accepted = false;
        double step = options.method == DualMethod::newton || !(state.step > 0.0) ? 1.0 : std::min(1.0, 2.0 * state.step);
        for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
            const RVec trial = (state.lambda + step * direction).cwiseMax(0.0);
            detail::DualPoint candidate = detail::evaluate_dual(sys, trial, budgets);
            if (candidate.dual_value >= current.dual_value) {
                state.lambda = trial;
                state.step = step;
                current = std::move(candidate);
                state.history.push_back(current.dual_value);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            break; // no ascent direction left at machine precision
    }
    if (!out.converged)
        out.converged = detail::dual_converged(current, state.lambda, budgets, options.dual_tol);

    out.beamformer = Beamformer(std::move(current.v), cs.antennas_per_ap);
    for (Eigen::Index i = 0; i < M; ++i) {
        const double p = out.beamformer.ap_power(i);
        if (p > budgets(i))
            out.beamformer.ap_block(i) *= std::sqrt(budgets(i) / p);
    }
    return out;
}

// Conventional WMMSE: joint beam update alternating with the aux update, same stopping rule as
// the G-R-WMMSE loops. Multipliers are warm-started across outer iterations.
inline SolverReport run_wmmse(const ChannelSet& cs, const RateWeights& mu, const RVec& budgets,
                              const SolverConfig& config, const Beamformer& init, const WmmseOptions& options = {})
{
    detail::check_run_inputs(cs, mu, budgets, config, init);
    const auto start = std::chrono::steady_clock::now();
    const double delta = config.delta(budgets);

    SolverReport report;
    Beamformer v = init;
    WmmseAux aux = update_aux(v, cs);
    report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
    report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));
    DualState dual;
    for (int it = 0; it < config.max_outer_iters; ++it) {
        const CMat previous = v.matrix();
        BeamUpdate upd = wmmse_beam_update(cs, aux, mu, budgets, dual, options);
        report.inner_steps += upd.dual_iters;
        v = std::move(upd.beamformer);
        aux = update_aux(v, cs);
        ++report.iterations;
        report.objective_trace.push_back(weighted_sum_rate(v, cs, mu));
        report.surrogate_trace.push_back(surrogate_objective(v, aux, cs, mu));
        if ((v.matrix() - previous).squaredNorm() <= delta) {
            report.converged = true;
            break;
        }
    }
    report.beamformer = std::move(v);
    report.wall_time = detail::seconds_since(start);
    return report;
}

} // namespace cellfree
