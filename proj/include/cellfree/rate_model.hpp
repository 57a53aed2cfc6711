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

#include "estimation.hpp"

#include <numbers>
#include <stdexcept>

namespace cellfree {

// Beam coefficients for all UEs, (M n_A) x K. Column k is v_k; rows of AP i form V_i (n_A x K),
// and v_{A,i} = vec(V_i) stacks [v_{1,i}; ...; v_{K,i}].
class Beamformer {
public:
    Beamformer() = default;
    Beamformer(Eigen::Index num_aps, int antennas_per_ap, Eigen::Index num_ues)
        : coeffs_(CMat::Zero(num_aps * antennas_per_ap, num_ues)), antennas_per_ap_(antennas_per_ap)
    {
    }
    Beamformer(CMat coeffs, int antennas_per_ap) : coeffs_(std::move(coeffs)), antennas_per_ap_(antennas_per_ap)
    {
        if (antennas_per_ap_ < 1 || coeffs_.rows() % antennas_per_ap_ != 0)
            throw std::invalid_argument("Beamformer: row count must be a multiple of n_A");
    }

    const CMat& matrix() const { return coeffs_; }
    CMat& matrix() { return coeffs_; }

    Eigen::Index num_ues() const { return coeffs_.cols(); }
    Eigen::Index num_aps() const { return coeffs_.rows() / antennas_per_ap_; }
    int antennas_per_ap() const { return antennas_per_ap_; }

    auto ue_beam(Eigen::Index k) const { return coeffs_.col(k); }
    auto ap_block(Eigen::Index i) const { return coeffs_.middleRows(i * antennas_per_ap_, antennas_per_ap_); }
    auto ap_block(Eigen::Index i) { return coeffs_.middleRows(i * antennas_per_ap_, antennas_per_ap_); }

    CVec ap_stack(Eigen::Index i) const
    {
        const CMat block = ap_block(i);
        return Eigen::Map<const CVec>(block.data(), block.size());
    }
    void set_ap_stack(Eigen::Index i, const CVec& stacked)
    {
        if (stacked.size() != Eigen::Index(antennas_per_ap_) * num_ues())
            throw std::invalid_argument("Beamformer: stacked AP block has wrong length");
        ap_block(i) = Eigen::Map<const CMat>(stacked.data(), antennas_per_ap_, num_ues());
    }

    double ap_power(Eigen::Index i) const { return ap_block(i).squaredNorm(); }
    RVec ap_powers() const
    {
        RVec p(num_aps());
        for (Eigen::Index i = 0; i < num_aps(); ++i)
            p(i) = ap_power(i);
        return p;
    }

    // Largest ratio of per-AP power to budget.
    double max_load(const RVec& budgets) const { return (ap_powers().array() / budgets.array()).maxCoeff(); }

    bool feasible(const RVec& budgets, double rel_slack = 1e-9) const
    {
        const RVec p = ap_powers();
        for (Eigen::Index i = 0; i < p.size(); ++i)
            if (p(i) > budgets(i) * (1.0 + rel_slack))
                return false;
        return true;
    }

private:
    CMat coeffs_;
    int antennas_per_ap_ = 1;
};

struct WmmseAux {
    CVec u; // receive scalars
    RVec w; // MSE weights
};

struct RateWeights {
    RVec mu;

    static RateWeights unit(Eigen::Index num_ues) { return {RVec::Ones(num_ues)}; }
};

inline void check_dimensions(const Beamformer& v, const ChannelSet& cs)
{
    if (v.matrix().rows() != cs.h_hat.rows() || v.num_ues() != cs.num_ues() ||
        v.antennas_per_ap() != cs.antennas_per_ap || cs.rho_tilde.rows() != cs.num_ues() ||
        cs.rho_tilde.cols() * cs.antennas_per_ap != cs.h_hat.rows())
        throw std::invalid_argument("beamformer and channel set dimensions disagree");
}

// Effective gains G(k, l) = \hat{h}_k^H v_l.
inline CMat effective_gains(const Beamformer& v, const ChannelSet& cs) { return cs.h_hat.adjoint() * v.matrix(); }

namespace detail {

inline RVec interference_from_gains(const CMat& gains, const Beamformer& v, const ChannelSet& cs)
{
    const Eigen::Index K = gains.rows();
    // sum_l v_l^H E_k v_l = sum_i rho_tilde[k][i] * (power AP i radiates)
    RVec inter = cs.rho_tilde * v.ap_powers();
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < K; ++l)
            if (l != k)
                inter(k) += std::norm(gains(k, l));
    return inter;
}

} // namespace detail

inline RVec interference_powers(const Beamformer& v, const ChannelSet& cs)
{
    check_dimensions(v, cs);
    return detail::interference_from_gains(effective_gains(v, cs), v, cs);
}

inline double interference_power(const Beamformer& v, const ChannelSet& cs, Eigen::Index k)
{
    check_dimensions(v, cs);
    const CVec hk = cs.h_hat.col(k);
    double inter = 0.0;
    for (Eigen::Index l = 0; l < v.num_ues(); ++l) {
        if (l != k)
            inter += std::norm(hk.dot(v.ue_beam(l)));
        for (Eigen::Index i = 0; i < cs.num_aps(); ++i)
            inter += cs.rho_tilde(k, i) * v.ue_beam(l).segment(i * cs.antennas_per_ap, cs.antennas_per_ap).squaredNorm();
    }
    return inter;
}

// Closed-form expected-rate lower bound, bits per channel use.
inline double expected_rate(const Beamformer& v, const ChannelSet& cs, Eigen::Index k)
{
    const double signal = std::norm(cs.h_hat.col(k).dot(v.ue_beam(k)));
    return std::log2(1.0 + signal / (interference_power(v, cs, k) + cs.noise_dl));
}

inline RVec expected_rates(const Beamformer& v, const ChannelSet& cs)
{
    check_dimensions(v, cs);
    const CMat gains = effective_gains(v, cs);
    const RVec inter = detail::interference_from_gains(gains, v, cs);
    RVec r(gains.rows());
    for (Eigen::Index k = 0; k < r.size(); ++k)
        r(k) = std::log2(1.0 + std::norm(gains(k, k)) / (inter(k) + cs.noise_dl));
    return r;
}

inline double weighted_sum_rate(const Beamformer& v, const ChannelSet& cs, const RateWeights& mu)
{
    return mu.mu.dot(expected_rates(v, cs));
}

inline double mse(const Beamformer& v, const ChannelSet& cs, cplx u_k, Eigen::Index k)
{
    const cplx g = cs.h_hat.col(k).dot(v.ue_beam(k));
    return std::norm(1.0 - std::conj(u_k) * g) + std::norm(u_k) * (interference_power(v, cs, k) + cs.noise_dl);
}

// Optimal receive scalars and weights for fixed beams; the WMMSE bound is tight here.
inline WmmseAux update_aux(const Beamformer& v, const ChannelSet& cs)
{
    check_dimensions(v, cs);
    const CMat gains = effective_gains(v, cs);
    const RVec inter = detail::interference_from_gains(gains, v, cs);
    const Eigen::Index K = gains.rows();
    WmmseAux aux{CVec(K), RVec(K)};
    for (Eigen::Index k = 0; k < K; ++k) {
        const cplx g = gains(k, k);
        const double total = std::norm(g) + inter(k) + cs.noise_dl;
        if (!(total > 0.0) || !std::isfinite(total))
            throw std::domain_error("update_aux: non-positive or non-finite received power");
        aux.u(k) = g / total;
        const double residual = std::real(1.0 - std::conj(aux.u(k)) * g);
        if (!(residual > 0.0))
            throw std::domain_error("update_aux: degenerate MSE weight");
        aux.w(k) = 1.0 / residual;
    }
    return aux;
}

// sum_k mu_k ((w_k / ln 2) MSE_k - log2 w_k); block coordinate descent drives this down.
inline double surrogate_objective(const Beamformer& v, const WmmseAux& aux, const ChannelSet& cs, const RateWeights& mu)
{
    check_dimensions(v, cs);
    const CMat gains = effective_gains(v, cs);
    const RVec inter = detail::interference_from_gains(gains, v, cs);
    double total = 0.0;
    for (Eigen::Index k = 0; k < gains.rows(); ++k) {
        const double m = std::norm(1.0 - std::conj(aux.u(k)) * gains(k, k)) + std::norm(aux.u(k)) * (inter(k) + cs.noise_dl);
        total += mu.mu(k) * (aux.w(k) / std::numbers::ln2 * m - std::log2(aux.w(k)));
    }
    return total;
}

// mu_k = K u_k / sum_l u_l with u_k ~ U(0, 1).
inline RateWeights random_weights(Eigen::Index num_ues, std::uint64_t seed)
{
    if (num_ues < 1)
        throw std::invalid_argument("random_weights: K must be >= 1");
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RVec raw(num_ues);
    do {
        for (Eigen::Index k = 0; k < num_ues; ++k)
            raw(k) = unit(rng);
    } while (!(raw.sum() > 0.0) || (raw.array() <= 0.0).any());
    return {raw * (double(num_ues) / raw.sum())};
}

inline RateWeights normalized_weights(const RVec& raw)
{
    if (!(raw.sum() > 0.0))
        throw std::invalid_argument("normalized_weights: weights must have positive sum");
    return {raw * (double(raw.size()) / raw.sum())};
}

} // namespace cellfree
