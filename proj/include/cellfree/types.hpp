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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace cellfree {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

using Rng = std::mt19937_64;

// Independent sub-streams derived from one master seed.
enum class SeedPurpose : std::uint64_t {
    geometry = 1,
    channels = 2,
    weights = 3,
    init = 4,
    selftest = 5,
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose, std::uint64_t index = 0)
{
    return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(purpose))) + index);
}

// One CN(0, variance) draw: real and imaginary parts each N(0, variance / 2).
inline cplx complex_gaussian(Rng& rng, double variance)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = std::sqrt(0.5 * variance);
    const double re = normal(rng);
    const double im = normal(rng);
    return {s * re, s * im};
}

inline CVec complex_gaussian_vector(Rng& rng, Eigen::Index n, double variance)
{
    CVec v(n);
    for (Eigen::Index j = 0; j < n; ++j)
        v(j) = complex_gaussian(rng, variance);
    return v;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace cellfree
