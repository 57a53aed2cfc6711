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

// Draw one network, run the sequential and parallel solvers plus the ZF and MRT precoders,
// and print the resulting sum-rates.

#include <cellfree/cellfree.hpp>

#include <cstdio>

int main()
{
    using namespace cellfree;

    NetworkConfig net;
    net.num_ues = 12;
    net.num_aps = 16;
    net.antennas_per_ap = 2;
    net.num_pilots = 10;
    net.snr_dl = db_to_linear(20.0);
    net.snr_ul = db_to_linear(10.0);

    const Instance inst = sample_instance(net, 2024);
    const ChannelSet& cs = inst.channels;

    SolverConfig config;
    const SolverReport seq = run_sequential(cs, inst.weights, inst.budgets, config, inst.init);
    config.mode = SolverMode::parallel;
    const SolverReport par = run_grwmmse(cs, inst.weights, inst.budgets, config, inst.init);

    auto show = [&](const char* name, const Beamformer& v, int iterations) {
        std::printf("%-10s %8.3f bits/use  %4d iterations  max per-AP load %.6f\n", name,
                    weighted_sum_rate(v, cs, inst.weights), iterations, v.max_load(inst.budgets));
    };
    show("seq", seq.beamformer, seq.iterations);
    show("par", par.beamformer, par.iterations);
    show("zf", zf_precoder(cs, inst.budgets), 0);
    show("mrt", mrt_precoder(cs, inst.budgets), 0);

    // Rates of individual UEs under the expected-rate bound.
    const RVec rates = expected_rates(seq.beamformer, cs);
    for (Eigen::Index k = 0; k < rates.size(); ++k)
        std::printf("  UE %2ld  %.3f\n", long(k), rates(k));
    return 0;
}
