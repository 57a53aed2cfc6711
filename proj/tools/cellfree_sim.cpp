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

// cellfree_sim: command line driver for the beamforming experiments.
//
//   cellfree_sim sweep-aps [--config f.json] [--seed N] [--trials N] [--solvers a,b] [--out f.csv]
//   cellfree_sim sweep-snr [...same flags...]
//   cellfree_sim single    [--config f.json] [--seed N] [--solvers a,b] [--out trace.csv]
//   cellfree_sim selftest  [--seed N]

#include <cellfree/cellfree.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace cellfree;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string solvers;
    std::optional<int> trials;
    std::vector<double> values;
    std::string aggregate_out;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool sweep)
{
    cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output CSV path (default: stdout)");
    cmd->add_option("--solvers", o.solvers, "comma separated solver list");
    if (sweep) {
        cmd->add_option("--trials", o.trials, "trials per sweep point")->check(CLI::PositiveNumber);
        cmd->add_option("--values", o.values, "sweep values (AP counts or downlink SNRs in dB)");
        cmd->add_option("--aggregate", o.aggregate_out, "also write per-point mean and std to this CSV");
        cmd->add_option("--threads", o.threads, "trials in flight at once")->check(CLI::PositiveNumber);
    }
}

ExperimentSpec build_spec(const CommonOptions& o)
{
    ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_experiment_config(o.config);
    if (o.seed)
        spec.seed = *o.seed;
    if (o.trials)
        spec.trials = *o.trials;
    if (!o.solvers.empty())
        spec.solvers = parse_solver_list(o.solvers);
    if (!o.values.empty())
        spec.values = o.values;
    return spec;
}

int run_sweep(const CommonOptions& o, SweepVariable variable)
{
    ExperimentSpec spec = build_spec(o);
    if (spec.sweep != variable && o.values.empty()) {
        // A config written for the other sweep keeps its network but takes default values.
        spec.values = variable == SweepVariable::num_aps ? std::vector<double>{8, 16, 24, 32}
                                                         : std::vector<double>{0, 5, 10, 15, 20};
    }
    spec.sweep = variable;
    RunOptions run;
    run.threads = o.threads;
    const auto records = run_experiment(spec, run);
    if (o.out.empty())
        write_csv(std::cout, records);
    else
        emit_csv(records, o.out);
    if (!o.aggregate_out.empty())
        emit_aggregate_csv(aggregate(records), o.aggregate_out);
    int failures = 0;
    for (const auto& r : records)
        failures += std::isnan(r.wsr_bits);
    if (failures > 0)
        std::cerr << failures << " solver run(s) failed and were recorded with NaN rate\n";
    return 0;
}

// One instance, per-iteration traces. The CSV holds no timings so equal seeds give equal files.
int run_single(const CommonOptions& o)
{
    const ExperimentSpec spec = build_spec(o);
    spec.validate();
    const NetworkConfig& net = spec.network;
    const Instance inst = sample_instance(net, trial_seed(spec.seed, 0, 0), spec.weighted);

    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out, std::ios::binary);
        if (!file)
            throw std::runtime_error("cannot open '" + o.out + "' for writing");
    }
    std::ostream& csv = o.out.empty() ? std::cout : file;
    std::ostream& log = o.out.empty() ? std::cerr : std::cout;
    csv << "solver,iteration,wsr_bits,surrogate\n";
    auto row = [&](SolverKind kind, int it, double wsr, double sur) {
        char buf[96];
        std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g\n", it, wsr, sur);
        csv << to_string(kind) << buf;
    };

    log << "K=" << net.num_ues << " M=" << net.num_aps << " n_A=" << net.antennas_per_ap << " L=" << net.num_pilots
        << " seed=" << spec.seed << '\n';
    for (SolverKind kind : spec.solvers) {
        const ChannelSet& cs = inst.channels;
        const auto start = std::chrono::steady_clock::now();
        SolverReport report;
        switch (kind) {
        case SolverKind::wmmse:
            report = run_wmmse(cs, inst.weights, inst.budgets, spec.solver, inst.init, spec.wmmse);
            break;
        case SolverKind::grwmmse_seq:
            report = run_sequential(cs, inst.weights, inst.budgets, spec.solver, inst.init);
            break;
        case SolverKind::grwmmse_par:
            report = run_parallel(cs, inst.weights, inst.budgets, spec.solver, inst.init);
            break;
        case SolverKind::grwmmse_seq_nonrobust: {
            // Traces on the solver's own view; the final rate below uses the true statistics.
            report = run_sequential(non_robust_view(cs), inst.weights, inst.budgets, spec.solver, inst.init);
            break;
        }
        case SolverKind::zf:
        case SolverKind::mrt: {
            report.beamformer = kind == SolverKind::zf ? zf_precoder(cs, inst.budgets) : mrt_precoder(cs, inst.budgets);
            report.objective_trace.push_back(weighted_sum_rate(report.beamformer, cs, inst.weights));
            report.surrogate_trace.push_back(
                surrogate_objective(report.beamformer, update_aux(report.beamformer, cs), cs, inst.weights));
            report.converged = true;
            break;
        }
        }
        const double seconds = detail::seconds_since(start);
        for (std::size_t it = 0; it < report.objective_trace.size(); ++it)
            row(kind, int(it), report.objective_trace[it], report.surrogate_trace[it]);
        const double wsr = weighted_sum_rate(report.beamformer, cs, inst.weights);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-22s wsr=%9.4f bits  iterations=%4d  converged=%d  max_load=%.12f  time=%.4fs\n",
                      std::string(to_string(kind)).c_str(), wsr, report.iterations, int(report.converged),
                      report.beamformer.max_load(inst.budgets), seconds);
        log << buf;
    }
    return 0;
}

int run_selftest_cmd(const CommonOptions& o)
{
    const auto checks = run_selftest(o.seed.value_or(1));
    bool ok = true;
    for (const auto& c : checks) {
        std::printf("%-4s %-40s worst=%.3e tol=%.1e\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.worst, c.tolerance);
        ok = ok && c.passed;
    }
    std::printf("%s\n", ok ? "selftest passed" : "selftest FAILED");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cooperative downlink beamforming simulator for cell-free massive MIMO"};
    app.require_subcommand(1);
    CommonOptions aps, snr, single, self;
    auto* cmd_aps = app.add_subcommand("sweep-aps", "sweep the number of APs");
    auto* cmd_snr = app.add_subcommand("sweep-snr", "sweep the downlink SNR (dB)");
    auto* cmd_single = app.add_subcommand("single", "one instance with per-iteration traces");
    auto* cmd_self = app.add_subcommand("selftest", "invariant checks on small random instances");
    add_common(cmd_aps, aps, true);
    add_common(cmd_snr, snr, true);
    add_common(cmd_single, single, false);
    cmd_self->add_option("--seed", self.seed, "seed for the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*cmd_aps)
            return run_sweep(aps, SweepVariable::num_aps);
        if (*cmd_snr)
            return run_sweep(snr, SweepVariable::snr_dl);
        if (*cmd_single)
            return run_single(single);
        return run_selftest_cmd(self);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
