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

#include "baselines.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cellfree {

enum class SolverKind { wmmse, grwmmse_seq, grwmmse_par, grwmmse_seq_nonrobust, zf, mrt };

inline constexpr std::array<std::pair<SolverKind, std::string_view>, 6> solver_names{{
    {SolverKind::wmmse, "wmmse"},
    {SolverKind::grwmmse_seq, "grwmmse_seq"},
    {SolverKind::grwmmse_par, "grwmmse_par"},
    {SolverKind::grwmmse_seq_nonrobust, "grwmmse_seq_nonrobust"},
    {SolverKind::zf, "zf"},
    {SolverKind::mrt, "mrt"},
}};

inline std::string_view to_string(SolverKind kind)
{
    for (const auto& [k, name] : solver_names)
        if (k == kind)
            return name;
    throw std::logic_error("unknown solver kind");
}

inline SolverKind parse_solver(std::string_view name)
{
    for (const auto& [k, n] : solver_names)
        if (n == name)
            return k;
    throw std::invalid_argument("unknown solver '" + std::string(name) + "'");
}

// Comma separated list, e.g. "wmmse,grwmmse_seq".
inline std::vector<SolverKind> parse_solver_list(std::string_view list)
{
    std::vector<SolverKind> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const std::size_t comma = std::min(list.find(',', pos), list.size());
        const std::string_view item = list.substr(pos, comma - pos);
        if (item.empty())
            throw std::invalid_argument("empty entry in solver list");
        const SolverKind kind = parse_solver(item);
        if (std::find(out.begin(), out.end(), kind) != out.end())
            throw std::invalid_argument("duplicate solver '" + std::string(item) + "'");
        out.push_back(kind);
        pos = comma + 1;
    }
    return out;
}

enum class SweepVariable { num_aps, snr_dl };

struct ExperimentSpec {
    SweepVariable sweep = SweepVariable::num_aps;
    std::vector<double> values{8, 16, 24, 32}; // AP counts, or downlink SNRs in dB
    int trials = 10;
    std::vector<SolverKind> solvers{SolverKind::wmmse, SolverKind::grwmmse_seq, SolverKind::grwmmse_par,
                                    SolverKind::zf, SolverKind::mrt};
    NetworkConfig network;
    SolverConfig solver;
    WmmseOptions wmmse;
    std::uint64_t seed = 1;
    bool weighted = false;

    void validate() const
    {
        if (trials < 1)
            throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
        if (values.empty())
            throw std::invalid_argument("ExperimentSpec: at least one sweep value required");
        for (std::size_t j = 1; j < values.size(); ++j)
            if (!(values[j] > values[j - 1]))
                throw std::invalid_argument("ExperimentSpec: sweep values must be strictly increasing");
        if (sweep == SweepVariable::num_aps)
            for (double m : values)
                if (m < 1.0 || m != std::floor(m))
                    throw std::invalid_argument("ExperimentSpec: AP counts must be positive integers");
        if (solvers.empty())
            throw std::invalid_argument("ExperimentSpec: at least one solver required");
        network_at(values.front()).validate();
        solver.validate();
    }

    // Network configuration of one sweep point. A sweep overrides explicit per-AP budgets.
    NetworkConfig network_at(double value) const
    {
        NetworkConfig cfg = network;
        if (sweep == SweepVariable::num_aps) {
            cfg.num_aps = int(value);
            cfg.per_ap_budget.clear();
        } else {
            cfg.snr_dl = db_to_linear(value);
            cfg.per_ap_budget.clear();
        }
        return cfg;
    }
};

struct ResultRecord {
    double sweep = 0.0;
    std::string solver;
    int trial = 0;
    std::uint64_t seed = 0;
    double wsr_bits = 0.0; // NaN when the solver failed on this draw
    double wall_time_s = 0.0;
    int iterations = 0;
    bool converged = false;

    bool operator==(const ResultRecord&) const = default;
};

// One random draw of the whole network.
struct Instance {
    NetworkConfig config;
    Geometry geometry;
    PilotAssignment pilots;
    ChannelSet channels;
    RVec budgets;
    RateWeights weights;
    Beamformer init;
};

inline Instance sample_instance(const NetworkConfig& config, std::uint64_t trial_seed, bool weighted = false)
{
    config.validate();
    Instance inst;
    inst.config = config;
    inst.geometry = sample_geometry(config, derive_seed(trial_seed, SeedPurpose::geometry));
    inst.pilots = assign_pilots(config);
    inst.channels = sample_channel_set(inst.geometry, inst.pilots, config, derive_seed(trial_seed, SeedPurpose::channels));
    inst.budgets = config.budgets();
    inst.weights = weighted ? random_weights(config.num_ues, derive_seed(trial_seed, SeedPurpose::weights))
                            : RateWeights::unit(config.num_ues);
    inst.init = random_feasible_init(config.num_aps, config.antennas_per_ap, config.num_ues, inst.budgets,
                                     derive_seed(trial_seed, SeedPurpose::init));
    return inst;
}

struct SolverOutcome {
    Beamformer beamformer;
    double wall_time = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Runs one solver on an instance; rates are always judged on the instance's own channel set.
inline SolverOutcome run_solver(SolverKind kind, const Instance& inst, const SolverConfig& solver,
                                const WmmseOptions& wmmse = {})
{
    const ChannelSet& cs = inst.channels;
    auto from_report = [](SolverReport r) {
        return SolverOutcome{std::move(r.beamformer), r.wall_time, r.iterations, r.converged};
    };
    auto timed = [](auto&& make) {
        const auto start = std::chrono::steady_clock::now();
        SolverOutcome out{make(), 0.0, 0, true};
        out.wall_time = detail::seconds_since(start);
        return out;
    };
    switch (kind) {
    case SolverKind::wmmse:
        return from_report(run_wmmse(cs, inst.weights, inst.budgets, solver, inst.init, wmmse));
    case SolverKind::grwmmse_seq:
        return from_report(run_sequential(cs, inst.weights, inst.budgets, solver, inst.init));
    case SolverKind::grwmmse_par:
        return from_report(run_parallel(cs, inst.weights, inst.budgets, solver, inst.init));
    case SolverKind::grwmmse_seq_nonrobust: {
        const ChannelSet view = non_robust_view(cs);
        return from_report(run_sequential(view, inst.weights, inst.budgets, solver, inst.init));
    }
    case SolverKind::zf:
        return timed([&] { return zf_precoder(cs, inst.budgets); });
    case SolverKind::mrt:
        return timed([&] { return mrt_precoder(cs, inst.budgets); });
    }
    throw std::logic_error("unhandled solver kind");
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t point, int trial)
{
    return derive_seed(master, SeedPurpose::geometry, (std::uint64_t(point) << 32) | std::uint64_t(trial));
}

struct RunOptions {
    int threads = 1;      // trials in flight at once
    int spot_checks = 10; // records whose rate is recomputed UE by UE
};

namespace detail {

inline double wsr_by_ue(const Beamformer& v, const ChannelSet& cs, const RateWeights& mu)
{
    double total = 0.0;
    for (Eigen::Index k = 0; k < cs.num_ues(); ++k)
        total += mu.mu(k) * expected_rate(v, cs, k);
    return total;
}

} // namespace detail

// Every (point, trial) draws a fresh network; all solvers start from the same beamformer.
// Records come back sorted by (point, solver as listed, trial).
inline std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const RunOptions& options = {})
{
    spec.validate();
    const std::size_t n_points = spec.values.size();
    const std::size_t n_solvers = spec.solvers.size();
    const std::size_t n_trials = std::size_t(spec.trials);
    const std::size_t total = n_points * n_solvers * n_trials;
    auto slot = [&](std::size_t p, std::size_t s, std::size_t t) { return (p * n_solvers + s) * n_trials + t; };

    std::set<std::size_t> spot;
    const std::size_t checks = std::min<std::size_t>(std::size_t(std::max(options.spot_checks, 0)), total);
    for (std::size_t c = 0; c < checks; ++c)
        spot.insert(c * total / checks);

    std::vector<ResultRecord> records(total);
    std::mutex error_mutex;
    std::string spot_error;

    auto run_job = [&](std::size_t job) {
        const std::size_t p = job / n_trials;
        const std::size_t t = job % n_trials;
        const double value = spec.values[p];
        const std::uint64_t seed = trial_seed(spec.seed, p, int(t));
        const Instance inst = sample_instance(spec.network_at(value), seed, spec.weighted);
        for (std::size_t s = 0; s < n_solvers; ++s) {
            ResultRecord& rec = records[slot(p, s, t)];
            rec.sweep = value;
            rec.solver = std::string(to_string(spec.solvers[s]));
            rec.trial = int(t);
            rec.seed = seed;
            try {
                const SolverOutcome out = run_solver(spec.solvers[s], inst, spec.solver, spec.wmmse);
                rec.wsr_bits = weighted_sum_rate(out.beamformer, inst.channels, inst.weights);
                rec.wall_time_s = out.wall_time;
                rec.iterations = out.iterations;
                rec.converged = out.converged;
                if (spot.contains(slot(p, s, t))) {
                    const double again = detail::wsr_by_ue(out.beamformer, inst.channels, inst.weights);
                    if (std::abs(again - rec.wsr_bits) > 1e-9 * std::max(1.0, std::abs(again))) {
                        const std::lock_guard lock(error_mutex);
                        spot_error = "recomputed rate disagrees for " + rec.solver;
                    }
                }
            } catch (const std::exception&) {
                rec.wsr_bits = std::numeric_limits<double>::quiet_NaN();
                rec.wall_time_s = 0.0;
                rec.iterations = 0;
                rec.converged = false;
            }
        }
    };

    const std::size_t jobs = n_points * n_trials;
    const int workers = int(std::min<std::size_t>(std::size_t(std::max(options.threads, 1)), jobs));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs; ++j)
            run_job(j);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t j = std::size_t(w); j < jobs; j += std::size_t(workers))
                    run_job(j);
            });
    }
    if (!spot_error.empty())
        throw std::logic_error("run_experiment: " + spot_error);
    return records;
}

inline constexpr std::string_view csv_header = "sweep,solver,trial,seed,wsr_bits,wall_time_s,iterations,converged";

namespace detail {

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_row(const std::string& line)
{
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ','))
        fields.push_back(f);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

} // namespace detail

inline void write_csv(std::ostream& os, const std::vector<ResultRecord>& records)
{
    os << csv_header << '\n';
    for (const auto& r : records)
        os << detail::format_double(r.sweep) << ',' << r.solver << ',' << r.trial << ',' << r.seed << ','
           << detail::format_double(r.wsr_bits) << ',' << detail::format_double(r.wall_time_s) << ',' << r.iterations
           << ',' << (r.converged ? 1 : 0) << '\n';
}

inline void emit_csv(const std::vector<ResultRecord>& records, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
    write_csv(os, records);
    if (!os)
        throw std::runtime_error("emit_csv: write to '" + path + "' failed");
}

inline std::vector<ResultRecord> read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != csv_header)
        throw std::runtime_error("read_csv: missing or unexpected header");
    std::vector<ResultRecord> out;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        const auto f = detail::split_csv_row(line);
        if (f.size() != 8)
            throw std::runtime_error("read_csv: row " + std::to_string(row) + " does not have 8 fields");
        try {
            ResultRecord r;
            r.sweep = std::stod(f[0]);
            r.solver = f[1];
            r.trial = std::stoi(f[2]);
            r.seed = std::stoull(f[3]);
            r.wsr_bits = std::stod(f[4]);
            r.wall_time_s = std::stod(f[5]);
            r.iterations = std::stoi(f[6]);
            if (f[7] != "0" && f[7] != "1")
                throw std::invalid_argument("converged");
            r.converged = f[7] == "1";
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::runtime_error("read_csv: malformed field in row " + std::to_string(row));
        }
    }
    return out;
}

inline std::vector<ResultRecord> parse_csv(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("parse_csv: cannot open '" + path + "'");
    return read_csv(is);
}

struct AggregateRow {
    double sweep = 0.0;
    std::string solver;
    int trials = 0;   // successful trials
    int failures = 0;
    double mean_wsr = 0.0;
    double std_wsr = 0.0;
    double mean_time_s = 0.0;
    double mean_iterations = 0.0;
};

// Mean and sample standard deviation per (point, solver), in first-appearance order.
inline std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records)
{
    std::vector<AggregateRow> rows;
    std::vector<double> sum_sq;
    for (const auto& r : records) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const AggregateRow& a) { return a.sweep == r.sweep && a.solver == r.solver; });
        if (it == rows.end()) {
            rows.push_back({r.sweep, r.solver});
            sum_sq.push_back(0.0);
            it = rows.end() - 1;
        }
        if (std::isnan(r.wsr_bits)) {
            ++it->failures;
            continue;
        }
        ++it->trials;
        it->mean_wsr += r.wsr_bits;
        sum_sq[std::size_t(it - rows.begin())] += r.wsr_bits * r.wsr_bits;
        it->mean_time_s += r.wall_time_s;
        it->mean_iterations += r.iterations;
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
        auto& a = rows[j];
        if (a.trials == 0)
            continue;
        const double n = a.trials;
        a.mean_wsr /= n;
        a.mean_time_s /= n;
        a.mean_iterations /= n;
        a.std_wsr = a.trials > 1 ? std::sqrt(std::max(0.0, (sum_sq[j] - n * a.mean_wsr * a.mean_wsr) / (n - 1))) : 0.0;
    }
    return rows;
}

inline void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("emit_aggregate_csv: cannot open '" + path + "' for writing");
    os << "sweep,solver,trials,failures,mean_wsr_bits,std_wsr_bits,mean_wall_time_s,mean_iterations\n";
    for (const auto& a : rows)
        os << detail::format_double(a.sweep) << ',' << a.solver << ',' << a.trials << ',' << a.failures << ','
           << detail::format_double(a.mean_wsr) << ',' << detail::format_double(a.std_wsr) << ','
           << detail::format_double(a.mean_time_s) << ',' << detail::format_double(a.mean_iterations) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Config files (JSON). SNRs are given in dB and converted here; everything downstream is linear.
//
// {
//   "network":    { "num_ues": 12, "num_aps": 16, "antennas_per_ap": 2, "num_pilots": 10,
//                   "radius_m": 350, "ref_distance_m": 30, "pathloss_exp": 3,
//                   "snr_dl_db": 20, "snr_ul_db": 10, "per_ap_budget": [..] },
//   "solver":     { "max_outer_iters": 500, "outer_tol": 0.01, "outer_tol_rel": 1e-5,
//                   "bisect_tol": 1e-9, "step_beta0": 1, "step_eps": 0.1, "threads": 1 },
//   "wmmse":      { "dual_tol": 1e-6, "max_dual_iters": 2000, "method": "gradient" },
//   "experiment": { "sweep": "num_aps", "values": [8, 16, 24, 32], "trials": 50,
//                   "solvers": ["wmmse", "grwmmse_seq"], "seed": 1, "weighted": false }
// }
//
// Every section and key is optional; unknown keys are rejected.

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& section, std::string_view name, std::initializer_list<std::string_view> allowed)
{
    if (!section.is_object())
        throw std::invalid_argument("config: '" + std::string(name) + "' must be an object");
    for (const auto& [key, _] : section.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("config: unknown key '" + key + "' in '" + std::string(name) + "'");
}

template <class T>
void read_key(const json& section, const char* key, T& target)
{
    if (section.contains(key))
        target = section.at(key).get<T>();
}

} // namespace detail

inline ExperimentSpec parse_experiment_config(const nlohmann::json& root)
{
    using detail::read_key;
    ExperimentSpec spec;
    detail::reject_unknown(root, "root", {"network", "solver", "wmmse", "experiment"});
    try {
        if (root.contains("network")) {
            const auto& n = root.at("network");
            detail::reject_unknown(n, "network",
                                   {"num_ues", "num_aps", "antennas_per_ap", "num_pilots", "radius_m", "ref_distance_m",
                                    "pathloss_exp", "snr_dl_db", "snr_ul_db", "noise_dl", "noise_ul", "per_ap_budget"});
            auto& net = spec.network;
            read_key(n, "num_ues", net.num_ues);
            read_key(n, "num_aps", net.num_aps);
            read_key(n, "antennas_per_ap", net.antennas_per_ap);
            read_key(n, "num_pilots", net.num_pilots);
            read_key(n, "radius_m", net.radius);
            read_key(n, "ref_distance_m", net.ref_distance);
            read_key(n, "pathloss_exp", net.pathloss_exp);
            read_key(n, "noise_dl", net.noise_dl);
            read_key(n, "noise_ul", net.noise_ul);
            read_key(n, "per_ap_budget", net.per_ap_budget);
            if (n.contains("snr_dl_db"))
                net.snr_dl = db_to_linear(n.at("snr_dl_db").get<double>());
            if (n.contains("snr_ul_db"))
                net.snr_ul = db_to_linear(n.at("snr_ul_db").get<double>());
        }
        if (root.contains("solver")) {
            const auto& s = root.at("solver");
            detail::reject_unknown(s, "solver",
                                   {"max_outer_iters", "outer_tol", "outer_tol_rel", "bisect_tol", "step_beta0",
                                    "step_eps", "threads", "closed_form_single_antenna"});
            auto& sc = spec.solver;
            read_key(s, "max_outer_iters", sc.max_outer_iters);
            if (s.contains("outer_tol"))
                sc.outer_tol = s.at("outer_tol").get<double>();
            read_key(s, "outer_tol_rel", sc.outer_tol_rel);
            read_key(s, "bisect_tol", sc.bisect_tol);
            read_key(s, "step_beta0", sc.step_beta0);
            read_key(s, "step_eps", sc.step_eps);
            read_key(s, "threads", sc.threads);
            read_key(s, "closed_form_single_antenna", sc.closed_form_single_antenna);
        }
        if (root.contains("wmmse")) {
            const auto& w = root.at("wmmse");
            detail::reject_unknown(w, "wmmse", {"dual_tol", "max_dual_iters", "method"});
            read_key(w, "dual_tol", spec.wmmse.dual_tol);
            read_key(w, "max_dual_iters", spec.wmmse.max_dual_iters);
            if (w.contains("method")) {
                const auto method = w.at("method").get<std::string>();
                if (method == "gradient")
                    spec.wmmse.method = DualMethod::gradient;
                else if (method == "newton")
                    spec.wmmse.method = DualMethod::newton;
                else
                    throw std::invalid_argument("config: wmmse method must be 'gradient' or 'newton'");
            }
        }
        if (root.contains("experiment")) {
            const auto& e = root.at("experiment");
            detail::reject_unknown(e, "experiment", {"sweep", "values", "trials", "solvers", "seed", "weighted"});
            if (e.contains("sweep")) {
                const auto sweep = e.at("sweep").get<std::string>();
                if (sweep == "num_aps")
                    spec.sweep = SweepVariable::num_aps;
                else if (sweep == "snr_dl")
                    spec.sweep = SweepVariable::snr_dl;
                else
                    throw std::invalid_argument("config: sweep must be 'num_aps' or 'snr_dl'");
            }
            read_key(e, "values", spec.values);
            read_key(e, "trials", spec.trials);
            read_key(e, "seed", spec.seed);
            read_key(e, "weighted", spec.weighted);
            if (e.contains("solvers")) {
                spec.solvers.clear();
                for (const auto& name : e.at("solvers"))
                    spec.solvers.push_back(parse_solver(name.get<std::string>()));
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("config: ") + ex.what());
    }
    return spec;
}

inline ExperimentSpec load_experiment_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open config '" + path + "'");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument("config '" + path + "' is not valid JSON: " + ex.what());
    }
    return parse_experiment_config(root);
}

} // namespace cellfree
