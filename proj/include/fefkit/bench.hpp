#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fefkit/filter.hpp"
#include "fefkit/io.hpp"
#include "fefkit/state_space.hpp"
#include "fefkit/varx.hpp"

namespace fefkit {

/// The compared designs:
///  Alg0 — design pipeline fed exact predictor MPs of the true model;
///  Alg1 — Ho-Kalman predictor identification, then the model-based filter;
///  Alg2 — data-driven realization with the gain forced to zero;
///  Alg3 — full data-driven design with the stabilizing gain.
enum class Algorithm { Alg0, Alg1, Alg2, Alg3 };

const char* algorithm_name(Algorithm alg);

struct VtolSystem {
    StateSpaceModel plant;  ///< 8-state actuator + aircraft chain, dt = 0.5
    Eigen::MatrixXd F;      ///< stabilizing output feedback gain
};

/// Closed-loop benchmark plant. The 4-state aircraft core is a stand-in
/// unstable model; the input sign convention of the second channel is chosen
/// so the fixed feedback gains stabilize the loop. Asserts open-loop
/// instability and closed-loop stability at build time.
VtolSystem build_vtol();

struct ScenarioConfig {
    std::string scenario = "actuator";  ///< "actuator" or "sensor"
    std::vector<FaultChannel> faults;   ///< empty: scenario default
    Eigen::Index ident_samples = 20000;
    Eigen::Index horizon = 1500;
    Eigen::Index onset = 500;
    int p = 12;
    Eigen::Index L = 90;
    Eigen::Index l = 45;
    Eigen::Index m = 45;
    int order_alg0 = 8;
    int order_alg1 = 8;
    int order_alg2 = 8;
    int order_alg3 = 8;
    double tau_rel_tol = 0.05;  ///< relative-degree threshold for identified MPs
    std::uint64_t base_seed = 1;
    int mc_runs = 25;
    Eigen::Index rmse_begin = 600;
    double reference_level = 2.0;   ///< constant reference in faulty runs
    double eta_std = 1.0;           ///< excitation level for identification

    /// Desk-scale defaults (CI-sized); full uses 100k samples and 100 runs.
    static ScenarioConfig desk(const std::string& scenario);
    static ScenarioConfig full(const std::string& scenario);

    std::vector<FaultChannel> resolved_faults() const;

    /// onset < horizon and l + m <= L (all identified MPs get used).
    void validate() const;
};

struct RunRecord {
    std::string alg;
    std::uint64_t seed = 0;
    int order = 0;
    int varx_order = 0;
    bool design_ok = false;
    std::string message;
    double phi1_radius = 0.0;       ///< realized open-loop inverse radius
    double closed_loop_radius = 0.0;
    bool stable = false;            ///< closed-loop radius < 1
    std::vector<double> rmse;       ///< per fault channel; empty if not run
    bool diverged = false;
    Eigen::Index diverged_at = -1;
};

struct GroupSummary {
    std::string alg;
    int varx_order = 0;
    int order = 0;
    int count = 0;
    int failures = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;  ///< combined RMSE
};

struct BenchReport {
    std::string kind;  ///< "scenario", "order_sweep", "monte_carlo"
    ScenarioConfig config;
    std::vector<RunRecord> runs;
    std::vector<GroupSummary> summaries;
};

/// One identification + design + evaluation for a single algorithm and seed.
/// Identification and evaluation data are regenerated deterministically from
/// the seed, so every algorithm sees the same data for a given seed. Design
/// failures are recorded, not thrown.
RunRecord run_algorithm(Algorithm alg, const ScenarioConfig& cfg,
                        std::uint64_t seed);

/// Stability study: every algorithm over `runs` seeds.
BenchReport run_scenario(const ScenarioConfig& cfg,
                         const std::vector<Algorithm>& algs, int runs);

/// RMSE versus filter state order for the data-driven designs, `seeds_per_point`
/// runs per (order, algorithm) cell.
BenchReport sweep_orders(const ScenarioConfig& cfg, const std::vector<int>& orders,
                         int seeds_per_point = 1);

/// Monte Carlo over fresh data per run for each VARX order; orders of
/// Alg1/Alg2/Alg3 follow the config. Runs execute concurrently; the report
/// ordering is by (run, varx order, algorithm), independent of scheduling.
BenchReport monte_carlo(const ScenarioConfig& cfg, int runs,
                        const std::vector<int>& varx_orders = {10, 12, 14});

io::json report_to_json(const BenchReport& report);

/// Plot-ready table: order,alg,seed,rmse1,rmse2,stable
std::string report_to_csv(const BenchReport& report);

/// Simulated scenario data (for the CLI): fault-free identification series or
/// the faulty evaluation series.
TimeSeries scenario_data(const ScenarioConfig& cfg, std::uint64_t seed,
                         bool faulty);

}  // namespace fefkit
