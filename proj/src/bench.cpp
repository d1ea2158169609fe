#include "fefkit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include "fefkit/gain.hpp"
#include "fefkit/random.hpp"

namespace fefkit {

const char* algorithm_name(Algorithm alg) {
    switch (alg) {
        case Algorithm::Alg0: return "Alg0";
        case Algorithm::Alg1: return "Alg1";
        case Algorithm::Alg2: return "Alg2";
        case Algorithm::Alg3: return "Alg3";
    }
    return "?";
}

VtolSystem build_vtol() {
    // Second-order actuator (21.3501 s + 162.3867)/(s^2 + 17.9994 s + 162.3867),
    // one per input channel, controllable canonical form.
    ContinuousModel act;
    act.A.resize(4, 4);
    act.A << 0, 1, 0, 0,
             -162.3867, -17.9994, 0, 0,
             0, 0, 0, 1,
             0, 0, -162.3867, -17.9994;
    act.B.resize(4, 2);
    act.B << 0, 0,
             1, 0,
             0, 0,
             0, 1;
    act.C.resize(2, 4);
    act.C << 162.3867, 21.3501, 0, 0,
             0, 0, 162.3867, 21.3501;
    act.D = Eigen::MatrixXd::Zero(2, 2);

    // Stand-in 4-state aircraft (horizontal velocity, vertical velocity,
    // pitch rate, pitch angle; all measured). Open-loop unstable. The sign of
    // the second input column fixes the convention under which the stated
    // feedback gains stabilize the loop.
    ContinuousModel air;
    air.A.resize(4, 4);
    air.A << -0.0366, 0.0271, 0.0188, -0.4555,
             0.0482, -1.0100, 0.0024, -4.0208,
             0.1002, 0.3681, -0.7070, 1.4200,
             0.0, 0.0, 1.0, 0.0;
    air.B.resize(4, 2);
    air.B << 0.4422, -0.1761,
             3.5446, 7.5922,
             -5.5200, -4.4900,
             0.0, 0.0;
    air.C = Eigen::MatrixXd::Identity(4, 4);
    air.D = Eigen::MatrixXd::Zero(4, 2);

    const ContinuousModel stages[] = {act, air};
    StateSpaceModel plant = zoh_discretize(series_connect(stages), 0.5);
    plant.Q1 = Eigen::MatrixXd::Zero(8, 8);
    plant.Q1.bottomRightCorner(4, 4) = 1e-4 * Eigen::MatrixXd::Identity(4, 4);
    plant.Q2 = 0.0016 * Eigen::MatrixXd::Identity(4, 4);

    VtolSystem sys;
    sys.F.resize(2, 4);
    sys.F << 0, 0, -0.5, 0,
             0, 0, -0.1, -0.1;

    const double open_radius = spectral_radius(plant.A);
    if (open_radius <= 1.0)
        throw Error("build_vtol: surrogate plant is not open-loop unstable (radius " +
                    std::to_string(open_radius) + ")");
    const double closed_radius =
        spectral_radius(plant.A - plant.B * sys.F * plant.C);
    if (closed_radius >= 1.0)
        throw Error("build_vtol: feedback does not stabilize the loop (radius " +
                    std::to_string(closed_radius) + ")");

    sys.plant = std::move(plant);
    return sys;
}

ScenarioConfig ScenarioConfig::desk(const std::string& scenario) {
    ScenarioConfig cfg;
    cfg.scenario = scenario;
    return cfg;
}

ScenarioConfig ScenarioConfig::full(const std::string& scenario) {
    ScenarioConfig cfg;
    cfg.scenario = scenario;
    cfg.ident_samples = 100000;
    cfg.mc_runs = 100;
    return cfg;
}

std::vector<FaultChannel> ScenarioConfig::resolved_faults() const {
    if (!faults.empty()) return faults;
    if (scenario == "actuator")
        return {{FaultKind::Actuator, 0}, {FaultKind::Actuator, 1}};
    if (scenario == "sensor")
        // Channels 2 and 4: the unstable pitch modes then lose their direct
        // injection path, which is what makes the open-loop inverse unstable
        // and separates the gained design from the zero-gain one.
        return {{FaultKind::Sensor, 1}, {FaultKind::Sensor, 3}};
    throw Error("ScenarioConfig: unknown scenario '" + scenario + "'");
}

void ScenarioConfig::validate() const {
    if (onset >= horizon)
        throw DimensionError("ScenarioConfig: fault onset must precede the horizon");
    if (l + m > L)
        throw DimensionError("ScenarioConfig: Hankel blocks need l + m <= L");
    if (p < 1 || ident_samples <= p)
        throw DimensionError("ScenarioConfig: identification length vs VARX order");
    resolved_faults();  // scenario name check
}

namespace {

Eigen::MatrixXd fault_profile(const ScenarioConfig& cfg, Eigen::Index nf) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(cfg.horizon, nf);
    for (Eigen::Index k = cfg.onset + 1; k < cfg.horizon; ++k) {
        f(k, 0) = 1.0;
        for (Eigen::Index c = 1; c < nf; ++c)
            f(k, c) = std::sin(0.01 * M_PI * static_cast<double>(k));
    }
    return f;
}

struct ScenarioData {
    TimeSeries ident;
    TimeSeries eval;
    StateSpaceModel plant;  ///< with fault channels set
    Eigen::MatrixXd F;
};

ScenarioData make_data(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    VtolSystem sys = build_vtol();
    const auto faults = cfg.resolved_faults();
    set_fault_channels(sys.plant, faults);
    const Eigen::Index nf = sys.plant.nf();
    const Eigen::Index nu = sys.plant.nu();

    GaussianSampler eta_rng(mix_seed(seed, 11));
    Eigen::MatrixXd eta(cfg.ident_samples, nu);
    for (Eigen::Index k = 0; k < cfg.ident_samples; ++k)
        for (Eigen::Index i = 0; i < nu; ++i) eta(k, i) = cfg.eta_std * eta_rng();

    ScenarioData d;
    d.ident = simulate(sys.plant, InputSpec::feedback(sys.F, eta),
                       Eigen::MatrixXd(0, nf), mix_seed(seed, 12));

    Eigen::MatrixXd eta_eval =
        Eigen::MatrixXd::Constant(cfg.horizon, nu, cfg.reference_level);
    d.eval = simulate(sys.plant, InputSpec::feedback(sys.F, std::move(eta_eval)),
                      fault_profile(cfg, nf), mix_seed(seed, 13));
    d.plant = std::move(sys.plant);
    d.F = std::move(sys.F);
    return d;
}

int algorithm_order(Algorithm alg, const ScenarioConfig& cfg) {
    switch (alg) {
        case Algorithm::Alg0: return cfg.order_alg0;
        case Algorithm::Alg1: return cfg.order_alg1;
        case Algorithm::Alg2: return cfg.order_alg2;
        case Algorithm::Alg3: return cfg.order_alg3;
    }
    return cfg.order_alg3;
}

FefDesign design_for(Algorithm alg, const ScenarioConfig& cfg,
                     const ScenarioData& data,
                     const std::vector<FaultChannel>& faults, int order) {
    PipelineOptions popts;
    popts.L = cfg.L;
    popts.l = cfg.l;
    popts.m = cfg.m;
    popts.nhat = order;

    if (alg == Algorithm::Alg0) {
        const PredictorModel pred = to_predictor(data.plant);
        auto [Hu, Hy] = predictor_mps(pred, cfg.L + pred.n() + 2);
        popts.reldeg = RelativeDegreeOptions{};  // exact MPs
        return design_pipeline(Hu, Hy, faults, pred.SigmaE, popts);
    }

    const VarxModel varx = fit_varx(data.ident, cfg.p);
    const ExtractedMps mps = extract_mps(varx, cfg.p + 1);
    const RelativeDegreeOptions reldeg{cfg.tau_rel_tol, 0.0};

    if (alg == Algorithm::Alg1) {
        // Ho-Kalman on the combined sequence [H_i^u, H_i^y] recovers the
        // predictor (Phi, [Btilde K], C); the direct term is M_0^u.
        const Eigen::Index ny = varx.ny();
        const Eigen::Index nu = varx.nu();
        MarkovSequence W(ny, nu + ny);
        for (Eigen::Index i = 0; i < mps.Hu.size(); ++i) {
            Eigen::MatrixXd block(ny, nu + ny);
            block << mps.Hu[i], mps.Hy[i];
            W.push_back(std::move(block));
        }
        const Eigen::Index l1 = (cfg.p + 2) / 2;
        const Eigen::Index m1 = cfg.p + 1 - l1;
        const HoKalmanResult hk = ho_kalman(W, l1, m1, order);

        PredictorModel pred;
        pred.Phi = hk.A;
        pred.Btilde = hk.B.leftCols(nu);
        pred.K = hk.B.rightCols(ny);
        pred.C = hk.C;
        pred.D = varx.Mu[0];
        pred.SigmaE = varx.SigmaE;
        auto [Etilde, G] = predictor_fault_terms(pred, faults);
        pred.Etilde = std::move(Etilde);
        pred.G = std::move(G);
        return design_model_based(pred, faults, varx.SigmaE, reldeg);
    }

    popts.reldeg = reldeg;
    popts.with_gain = (alg == Algorithm::Alg3);
    return design_pipeline(mps.Hu, mps.Hy, faults, varx.SigmaE, popts);
}

RunRecord evaluate(Algorithm alg, const ScenarioConfig& cfg,
                   const ScenarioData& data, std::uint64_t seed, int order) {
    RunRecord rec;
    rec.alg = algorithm_name(alg);
    rec.seed = seed;
    rec.order = order;
    rec.varx_order = cfg.p;

    const auto faults = cfg.resolved_faults();
    FefDesign design;
    try {
        design = design_for(alg, cfg, data, faults, order);
        rec.design_ok = true;
    } catch (const Error& e) {
        rec.message = e.what();
        return rec;
    }
    rec.phi1_radius = spectral_radius(design.realization.Phi1);
    rec.closed_loop_radius = design.gain.closed_loop_radius;
    rec.stable = rec.closed_loop_radius < 1.0;

    FefFilter filter = assemble(design.realization, design.gain.Kr, cfg.L);
    RunOptions ropts;
    ropts.rmse_begin = cfg.rmse_begin;
    const RunResult res = run_filter(filter, data.eval, ropts);
    rec.diverged = res.diverged;
    rec.diverged_at = res.diverged_at;
    if (res.rmse.size() > 0 && !res.diverged)
        rec.rmse.assign(res.rmse.data(), res.rmse.data() + res.rmse.size());
    return rec;
}

double combined_rmse(const RunRecord& rec) {
    if (rec.rmse.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : rec.rmse) s += v * v;
    return std::sqrt(s / static_cast<double>(rec.rmse.size()));
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
}

void summarize_groups(BenchReport& report) {
    // Group by (alg, varx order, state order), ordered by first appearance.
    std::vector<std::tuple<std::string, int, int>> keys;
    for (const auto& r : report.runs) {
        auto key = std::make_tuple(r.alg, r.varx_order, r.order);
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            keys.push_back(key);
    }
    for (const auto& key : keys) {
        GroupSummary g;
        std::tie(g.alg, g.varx_order, g.order) = key;
        std::vector<double> values;
        for (const auto& r : report.runs) {
            if (std::make_tuple(r.alg, r.varx_order, r.order) != key) continue;
            ++g.count;
            if (!r.design_ok || r.diverged || r.rmse.empty()) {
                ++g.failures;
                continue;
            }
            values.push_back(combined_rmse(r));
        }
        if (!values.empty()) {
            g.min = quantile(values, 0.0);
            g.q1 = quantile(values, 0.25);
            g.median = quantile(values, 0.5);
            g.q3 = quantile(values, 0.75);
            g.max = quantile(values, 1.0);
        }
        report.summaries.push_back(std::move(g));
    }
}

// Runs independent tasks on a small pool; results land by index so reports
// do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
                fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

RunRecord run_algorithm(Algorithm alg, const ScenarioConfig& cfg,
                        std::uint64_t seed) {
    const ScenarioData data = make_data(cfg, seed);
    return evaluate(alg, cfg, data, seed, algorithm_order(alg, cfg));
}

BenchReport run_scenario(const ScenarioConfig& cfg,
                         const std::vector<Algorithm>& algs, int runs) {
    BenchReport report;
    report.kind = "scenario";
    report.config = cfg;
    report.runs.resize(static_cast<std::size_t>(runs) * algs.size());
    parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        const ScenarioData data = make_data(cfg, seed);
        for (std::size_t a = 0; a < algs.size(); ++a)
            report.runs[r * algs.size() + a] =
                evaluate(algs[a], cfg, data, seed, algorithm_order(algs[a], cfg));
    });
    summarize_groups(report);
    return report;
}

BenchReport sweep_orders(const ScenarioConfig& cfg, const std::vector<int>& orders,
                         int seeds_per_point) {
    const std::vector<Algorithm> algs = {Algorithm::Alg1, Algorithm::Alg2,
                                         Algorithm::Alg3};
    BenchReport report;
    report.kind = "order_sweep";
    report.config = cfg;
    report.runs.resize(static_cast<std::size_t>(seeds_per_point) * orders.size() *
                       algs.size());
    parallel_for(static_cast<std::size_t>(seeds_per_point), [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        const ScenarioData data = make_data(cfg, seed);
        std::size_t idx = r * orders.size() * algs.size();
        for (int order : orders)
            for (Algorithm alg : algs)
                report.runs[idx++] = evaluate(alg, cfg, data, seed, order);
    });
    summarize_groups(report);
    return report;
}

BenchReport monte_carlo(const ScenarioConfig& cfg, int runs,
                        const std::vector<int>& varx_orders) {
    const std::vector<Algorithm> algs = {Algorithm::Alg1, Algorithm::Alg2,
                                         Algorithm::Alg3};
    BenchReport report;
    report.kind = "monte_carlo";
    report.config = cfg;
    report.runs.resize(static_cast<std::size_t>(runs) * varx_orders.size() *
                       algs.size());
    parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        const ScenarioData data = make_data(cfg, seed);
        std::size_t idx = r * varx_orders.size() * algs.size();
        for (int p : varx_orders) {
            ScenarioConfig sub = cfg;
            sub.p = p;
            for (Algorithm alg : algs)
                report.runs[idx++] =
                    evaluate(alg, sub, data, seed, algorithm_order(alg, sub));
        }
    });
    summarize_groups(report);
    return report;
}

io::json report_to_json(const BenchReport& report) {
    io::json j;
    j["kind"] = report.kind;

    io::json cfg;
    cfg["scenario"] = report.config.scenario;
    io::json fts = io::json::array();
    for (const auto& f : report.config.resolved_faults()) {
        io::json e;
        e["kind"] = f.kind == FaultKind::Actuator ? "actuator" : "sensor";
        e["channel"] = f.channel + 1;
        fts.push_back(std::move(e));
    }
    cfg["faults"] = std::move(fts);
    cfg["ident_samples"] = report.config.ident_samples;
    cfg["horizon"] = report.config.horizon;
    cfg["onset"] = report.config.onset;
    cfg["p"] = report.config.p;
    cfg["L"] = report.config.L;
    cfg["l"] = report.config.l;
    cfg["m"] = report.config.m;
    cfg["orders"] = {report.config.order_alg0, report.config.order_alg1,
                     report.config.order_alg2, report.config.order_alg3};
    cfg["base_seed"] = report.config.base_seed;
    cfg["rmse_begin"] = report.config.rmse_begin;
    cfg["surrogate_plant"] = true;
    j["config"] = std::move(cfg);

    io::json runs = io::json::array();
    for (const auto& r : report.runs) {
        io::json e;
        e["alg"] = r.alg;
        e["seed"] = r.seed;
        e["order"] = r.order;
        e["varx_order"] = r.varx_order;
        e["design_ok"] = r.design_ok;
        if (!r.message.empty()) e["message"] = r.message;
        e["phi1_radius"] = r.phi1_radius;
        e["closed_loop_radius"] = r.closed_loop_radius;
        e["stable"] = r.stable;
        e["rmse"] = r.rmse;
        e["diverged"] = r.diverged;
        if (r.diverged) e["diverged_at"] = r.diverged_at;
        runs.push_back(std::move(e));
    }
    j["runs"] = std::move(runs);

    io::json sums = io::json::array();
    for (const auto& g : report.summaries) {
        io::json e;
        e["alg"] = g.alg;
        e["varx_order"] = g.varx_order;
        e["order"] = g.order;
        e["count"] = g.count;
        e["failures"] = g.failures;
        e["min"] = g.min;
        e["q1"] = g.q1;
        e["median"] = g.median;
        e["q3"] = g.q3;
        e["max"] = g.max;
        sums.push_back(std::move(e));
    }
    j["summaries"] = std::move(sums);
    return j;
}

std::string report_to_csv(const BenchReport& report) {
    std::ostringstream out;
    out << "order,alg,seed,rmse1,rmse2,stable\n";
    for (const auto& r : report.runs) {
        out << r.order << "," << r.alg << "," << r.seed;
        for (int c = 0; c < 2; ++c) {
            out << ",";
            if (c < static_cast<int>(r.rmse.size()))
                out << io::format_double(r.rmse[c]);
            else
                out << "nan";
        }
        out << "," << (r.stable ? 1 : 0) << "\n";
    }
    return out.str();
}

TimeSeries scenario_data(const ScenarioConfig& cfg, std::uint64_t seed,
                         bool faulty) {
    const ScenarioData data = make_data(cfg, seed);
    return faulty ? data.eval : data.ident;
}

}  // namespace fefkit
