// fefkit — data-driven fault estimation filter toolkit.
//
// Workflow:
//   fefkit simulate --scenario actuator --out io.csv          # fault-free data
//   fefkit identify --data io.csv --order 12 --out varx.json
//   fefkit design   --varx varx.json --fault "actuator:1,2" --order 14
//                   --out filter.json
//   fefkit simulate --scenario actuator --faulty --out faulty.csv
//   fefkit run      --filter filter.json --data faulty.csv --out fhat.csv
//   fefkit bench    --scenario sensor --scale desk --out report.json
//   fefkit mc       --runs 25 --varx-orders 10,12,14 --out mc.json

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "fefkit/bench.hpp"
#include "fefkit/gain.hpp"
#include "fefkit/io.hpp"

using namespace fefkit;

namespace {

std::vector<FaultChannel> parse_fault_spec(const std::string& spec) {
    // "actuator:1,2" or "sensor:2,4" or "actuator:1;sensor:2" (1-based).
    std::vector<FaultChannel> faults;
    std::stringstream groups(spec);
    std::string group;
    while (std::getline(groups, group, ';')) {
        const auto colon = group.find(':');
        if (colon == std::string::npos)
            throw Error("fault spec: expected kind:channels, got '" + group + "'");
        const std::string kind_str = group.substr(0, colon);
        FaultKind kind;
        if (kind_str == "actuator") kind = FaultKind::Actuator;
        else if (kind_str == "sensor") kind = FaultKind::Sensor;
        else throw Error("fault spec: unknown kind '" + kind_str + "'");
        std::stringstream channels(group.substr(colon + 1));
        std::string ch;
        while (std::getline(channels, ch, ','))
            faults.push_back({kind, std::stol(ch) - 1});
    }
    if (faults.empty()) throw Error("fault spec: no channels given");
    return faults;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven fault estimation filter toolkit"};
    app.require_subcommand(1);

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "Generate benchmark scenario data");
    std::string sim_scenario = "actuator", sim_out = "io.csv";
    std::uint64_t sim_seed = 1;
    bool sim_faulty = false;
    Eigen::Index sim_samples = -1;
    sim->add_option("--scenario", sim_scenario, "actuator|sensor");
    sim->add_option("--out", sim_out, "output CSV path");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_flag("--faulty", sim_faulty, "emit the faulty evaluation series");
    sim->add_option("--samples", sim_samples, "override sample count");

    // --- identify ---
    auto* ident = app.add_subcommand("identify", "Fit a VARX model to I/O data");
    std::string id_data, id_out = "varx.json";
    int id_order = 12;
    double id_ridge = 0.0;
    std::string id_candidates;
    ident->add_option("--data", id_data, "input CSV")->required();
    ident->add_option("--order", id_order, "VARX order p");
    ident->add_option("--ridge", id_ridge, "ridge penalty");
    ident->add_option("--suggest-orders", id_candidates,
                      "comma list of candidate orders to compare");
    ident->add_option("--out", id_out, "output JSON path");

    // --- design ---
    auto* design = app.add_subcommand("design", "Design the fault estimation filter");
    std::string dg_varx, dg_fault, dg_out = "filter.json";
    int dg_order = 8;
    Eigen::Index dg_L = 90, dg_l = -1, dg_m = -1;
    bool dg_open_loop = false;
    double dg_tau_tol = 0.05;
    design->add_option("--varx", dg_varx, "identified VARX JSON")->required();
    design->add_option("--fault", dg_fault, "fault spec, e.g. actuator:1,2")->required();
    design->add_option("--order", dg_order, "filter state order");
    design->add_option("--window", dg_L, "MP window length L");
    design->add_option("--hankel-rows", dg_l, "Hankel block rows (default L/2)");
    design->add_option("--hankel-cols", dg_m, "Hankel block cols (default L/2)");
    design->add_flag("--open-loop", dg_open_loop, "skip the gain (Kr = 0)");
    design->add_option("--tau-tol", dg_tau_tol,
                       "relative-degree threshold for identified MPs");
    design->add_option("--out", dg_out, "output JSON path");

    // --- run ---
    auto* run = app.add_subcommand("run", "Run a designed filter over data");
    std::string rn_filter, rn_data, rn_out = "fhat.csv";
    run->add_option("--filter", rn_filter, "design JSON")->required();
    run->add_option("--data", rn_data, "input CSV")->required();
    run->add_option("--out", rn_out, "output CSV path");

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "Reproduce the closed-loop study");
    std::string bn_scenario = "sensor", bn_scale = "desk", bn_out = "report.json";
    int bn_runs = -1;
    std::uint64_t bn_seed = 1;
    std::string bn_orders;
    int bn_sweep_seeds = 1;
    bench->add_option("--scenario", bn_scenario, "actuator|sensor");
    bench->add_option("--scale", bn_scale, "desk|full");
    bench->add_option("--runs", bn_runs, "number of seeded runs");
    bench->add_option("--seed", bn_seed, "base seed");
    bench->add_option("--sweep-orders", bn_orders,
                      "comma list of state orders to sweep instead");
    bench->add_option("--sweep-seeds", bn_sweep_seeds, "seeds per sweep point");
    bench->add_option("--out", bn_out, "report JSON path");

    // --- mc ---
    auto* mc = app.add_subcommand("mc", "Monte Carlo over VARX orders");
    std::string mc_scenario = "actuator", mc_orders = "10,12,14",
                mc_out = "mc.json", mc_scale = "desk";
    int mc_runs = 25;
    std::uint64_t mc_seed = 1;
    mc->add_option("--scenario", mc_scenario, "actuator|sensor");
    mc->add_option("--scale", mc_scale, "desk|full");
    mc->add_option("--runs", mc_runs, "Monte Carlo runs");
    mc->add_option("--varx-orders", mc_orders, "comma list of VARX orders");
    mc->add_option("--seed", mc_seed, "base seed");
    mc->add_option("--out", mc_out, "report JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            ScenarioConfig cfg = ScenarioConfig::desk(sim_scenario);
            cfg.base_seed = sim_seed;
            if (sim_samples > 0) {
                cfg.ident_samples = sim_samples;
                cfg.horizon = sim_samples;
            }
            io::write_timeseries_csv(sim_out, scenario_data(cfg, sim_seed, sim_faulty));
            std::cout << "wrote " << sim_out << "\n";
        } else if (*ident) {
            const TimeSeries data = io::read_timeseries_csv(id_data);
            if (!id_candidates.empty()) {
                const auto sug = suggest_varx_order(data, parse_int_list(id_candidates));
                std::cout << "order  AIC            trace(SigmaE)\n";
                for (const auto& c : sug.candidates)
                    std::cout << c.p << "  " << c.aic << "  " << c.sigma_trace << "\n";
                std::cout << "suggested order: " << sug.order << "\n";
            }
            VarxFitOptions opts;
            opts.ridge = id_ridge;
            const VarxModel v = fit_varx(data, id_order, opts);
            io::json j = io::to_json(v);
            j["data_hash"] = io::hash_timeseries(data);
            io::write_file(id_out, j.dump(2) + "\n");
            std::cout << "wrote " << id_out << " (p=" << v.p
                      << ", trace SigmaE=" << v.SigmaE.trace() << ")\n";
        } else if (*design) {
            const io::json varx_json = io::json::parse(io::read_file(dg_varx));
            const VarxModel v = io::varx_from_json(varx_json);
            const std::string data_hash =
                varx_json.value("data_hash", std::string{});
            const auto faults = parse_fault_spec(dg_fault);
            PipelineOptions popts;
            popts.L = dg_L;
            popts.l = dg_l > 0 ? dg_l : dg_L / 2;
            popts.m = dg_m > 0 ? dg_m : dg_L - popts.l;
            popts.nhat = dg_order;
            popts.reldeg = RelativeDegreeOptions{dg_tau_tol, 0.0};
            popts.with_gain = !dg_open_loop;
            const ExtractedMps mps = extract_mps(v, v.p + 1);
            const FefDesign d =
                design_pipeline(mps.Hu, mps.Hy, faults, v.SigmaE, popts);

            io::DesignReport report;
            report.realization = d.realization;
            report.gain = d.gain;
            report.existence = d.existence;
            report.SigmaE = d.SigmaE;
            report.provenance = {v.p, static_cast<int>(popts.L),
                                 static_cast<int>(popts.l), static_cast<int>(popts.m),
                                 static_cast<int>(popts.nhat), data_hash};
            io::write_file(dg_out, io::to_json(report).dump(2) + "\n");
            const OrderSuggestion advisory =
                suggest_order(d.diagnostics.sigma_R, 2 * dg_order);
            std::cout << "wrote " << dg_out << " (tau=" << d.realization.tau
                      << ", closed-loop radius=" << d.gain.closed_loop_radius
                      << ")\n"
                      << "order " << dg_order << " chosen; largest spectral gap at "
                      << advisory.order
                      << (advisory.low_confidence ? " (no pronounced gap)" : "")
                      << ", leading singular values:";
            for (int i = 0; i < 8 && i < static_cast<int>(advisory.spectrum.size()); ++i)
                std::cout << " " << advisory.spectrum[i];
            std::cout << "\n";
        } else if (*run) {
            const io::DesignReport report =
                io::design_from_json(io::json::parse(io::read_file(rn_filter)));
            const TimeSeries data = io::read_timeseries_csv(rn_data);
            FefFilter filter =
                assemble(report.realization, report.gain.Kr, report.provenance.L);
            const RunResult res = run_filter(filter, data);
            io::write_estimates_csv(rn_out, res.records, res.diverged,
                                    res.diverged_at);
            std::cout << "wrote " << rn_out << " (" << res.records.size()
                      << " estimates";
            if (res.rmse.size() > 0) {
                std::cout << ", rmse";
                for (Eigen::Index i = 0; i < res.rmse.size(); ++i)
                    std::cout << " " << res.rmse(i);
            }
            if (res.diverged)
                std::cout << ", diverged at sample " << res.diverged_at;
            std::cout << ")\n";
        } else if (*bench) {
            ScenarioConfig cfg = bn_scale == "full"
                                     ? ScenarioConfig::full(bn_scenario)
                                     : ScenarioConfig::desk(bn_scenario);
            cfg.base_seed = bn_seed;
            BenchReport report;
            if (!bn_orders.empty()) {
                report = sweep_orders(cfg, parse_int_list(bn_orders), bn_sweep_seeds);
            } else {
                const int runs = bn_runs > 0 ? bn_runs : cfg.mc_runs;
                report = run_scenario(cfg,
                                      {Algorithm::Alg0, Algorithm::Alg1,
                                       Algorithm::Alg2, Algorithm::Alg3},
                                      runs);
            }
            io::write_file(bn_out, report_to_json(report).dump(2) + "\n");
            const std::string csv_path =
                bn_out.size() > 5 && bn_out.ends_with(".json")
                    ? bn_out.substr(0, bn_out.size() - 5) + ".csv"
                    : bn_out + ".csv";
            io::write_file(csv_path, report_to_csv(report));
            std::cout << "wrote " << bn_out << " and " << csv_path << "\n";
        } else if (*mc) {
            ScenarioConfig cfg = mc_scale == "full"
                                     ? ScenarioConfig::full(mc_scenario)
                                     : ScenarioConfig::desk(mc_scenario);
            cfg.base_seed = mc_seed;
            cfg.order_alg1 = 8;
            cfg.order_alg2 = 14;
            cfg.order_alg3 = 14;
            const BenchReport report =
                monte_carlo(cfg, mc_runs, parse_int_list(mc_orders));
            io::write_file(mc_out, report_to_json(report).dump(2) + "\n");
            std::cout << "wrote " << mc_out << "\n";
            for (const auto& g : report.summaries)
                std::cout << g.alg << " p=" << g.varx_order << " order=" << g.order
                          << ": median rmse=" << g.median << " failures="
                          << g.failures << "/" << g.count << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
