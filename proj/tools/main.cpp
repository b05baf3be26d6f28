#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dynstiff/control.hpp"
#include "dynstiff/identify.hpp"
#include "dynstiff/io.hpp"
#include "dynstiff/signal.hpp"
#include "dynstiff/sim.hpp"
#include "dynstiff/stats.hpp"
#include "dynstiff/types.hpp"
#include "dynstiff/version.hpp"

namespace fs = std::filesystem;
using dynstiff::io::json;

namespace {

std::string abs_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

void write_manifest(const fs::path& path, dynstiff::io::RunManifest manifest) {
    for (auto& s : manifest.inputs) s = abs_path(s);
    for (auto& s : manifest.outputs) s = abs_path(s);
    dynstiff::io::write_json_file(path, dynstiff::io::to_json(manifest));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args) {
    const json config = dynstiff::io::read_json_file(args.config_path);
    if (!config.contains("truth"))
        throw dynstiff::ValidationError("config: missing \"truth\" section");
    auto truth = dynstiff::io::truth_from_json(config.at("truth"));
    if (args.seed) truth.seed = *args.seed;
    const auto protocol = dynstiff::io::protocol_from_json(config);

    const auto record = dynstiff::sim::simulate_protocol(truth, protocol);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    const fs::path csv = dir / "record.csv";
    const fs::path truth_json = dir / "truth.json";
    dynstiff::io::write_time_series_csv(csv, record);
    dynstiff::io::write_json_file(truth_json, dynstiff::io::to_json(truth));

    dynstiff::io::RunManifest manifest;
    manifest.command = "simulate";
    manifest.inputs = {args.config_path};
    manifest.outputs = {csv.string(), truth_json.string()};
    manifest.parameters = {{"chirp",
                            {{"omega_min", protocol.chirp.omega_min},
                             {"omega_max", protocol.chirp.omega_max},
                             {"duration", protocol.chirp.duration},
                             {"amplitude", protocol.chirp.amplitude},
                             {"sample_rate", protocol.chirp.sample_rate}}},
                           {"segmentation",
                            {{"n_segments", protocol.segmentation.n_segments},
                             {"segment_period", protocol.segmentation.segment_period},
                             {"used_duration", protocol.segmentation.used_duration}}},
                           {"truth", dynstiff::io::to_json(truth)}};
    manifest.seed = truth.seed;
    write_manifest(dir / "manifest.json", std::move(manifest));
    return 0;
}

// ---------------------------------------------------------------- identify

struct IdentifyArgs {
    std::string input_csv;
    std::string config_path;
    std::string out_path = "params.json";
    std::string frf_path;  // optional export of the compensated response
};

int cmd_identify(const IdentifyArgs& args) {
    const auto record = dynstiff::io::read_time_series_csv(args.input_csv);
    const json config = dynstiff::io::read_json_file(args.config_path);
    const auto protocol = dynstiff::io::protocol_from_json(config);

    const auto omegas =
        dynstiff::signal::segment_frequencies(protocol.chirp, protocol.segmentation);
    const auto raw = dynstiff::signal::estimate_frf(record, protocol.segmentation, omegas);
    const auto frf = dynstiff::identify::compensate_inertia(raw, protocol.experiment);

    const auto m1 = dynstiff::identify::fit_m1(frf);
    const auto m2 = dynstiff::identify::fit_m2(frf);
    const auto m3 = dynstiff::identify::fit_m3(frf);
    const double omega_n = dynstiff::identify::natural_frequency(m3.K_h, m3.M);
    const int n = static_cast<int>(frf.samples.size());

    // Steady-state windows assume the previous slot's transient has died
    // out in the discarded tail; warn when the settling budget is thin.
    const double zeta3 = dynstiff::identify::damping_ratio(m3);
    if (zeta3 > 0.0) {
        const double tc = 1.0 / (zeta3 * omega_n);
        if (!dynstiff::signal::settling_gap_ok(protocol.segmentation, tc))
            std::fprintf(stderr,
                         "warning: segment gap %.2f s is under 4 time constants (4 x %.2f s); "
                         "estimates may carry transients\n",
                         protocol.segmentation.segment_period -
                             protocol.segmentation.used_duration,
                         tc);
    }

    json out = json::array();
    for (const dynstiff::identify::ModelParams params :
         {dynstiff::identify::ModelParams(m1), dynstiff::identify::ModelParams(m2),
          dynstiff::identify::ModelParams(m3)}) {
        dynstiff::io::IdentifiedModel rec;
        rec.exp_label = protocol.experiment.label;
        rec.params = params;
        rec.omega_n = omega_n;
        rec.zeta = dynstiff::identify::damping_ratio(params);
        rec.rss = dynstiff::stats::rss(frf, params);
        rec.n = n;
        out.push_back(dynstiff::io::to_json(rec));
    }
    dynstiff::io::write_json_file(args.out_path, out);

    dynstiff::io::RunManifest manifest;
    manifest.command = "identify";
    manifest.inputs = {args.input_csv, args.config_path};
    manifest.outputs = {args.out_path};
    manifest.parameters = {{"alpha", protocol.experiment.alpha},
                           {"M_e", protocol.experiment.M_e},
                           {"n_segments", protocol.segmentation.n_segments}};
    if (!args.frf_path.empty()) {
        dynstiff::io::write_json_file(args.frf_path, dynstiff::io::to_json(frf));
        manifest.outputs.push_back(args.frf_path);
    }
    write_manifest(args.out_path + ".manifest.json", std::move(manifest));
    return 0;
}

// ---------------------------------------------------------------- ftest

struct FtestArgs {
    std::string params_path;
    std::string out_path = "ftest.json";
    double p_false_reject = 0.05;
};

int cmd_ftest(const FtestArgs& args) {
    const json params = dynstiff::io::read_json_file(args.params_path);
    if (!params.is_array())
        throw dynstiff::ValidationError("params file must be a JSON array of model records");

    struct PerExp {
        std::map<std::string, dynstiff::io::IdentifiedModel> by_model;
        std::vector<std::string> order;
    };
    std::map<std::string, PerExp> groups;
    std::vector<std::string> exp_order;
    for (const auto& j : params) {
        auto rec = dynstiff::io::identified_from_json(j);
        const std::string code = dynstiff::identify::model_code(rec.params);
        auto [it, fresh] = groups.try_emplace(rec.exp_label);
        if (fresh) exp_order.push_back(rec.exp_label);
        it->second.by_model[code] = std::move(rec);
    }

    json out = json::array();
    for (const auto& exp : exp_order) {
        const auto& g = groups.at(exp);
        for (const char* code : {"M1", "M2", "M3"})
            if (!g.by_model.count(code))
                throw dynstiff::ValidationError("experiment \"" + exp + "\" is missing a " + code +
                                                " record");
        const auto& m1 = g.by_model.at("M1");
        const auto& m2 = g.by_model.at("M2");
        const auto& m3 = g.by_model.at("M3");
        if (m1.n != m3.n || m2.n != m3.n)
            throw dynstiff::ValidationError("experiment \"" + exp +
                                            "\": sample counts differ across models");
        for (const auto* reduced : {&m1, &m2}) {
            auto report =
                dynstiff::stats::f_test(reduced->rss, m3.rss, m3.n, args.p_false_reject);
            report.exp_label = exp;
            report.comparison = std::string(dynstiff::identify::model_code(reduced->params)) + "-M3";
            out.push_back(dynstiff::io::to_json(report));
        }
    }
    dynstiff::io::write_json_file(args.out_path, out);

    dynstiff::io::RunManifest manifest;
    manifest.command = "ftest";
    manifest.inputs = {args.params_path};
    manifest.outputs = {args.out_path};
    manifest.parameters = {{"p_false_reject", args.p_false_reject}};
    write_manifest(args.out_path + ".manifest.json", std::move(manifest));
    return 0;
}

// ---------------------------------------------------------------- regress

struct RegressArgs {
    std::string fixture_path = "data/subject_params.json";
    std::string out_path = "regress.json";
};

int cmd_regress(const RegressArgs& args) {
    const auto rows = dynstiff::io::load_fixture(args.fixture_path);

    std::vector<double> k_m2, c_m2, k_m3, c_m3, wn_m2, zeta_m2;
    for (const auto& row : rows) {
        if (const auto* p = std::get_if<dynstiff::identify::ModelParamsM2>(&row.params)) {
            k_m2.push_back(p->K_h);
            c_m2.push_back(p->C_h);
            wn_m2.push_back(row.omega_n);
            zeta_m2.push_back(row.zeta);
        } else if (const auto* q = std::get_if<dynstiff::identify::ModelParamsM3>(&row.params)) {
            k_m3.push_back(q->K_h);
            c_m3.push_back(q->C_h);
        }
    }
    const auto reg_m2 = dynstiff::stats::regress_ch_kh(k_m2, c_m2);
    const auto reg_m3 = dynstiff::stats::regress_ch_kh(k_m3, c_m3);
    const auto viscous = dynstiff::stats::viscous_hypothesis_check(wn_m2, zeta_m2);

    const json out{{"m2_regression", dynstiff::io::to_json(reg_m2)},
                   {"m3_regression", dynstiff::io::to_json(reg_m3)},
                   {"viscous", dynstiff::io::to_json(viscous)},
                   {"n_m2_rows", k_m2.size()},
                   {"n_m3_rows", k_m3.size()}};
    dynstiff::io::write_json_file(args.out_path, out);

    dynstiff::io::RunManifest manifest;
    manifest.command = "regress";
    manifest.inputs = {args.fixture_path};
    manifest.outputs = {args.out_path};
    write_manifest(args.out_path + ".manifest.json", std::move(manifest));
    return 0;
}

// ---------------------------------------------------------------- design

struct DesignArgs {
    std::string model_path;  // optional plant JSON; flags override its values
    std::optional<double> K_h, c_h, M_h, M_e, alpha, omega_sea, zeta_sea;
    double phi_deg = 0.0;
    std::optional<double> f, omega_c, w_lo, w_hi;
    std::optional<int> cascade_n;
    std::string out_dir = ".";
};

dynstiff::control::PlantConfig resolve_plant(const DesignArgs& args) {
    dynstiff::control::PlantConfig cfg;
    bool have_file = !args.model_path.empty();
    if (have_file) {
        const json j = dynstiff::io::read_json_file(args.model_path);
        cfg = dynstiff::io::plant_from_json(j.contains("plant") ? j.at("plant") : j);
    }
    if (args.K_h) cfg.model.K_h = *args.K_h;
    if (args.c_h) cfg.model.c_h = *args.c_h;
    if (args.M_h) cfg.model.M_h = *args.M_h;
    if (args.M_e) cfg.M_e = *args.M_e;
    if (args.alpha) cfg.alpha = *args.alpha;
    if (args.omega_sea) cfg.omega_sea = *args.omega_sea;
    if (args.zeta_sea) cfg.zeta_sea = *args.zeta_sea;
    if (!have_file && (!args.K_h || !args.c_h || !args.M_h))
        throw dynstiff::ValidationError(
            "design: provide --model or all of --K_h, --c_h, --M_h");
    dynstiff::control::validate(cfg);
    return cfg;
}

int cmd_design(const DesignArgs& args) {
    const auto plant = resolve_plant(args);

    dynstiff::control::DesignOptions opt;
    opt.f = args.f;
    opt.omega_c = args.omega_c;
    opt.cascade_n = args.cascade_n;
    opt.cascade_w_lo = args.w_lo;
    opt.cascade_w_hi = args.w_hi;
    const auto design = dynstiff::control::design_controller(plant, args.phi_deg, opt);
    const auto cascade = dynstiff::control::make_cascade(design);

    const auto grid = dynstiff::control::margin_grid(plant);
    const auto loop_ideal = dynstiff::control::ideal_loop(design);
    const auto loop_casc = dynstiff::control::cascade_loop(design, cascade);
    const auto margins_ideal = dynstiff::control::margins(loop_ideal, grid);
    const auto margins_casc = dynstiff::control::margins(loop_casc, grid);
    if (!margins_ideal.has_crossover())
        throw dynstiff::NumericalError("design: loop gain never crosses unity on the analysis grid");
    if (margins_ideal.phase_margin_deg() < args.phi_deg)
        throw dynstiff::NumericalError(
            "design: achieved phase margin " +
            std::to_string(margins_ideal.phase_margin_deg()) +
            " deg falls short of the requested " + std::to_string(args.phi_deg) + " deg");

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    json out = dynstiff::io::to_json(design);
    out["margins_ideal"] = dynstiff::io::to_json(margins_ideal);
    out["margins_cascade"] = dynstiff::io::to_json(margins_casc);
    dynstiff::io::write_json_file(dir / "design.json", out);

    const auto plant_fn = [plant](double w) { return dynstiff::control::eval_plant(plant, w); };
    const auto ctrl_ideal = [design](double w) {
        return dynstiff::control::eval_fractional(design.k_f, design.f, w);
    };
    const auto ctrl_casc = [design, cascade](double w) {
        return design.k_f * cascade.eval({0.0, w});
    };
    dynstiff::io::write_bode_csv(dir / "bode_plant.csv", grid, plant_fn);
    dynstiff::io::write_bode_csv(dir / "bode_controller_ideal.csv", grid, ctrl_ideal);
    dynstiff::io::write_bode_csv(dir / "bode_controller_cascade.csv", grid, ctrl_casc);
    dynstiff::io::write_bode_csv(dir / "bode_loop_ideal.csv", grid, loop_ideal);
    dynstiff::io::write_bode_csv(dir / "bode_loop_cascade.csv", grid, loop_casc);

    dynstiff::io::RunManifest manifest;
    manifest.command = "design";
    if (!args.model_path.empty()) manifest.inputs.push_back(args.model_path);
    manifest.outputs = {(dir / "design.json").string(),
                       (dir / "bode_plant.csv").string(),
                       (dir / "bode_controller_ideal.csv").string(),
                       (dir / "bode_controller_cascade.csv").string(),
                       (dir / "bode_loop_ideal.csv").string(),
                       (dir / "bode_loop_cascade.csv").string()};
    manifest.parameters = out;
    write_manifest(dir / "manifest.json", std::move(manifest));
    return 0;
}

// ---------------------------------------------------------------- bode

struct BodeArgs {
    std::string design_path;
    std::string system = "loop";
    std::string out_path = "bode.csv";
    int points_per_decade = 400;
};

int cmd_bode(const BodeArgs& args) {
    const json j = dynstiff::io::read_json_file(args.design_path);
    const auto design = dynstiff::io::design_from_json(j);
    dynstiff::control::validate(design.plant);
    const auto cascade = dynstiff::control::make_cascade(design);
    const auto grid = dynstiff::control::margin_grid(design.plant, args.points_per_decade);

    dynstiff::control::LoopFn fn;
    if (args.system == "plant") {
        const auto plant = design.plant;
        fn = [plant](double w) { return dynstiff::control::eval_plant(plant, w); };
    } else if (args.system == "controller") {
        fn = [design](double w) {
            return dynstiff::control::eval_fractional(design.k_f, design.f, w);
        };
    } else if (args.system == "cascade") {
        fn = [design, cascade](double w) { return design.k_f * cascade.eval({0.0, w}); };
    } else if (args.system == "loop") {
        fn = dynstiff::control::ideal_loop(design);
    } else if (args.system == "loop_cascade") {
        fn = dynstiff::control::cascade_loop(design, cascade);
    } else {
        throw dynstiff::ValidationError(
            "bode: --system must be plant, controller, cascade, loop or loop_cascade");
    }
    dynstiff::io::write_bode_csv(args.out_path, grid, fn);

    dynstiff::io::RunManifest manifest;
    manifest.command = "bode";
    manifest.inputs = {args.design_path};
    manifest.outputs = {args.out_path};
    manifest.parameters = {{"system", args.system},
                           {"points_per_decade", args.points_per_decade}};
    write_manifest(args.out_path + ".manifest.json", std::move(manifest));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic joint stiffness identification and amplification controller design"};
    app.set_version_flag("--version", dynstiff::version);
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic perturbation record");
    sim_cmd->add_option("--config", sim_args.config_path, "config JSON with chirp + truth sections")
        ->required();
    sim_cmd->add_option("--out", sim_args.out_dir, "output directory (record.csv, truth.json)");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = sim_cmd->add_option("--seed", seed_flag, "override the truth seed");

    IdentifyArgs id_args;
    auto* id_cmd = app.add_subcommand("identify", "fit stiffness models to a recorded time series");
    id_cmd->add_option("--input", id_args.input_csv, "time-series CSV (t,tau_c,theta_e)")
        ->required();
    id_cmd->add_option("--config", id_args.config_path, "config JSON with chirp/segmentation/experiment")
        ->required();
    id_cmd->add_option("--out", id_args.out_path, "output parameters JSON");
    id_cmd->add_option("--frf", id_args.frf_path, "also export the compensated frequency response");

    FtestArgs ft_args;
    auto* ft_cmd = app.add_subcommand("ftest", "compare fitted models with F-tests");
    ft_cmd->add_option("--params", ft_args.params_path, "parameters JSON from identify")
        ->required();
    ft_cmd->add_option("--p", ft_args.p_false_reject, "false-rejection probability");
    ft_cmd->add_option("--out", ft_args.out_path, "output report JSON");

    RegressArgs rg_args;
    auto* rg_cmd = app.add_subcommand("regress", "population regressions over the subject table");
    rg_cmd->add_option("--fixture", rg_args.fixture_path, "subject parameter fixture JSON");
    rg_cmd->add_option("--out", rg_args.out_path, "output report JSON");

    DesignArgs dg_args;
    auto* dg_cmd = app.add_subcommand("design", "synthesize the amplification controller");
    dg_cmd->add_option("--model", dg_args.model_path, "plant JSON (flags below override)");
    dg_cmd->add_option("--K_h", dg_args.K_h, "joint stiffness, N*m/rad");
    dg_cmd->add_option("--c_h", dg_args.c_h, "hysteresis ratio");
    dg_cmd->add_option("--M_h", dg_args.M_h, "human inertia, kg*m^2");
    dg_cmd->add_option("--M_e", dg_args.M_e, "exoskeleton inertia, kg*m^2");
    dg_cmd->add_option("--alpha", dg_args.alpha, "amplification factor");
    dg_cmd->add_option("--omega_sea", dg_args.omega_sea, "SEA bandwidth, rad/s");
    dg_cmd->add_option("--zeta_sea", dg_args.zeta_sea, "SEA damping ratio");
    dg_cmd->add_option("--phi", dg_args.phi_deg, "target phase margin, deg")->required();
    dg_cmd->add_option("--f", dg_args.f, "fractional order override");
    dg_cmd->add_option("--omega_c", dg_args.omega_c, "crossover override, rad/s");
    dg_cmd->add_option("--cascade_n", dg_args.cascade_n, "lag cascade section count");
    dg_cmd->add_option("--w_lo", dg_args.w_lo, "cascade band low edge, rad/s");
    dg_cmd->add_option("--w_hi", dg_args.w_hi, "cascade band high edge, rad/s");
    dg_cmd->add_option("--out", dg_args.out_dir, "output directory");

    BodeArgs bd_args;
    auto* bd_cmd = app.add_subcommand("bode", "export frequency-response data for a designed system");
    bd_cmd->add_option("--design", bd_args.design_path, "design JSON from the design command")
        ->required();
    bd_cmd->add_option("--system", bd_args.system,
                       "plant | controller | cascade | loop | loop_cascade");
    bd_cmd->add_option("--out", bd_args.out_path, "output CSV");
    bd_cmd->add_option("--ppd", bd_args.points_per_decade, "grid points per decade");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim_cmd) {
            if (*seed_opt) sim_args.seed = seed_flag;
            return cmd_simulate(sim_args);
        }
        if (*id_cmd) return cmd_identify(id_args);
        if (*ft_cmd) return cmd_ftest(ft_args);
        if (*rg_cmd) return cmd_regress(rg_args);
        if (*dg_cmd) return cmd_design(dg_args);
        if (*bd_cmd) return cmd_bode(bd_args);
    } catch (const dynstiff::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const dynstiff::NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
