#include "pipeobs/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "pipeobs/io.hpp"
#include "pipeobs/picard.hpp"

namespace pipeobs {

namespace {

using nlohmann::json;

json fit_json(const RunResult& r) {
    if (!r.fit_error.empty()) return json{{"error", r.fit_error}};
    const auto& f = r.fit;
    return json{{"c1", f.c1},
                {"c2", f.c2},
                {"t0", f.t0},
                {"t1", f.t1},
                {"residual", f.residual},
                {"samples_used", f.used},
                {"plateau", f.plateau},
                {"plateau_level", f.plateau_level},
                {"status", to_string(f.status)}};
}

json audit_json(const AuditReport& a) {
    json out = json::array();
    for (const auto& c : a.checks) {
        json j{{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}};
        j["first_failure"] = std::isnan(c.first_failure) ? json(nullptr) : json(c.first_failure);
        out.push_back(j);
    }
    return out;
}

}  // namespace

json run_summary(const Scenario& sc, const RunResult& r) {
    const auto& last = r.series.samples.back();
    return json{
        {"name", sc.name},
        {"digest", sha256_hex(sc.canonical_source)},
        {"mode", to_string(sc.mode)},
        {"mu", sc.mu},
        {"gamma", sc.gamma},
        {"stepper", sc.stepper == StepperKind::moc ? "moc" : "fv"},
        {"cells", sc.cells},
        {"cfl", sc.cfl},
        {"T", sc.T},
        {"samples", sc.samples},
        {"steps", r.steps},
        {"fit", fit_json(r)},
        {"audit", audit_json(r.audit)},
        {"audit_pass", r.audit.all_pass()},
        {"delta", {{"delta", r.delta.delta},
                   {"poincare_cap", r.delta.poincare_cap},
                   {"decay_cap", r.delta.decay_cap}}},
        {"norm_equivalence", {{"c0", r.norms.c0}, {"C0", r.norms.C0}}},
        {"delta_m0", r.delta_m0},
        {"final_l2_err", std::sqrt(last.l2_err_sq)},
        {"initial_l2_err", std::sqrt(r.series.samples.front().l2_err_sq)},
        {"wall_seconds", r.wall_seconds},
        {"warnings", r.warnings},
    };
}

namespace {

struct Globals {
    std::string out;
    std::optional<int> cells;
    std::optional<double> cfl;
    bool strict = false;
    int threads = 1;
};

std::filesystem::path out_dir(const Globals& g, const std::string& name) {
    std::string root = g.out;
    if (root.empty()) {
        const char* env = std::getenv("PIPEOBS_OUT");
        root = env && *env ? env : "out";
    }
    std::filesystem::path dir = std::filesystem::path(root) / name;
    std::filesystem::create_directories(dir);
    return dir;
}

Scenario load(const std::string& path, const Globals& g) {
    Scenario sc = load_scenario_file(path);
    if (g.cells) sc.cells = *g.cells;
    if (g.cfl) sc.cfl = *g.cfl;
    validate_scenario(sc);
    return sc;
}

void write_run(const std::filesystem::path& dir, const Scenario& sc, const RunResult& r,
               bool svg) {
    write_series_csv((dir / "series.csv").string(), r.series);
    write_text((dir / "summary.json").string(), canonical_dump(run_summary(sc, r)) + "\n");
    if (svg) {
        std::vector<double> t, e;
        for (const auto& s : r.series.samples) {
            t.push_back(s.t);
            e.push_back(std::sqrt(std::max(s.l2_err_sq, 0.0)));
        }
        write_text((dir / "decay.svg").string(),
                   decay_svg(t, e, fmt::format("{}: L2 error ({})", sc.name, to_string(sc.mode))));
    }
}

int cmd_simulate(const std::string& path, const Globals& g) {
    Scenario sc = load(path, g);
    RunOptions opt;
    opt.truth_only = true;
    opt.strict = g.strict;
    const auto r = run_twin(sc, opt);
    Scenario shown = sc;
    shown.mode = Mode::none;
    write_run(out_dir(g, sc.name), shown, r, false);
    std::cout << fmt::format("simulate {}: {} steps, T={}\n", sc.name, r.steps, sc.T);
    return kExitOk;
}

void apply_observe_flags(Scenario& sc, const std::string& mode, std::optional<double> mu,
                         double perturb) {
    if (!mode.empty()) {
        const Mode m = parse_mode(mode);
        if (m == Mode::none) throw ConfigError("observe needs a measurement mode");
        sc.mode = m;
    }
    if (sc.mode == Mode::none) throw ConfigError("observe needs a measurement mode");
    if (mu) sc.mu = *mu;
    if (perturb != 1.0)
        for (auto& p : sc.perturbation) {
            p.rho = p.rho.scaled(perturb);
            p.v = p.v.scaled(perturb);
        }
    validate_scenario(sc);
}

int observe_once(const Scenario& sc, const Globals& g, bool svg, RunResult* out = nullptr) {
    RunOptions opt;
    opt.strict = g.strict;
    auto r = run_twin(sc, opt);
    write_run(out_dir(g, sc.name), sc, r, svg);
    const int code = (g.strict && !r.audit.all_pass()) ? kExitAudit : kExitOk;
    if (out) *out = std::move(r);
    return code;
}

int cmd_observe(const std::string& path, const Globals& g, const std::string& mode,
                std::optional<double> mu, double perturb, bool svg) {
    Scenario sc = load(path, g);
    apply_observe_flags(sc, mode, mu, perturb);
    RunResult r;
    const int code = observe_once(sc, g, svg, &r);
    if (r.fit_error.empty())
        std::cout << fmt::format("observe {} [{}]: C2={:.6g} C1={:.6g} residual={:.3g} status={}\n",
                                 sc.name, to_string(sc.mode), r.fit.c2, r.fit.c1, r.fit.residual,
                                 to_string(r.fit.status));
    else
        std::cout << fmt::format("observe {} [{}]: fit unavailable ({})\n", sc.name,
                                 to_string(sc.mode), r.fit_error);
    if (code == kExitAudit) {
        for (const auto& c : r.audit.checks)
            if (!c.pass)
                std::cerr << fmt::format("audit failure: {} (margin {:.3g}, first at t={:.6g})\n",
                                         c.name, c.margin, c.first_failure);
    }
    return code;
}

json picard_json(const PicardResult& r) {
    json it = json::array();
    for (const auto& e : r.iterates) it.push_back(json{{"lipschitz", e.l_x}, {"sup", e.sup}});
    return json{{"iterations", r.iterations}, {"converged", r.converged},
                {"diverged", r.diverged},     {"left_ball", r.left_ball},
                {"max_ratio", r.max_ratio},   {"residual", r.residual},
                {"ratios", r.ratios},         {"differences", r.diffs},
                {"iterates", it},             {"failure", r.failure},
                {"warnings", r.warnings}};
}

int cmd_picard(const std::string& path, const Globals& g, int windows) {
    Scenario sc = load(path, g);
    const auto& ps = sc.picard;
    const SmallnessBudget b = derive_budget(sc, ps);
    json report{{"name", sc.name},
                {"digest", sha256_hex(sc.canonical_source)},
                {"budget",
                 {{"s_max", b.s_max},
                  {"b_max", b.b_max},
                  {"l_i", b.l_i},
                  {"l_r", b.l_r},
                  {"T", b.T},
                  {"mu", b.mu},
                  {"lambda_lo", b.lambda_lo},
                  {"lambda_hi", b.lambda_hi},
                  {"l_lambda", b.l_lambda},
                  {"l_sigma", b.l_sigma},
                  {"sigma_max", b.sigma_max},
                  {"c_n", b.c_n},
                  {"horizon_cert", std::isfinite(b.horizon_cert) ? json(b.horizon_cert) : json(nullptr)},
                  {"horizon_edge", b.horizon_edge},
                  {"horizon_margin", b.horizon_margin},
                  {"violations", b.violations}}}};
    std::vector<std::string> problems = b.violations;
    auto check = [&](const PicardResult& r, const char* what) {
        if (!r.converged) problems.push_back(fmt::format("{}: {}", what, r.failure));
        if (r.max_ratio >= 1.0)
            problems.push_back(fmt::format("{}: contraction ratio {:.4g} >= 1", what, r.max_ratio));
        if (r.converged && r.residual > 2.0 * ps.tol)
            problems.push_back(fmt::format("{}: residual {:.3e} above tolerance", what, r.residual));
        if (r.left_ball)
            problems.push_back(fmt::format("{}: iterates left the S_max ball", what));
    };
    if (windows <= 1) {
        const auto truth =
            iterate_to_fixed_point(picard_data(sc, ps.nx, false, 0.0), nullptr, b, ps);
        check(truth, "truth");
        report["truth"] = picard_json(truth);
        if (sc.mu > 0.0) {
            const auto obs = iterate_to_fixed_point(picard_data(sc, ps.nx, true, sc.mu),
                                                    &truth.solution, b, ps);
            check(obs, "observer");
            report["observer"] = picard_json(obs);
        }
    } else {
        const auto cont = semi_global_continuation(sc, b, ps, windows * b.T);
        json w = json::array();
        for (const auto& r : cont.windows) {
            w.push_back(json{{"index", r.index},         {"t0", r.t0},
                             {"t1", r.t1},               {"iterations", r.iterations},
                             {"max_ratio", r.max_ratio}, {"residual", r.residual},
                             {"sup", r.sup},             {"sup_error", r.sup_error}});
            if (r.max_ratio >= 1.0)
                problems.push_back(fmt::format("window {}: ratio {:.4g} >= 1", r.index, r.max_ratio));
        }
        report["windows"] = w;
        report["c_T"] = cont.c_T;
        if (!cont.ok) problems.push_back(cont.failure);
    }
    report["problems"] = problems;
    report["certified"] = problems.empty();
    write_text((out_dir(g, sc.name) / "picard.json").string(), canonical_dump(report) + "\n");
    if (!problems.empty()) {
        for (const auto& p : problems) std::cerr << "picard: " << p << "\n";
        return kExitPicard;
    }
    std::cout << fmt::format("picard {}: certified on T={:.6g}\n", sc.name, b.T);
    return kExitOk;
}

int cmd_sweep(const std::string& path, const Globals& g, const std::string& param,
              const std::vector<double>& values) {
    if (values.empty()) {
        std::cerr << "sweep: --values must list at least one value\n";
        return kExitUsage;
    }
    if (param != "mu" && param != "gamma") {
        std::cerr << fmt::format("sweep: unsupported parameter '{}' (mu or gamma)\n", param);
        return kExitUsage;
    }
    const Scenario base = load(path, g);
    if (base.mode == Mode::none) throw ConfigError("sweep needs a measurement mode");
    struct Row {
        double value = 0;
        bool ok = false;
        double c2 = 0;
        std::string status, error;
    };
    std::vector<Row> rows(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k; (k = next++) < values.size();) {
            Row& row = rows[k];
            row.value = values[k];
            try {
                Scenario sc = base;
                (param == "mu" ? sc.mu : sc.gamma) = values[k];
                sc.name = fmt::format("{}_{}_{}", base.name, param, k);
                validate_scenario(sc);
                RunResult r;
                observe_once(sc, g, false, &r);
                row.ok = r.fit_error.empty();
                row.c2 = r.fit.c2;
                row.status = r.fit_error.empty() ? to_string(r.fit.status) : r.fit_error;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(g.threads, static_cast<int>(values.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::string csv = param + ",c2,status,error\n";
    int ok = 0;
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        csv += fmt::format("{:.17g},{:.17g},{},{}\n", r.value, r.c2, r.status, err);
        ok += r.ok;
        if (!r.error.empty()) std::cerr << fmt::format("sweep {}={}: {}\n", param, r.value, r.error);
    }
    write_text((out_dir(g, base.name) / "sweep.csv").string(), csv);
    std::cout << fmt::format("sweep {}: {}/{} runs succeeded\n", base.name, ok, rows.size());
    return ok > 0 ? kExitOk : kExitSolver;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Observer synchronization experiments on gas pipe networks", "pipeobs"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--out", g.out, "Output root (default $PIPEOBS_OUT or ./out)");
    app.add_option("--cells", g.cells, "Cells per edge")->check(CLI::PositiveNumber);
    app.add_option("--cfl", g.cfl, "CFL number in (0, 1]")->check(CLI::Range(1e-6, 1.0));
    app.add_flag("--strict", g.strict, "Fail on audit failures and out-of-ball node data");
    app.add_option("--threads", g.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);

    std::string config;
    auto* sim = app.add_subcommand("simulate", "Run the truth system only");
    sim->add_option("config", config, "Scenario JSON")->required();

    auto* obs = app.add_subcommand("observe", "Run truth and observer");
    obs->add_option("config", config, "Scenario JSON")->required();
    std::string mode;
    std::optional<double> mu;
    double perturb = 1.0;
    bool no_svg = false;
    obs->add_option("--mode", mode, "velocity, density or massflow");
    obs->add_option("--mu", mu, "Nudging gain")->check(CLI::NonNegativeNumber);
    obs->add_option("--perturb", perturb, "Scale factor for the observer perturbation");
    obs->add_flag("--no-svg", no_svg, "Skip decay.svg");

    auto* pic = app.add_subcommand("picard", "Fixed-point iteration along characteristics");
    pic->add_option("config", config, "Scenario JSON")->required();
    int windows = 1;
    pic->add_option("--windows", windows, "Number of continuation windows")
        ->check(CLI::PositiveNumber);

    auto* sw = app.add_subcommand("sweep", "Observe runs over a parameter list");
    sw->add_option("config", config, "Scenario JSON")->required();
    std::string param = "mu";
    std::vector<double> values;
    sw->add_option("--param", param, "Parameter to vary (mu or gamma)");
    sw->add_option("--values", values, "Values, comma or space separated")->delimiter(',');

    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    for (auto& a : storage) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sim) return cmd_simulate(config, g);
        if (*obs) return cmd_observe(config, g, mode, mu, perturb, !no_svg);
        if (*pic) return cmd_picard(config, g, windows);
        if (*sw) return cmd_sweep(config, g, param, values);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitUsage;
}

}  // namespace pipeobs
