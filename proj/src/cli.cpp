#include "rdp/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "rdp/audit.hpp"
#include "rdp/combinat.hpp"
#include "rdp/poly.hpp"

namespace rdp::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

const std::vector<std::string> kPmfKeys = {"n", "kind", "support", "bernoulli"};
const std::vector<std::string> kDgpKeys = {"d", "basis", "basis_seed"};

bool is_one_of(const std::string& key, const std::vector<std::string>& keys) {
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

Json subset(const Json& j, const std::vector<std::string>& keys) {
    Json out = Json::object();
    for (const auto& [k, v] : j.items()) {
        if (is_one_of(k, keys)) out[k] = v;
    }
    return out;
}

void reject_unknown(const Json& j, const std::vector<std::string>& allowed, const std::string& what) {
    for (const auto& [k, v] : j.items()) {
        if (!is_one_of(k, allowed)) throw ValidationError(what + ": unknown key '" + k + "'");
    }
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

DgpSetup dgp_from_config(const Json& config) {
    if (!config.is_object()) throw ValidationError("dgp config: expected a table");
    reject_unknown(config, concat(kPmfKeys, kDgpKeys), "dgp config");
    auto pmf = io::pmf_from_json(subset(config, kPmfKeys));
    if (!config.contains("d")) throw ValidationError("dgp config: missing key 'd'");
    if (!config.at("d").is_number_integer() || config.at("d").get<long long>() < 1) {
        throw ValidationError("dgp config: key 'd' must be a positive integer");
    }
    const auto d = config.at("d").get<std::size_t>();
    dgp::BasisMode mode = dgp::BasisMode::orthonormal;
    if (config.contains("basis")) {
        if (!config.at("basis").is_string()) throw ValidationError("dgp config: key 'basis' must be a string");
        mode = dgp::parse_basis_mode(config.at("basis").get<std::string>());
    }
    std::uint64_t basis_seed = 0;
    if (config.contains("basis_seed")) {
        if (!config.at("basis_seed").is_number_integer()) {
            throw ValidationError("dgp config: key 'basis_seed' must be an integer");
        }
        basis_seed = config.at("basis_seed").get<std::uint64_t>();
    }
    auto basis = dgp::make_basis(d, static_cast<std::size_t>(pmf.size()), mode, basis_seed);
    Json resolved = io::pmf_to_json(pmf);
    resolved["d"] = d;
    resolved["basis"] = dgp::to_string(mode);
    resolved["basis_seed"] = basis_seed;
    return {std::move(pmf), std::move(basis), std::move(resolved)};
}

DgpSetup fig3_dgp() {
    return dgp_from_config(
        {{"n", 4}, {"kind", "bernoulli"}, {"bernoulli", {0.2, 0.2, 0.2, 0.2}}, {"d", 4}, {"basis", "orthonormal"},
         {"basis_seed", 3}});
}

sae::TrainConfig fig3_train() {
    sae::TrainConfig cfg;
    cfg.width = 3;
    cfg.activation = sae::Activation::topk(2);
    cfg.lambda = 0.0;
    cfg.init = sae::InitScheme::near_monosemantic;
    cfg.noise_scale = 0.05;
    return cfg;
}

DgpSetup fig4_dgp() {
    return dgp_from_config({{"n", 20},
                            {"kind", "bernoulli"},
                            {"bernoulli", std::vector<double>(20, 0.03)},
                            {"d", 6},
                            {"basis", "random_unit"},
                            {"basis_seed", 4}});
}

frontier::SweepGrid fig4_grid() {
    auto setup = fig4_dgp();
    sae::TrainConfig base;
    base.width = 20;
    base.init = sae::InitScheme::random_unit_rows;
    return frontier::SweepGrid{std::move(setup.pmf), std::move(setup.basis), {1, 2, 3, 4, 5, 6, 7, 8},
                               frontier::default_lambdas(), 7, base, 0};
}

namespace {

std::string out_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

class Manifest {
public:
    Manifest(std::string subcommand, std::string dir)
        : subcommand_(std::move(subcommand)), dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {}

    Json config = Json::object();
    std::optional<std::uint64_t> seed;

    void input(const std::string& path) { inputs_[path] = io::file_hash(path); }

    void write(const std::string& name, const std::string& content) {
        const auto path = out_path(dir_, name);
        io::write_file(path, content);
        outputs_[name] = io::fnv1a_hex(content);
    }

    void record(const std::string& name) { outputs_[name] = io::file_hash(out_path(dir_, name)); }

    void finish() {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        Json j;
        j["subcommand"] = subcommand_;
        j["tool_version"] = kVersion;
        j["seed"] = seed ? Json(*seed) : Json();
        j["config"] = config;
        Json in = Json::object(), out = Json::object();
        for (const auto& [k, v] : inputs_) in[k] = v;
        for (const auto& [k, v] : outputs_) out[k] = v;
        j["inputs"] = in;
        j["outputs"] = out;
        j["hash"] = "fnv1a-64";
        j["wall_clock_seconds"] = secs;
        io::write_file(out_path(dir_, "manifest.json"), j.dump(2) + "\n");
    }

    const std::string& dir() const { return dir_; }

private:
    std::string subcommand_;
    std::string dir_;
    std::chrono::steady_clock::time_point start_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

void say(const std::string& line) { std::cout << line << "\n"; }

// Options shared by every command that needs a DGP.
struct DgpSource {
    std::string preset;
    std::string config;
    std::string pmf;
    std::string basis;

    void add(CLI::App* cmd, bool allow_basis = true) {
        cmd->add_option("--preset", preset, "Built-in DGP preset")->check(CLI::IsMember({"fig3", "fig4"}));
        cmd->add_option("--dgp", config, "DGP config file (pmf keys plus d, basis, basis_seed)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--pmf", pmf, "Pmf file (JSON or key = value text)")->check(CLI::ExistingFile);
        if (allow_basis) cmd->add_option("--basis", basis, "Basis CSV (header v1..vn)")->check(CLI::ExistingFile);
    }

    int sources() const { return !preset.empty() + !config.empty() + !pmf.empty(); }

    DgpSetup load(Manifest& manifest) const {
        if (sources() != 1) throw ValidationError("give exactly one of --preset, --dgp or --pmf");
        if (!preset.empty()) return preset == "fig3" ? fig3_dgp() : fig4_dgp();
        if (!config.empty()) {
            manifest.input(config);
            return dgp_from_config(io::load_structured(config));
        }
        if (basis.empty()) throw ValidationError("--pmf needs --basis (or use --dgp)");
        manifest.input(pmf);
        manifest.input(basis);
        auto p = io::load_pmf(pmf);
        auto b = io::parse_basis_csv(io::read_file(basis));
        if (b.size() != static_cast<std::size_t>(p.size())) {
            throw ValidationError("basis has " + std::to_string(b.size()) + " concepts but the pmf has n=" +
                                  std::to_string(p.size()));
        }
        Json cfg = io::pmf_to_json(p);
        cfg["d"] = b.dim();
        cfg["basis"] = dgp::to_string(b.mode());
        cfg["basis_file"] = basis;
        return {std::move(p), std::move(b), std::move(cfg)};
    }

    dgp::ConceptPmf load_pmf_only(Manifest& manifest) const {
        if (sources() != 1) throw ValidationError("give exactly one of --preset, --dgp or --pmf");
        if (!pmf.empty()) {
            manifest.input(pmf);
            return io::load_pmf(pmf);
        }
        return load(manifest).pmf;
    }
};

// Training flags that override a config file.
struct TrainFlags {
    std::string config;
    std::optional<std::size_t> width, k, steps, batch, checkpoints;
    std::optional<double> lr, lambda, l1, noise;
    std::optional<std::uint64_t> seed;
    std::string activation, init;
    bool tied = false, biases = false;

    void add(CLI::App* cmd, bool per_cell) {
        cmd->add_option("--train-config", config, "Training config file")->check(CLI::ExistingFile);
        cmd->add_option("--width", width, "Dictionary width m");
        if (!per_cell) {
            cmd->add_option("--k,--K", k, "TopK cap");
            cmd->add_option("--lambda", lambda, "Weight on P_joint");
            cmd->add_option("--seed", seed, "Training seed");
        }
        cmd->add_option("--activation", activation, "topk or relu")->check(CLI::IsMember({"topk", "relu"}));
        cmd->add_option("--steps", steps, "Optimizer steps");
        cmd->add_option("--batch", batch, "Batch size");
        cmd->add_option("--lr", lr, "Adam learning rate");
        cmd->add_option("--l1", l1, "Weight on ||z||_1");
        cmd->add_option("--init", init, "random_unit_rows or near_monosemantic");
        cmd->add_option("--noise", noise, "Near-monosemantic init noise scale");
        cmd->add_option("--checkpoints", checkpoints, "Trace points");
        cmd->add_flag("--tied", tied, "Tie encoder to decoder");
        cmd->add_flag("--train-biases", biases, "Learn biases");
    }

    sae::TrainConfig resolve(sae::TrainConfig cfg, Manifest& manifest) const {
        if (!config.empty()) {
            manifest.input(config);
            cfg = io::train_config_from_json(io::load_structured(config), cfg);
        }
        if (width) cfg.width = *width;
        if (!activation.empty()) {
            cfg.activation.kind = activation == "relu" ? sae::ActivationKind::relu : sae::ActivationKind::topk;
            if (activation == "relu") cfg.activation.k = 0;
        }
        if (k) cfg.activation = sae::Activation::topk(*k);
        if (steps) cfg.steps = *steps;
        if (batch) cfg.batch_size = *batch;
        if (lr) cfg.learning_rate = *lr;
        if (lambda) cfg.lambda = *lambda;
        if (l1) cfg.l1 = *l1;
        if (seed) cfg.seed = *seed;
        if (!init.empty()) cfg.init = sae::parse_init_scheme(init);
        if (noise) cfg.noise_scale = *noise;
        if (checkpoints) cfg.checkpoints = *checkpoints;
        if (tied) cfg.tied = true;
        if (biases) cfg.train_biases = true;
        cfg.validate();
        return cfg;
    }
};

Json measurement_json(const sae::SaeParams& params, const DgpSetup& setup, sae::MeasureSpec spec) {
    const auto m = sae::measure(params, setup.pmf, setup.basis, spec);
    Json j;
    j["R"] = m.rate;
    j["D"] = m.distortion;
    j["P_joint"] = poly::joint_polysemanticity(params, setup.basis);
    j["P_dec"] = poly::polysemanticity(poly::cosine_table(params.w_dec, setup.basis));
    j["P_enc"] = poly::polysemanticity(poly::cosine_table(params.w_enc, setup.basis));
    j["measure"] = spec.mode == sae::MeasureMode::exact ? "exact" : "monte_carlo";
    if (spec.mode == sae::MeasureMode::monte_carlo) {
        j["samples"] = spec.samples;
        j["R_stderr"] = m.rate_stderr;
        j["D_stderr"] = m.distortion_stderr;
    }
    return j;
}

sae::MeasureSpec measure_spec_for(const dgp::ConceptPmf& pmf, std::uint64_t seed) {
    return pmf.enumerable() ? sae::MeasureSpec::exact()
                            : sae::MeasureSpec::monte_carlo(frontier::kSweepMonteCarloSamples, derive_seed(seed, 3));
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& cell : io::split_csv_line(text)) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || *end != '\0') throw ValidationError(what + ": '" + cell + "' is not a number");
        out.push_back(v);
    }
    return out;
}

struct FrontierOptions {
    std::string d_grid, p_grid, r_grid;
    std::string axes = "R,D";
    std::string budget;
};

void analyze_sweep(const std::vector<frontier::SweepPoint>& points, const FrontierOptions& opt, Manifest& manifest) {
    using frontier::Axis;
    const auto ok_count = std::count_if(points.begin(), points.end(), [](const auto& p) { return p.ok; });
    if (ok_count == 0) throw ValidationError("frontier: the sweep has no successful points");
    const auto grid_or = [&](const std::string& text, Axis axis, const char* name) {
        return text.empty() ? frontier::decile_grid(points, axis) : parse_list(text, name);
    };
    const auto d_grid = grid_or(opt.d_grid, Axis::distortion, "--d-grid");
    const auto p_grid = grid_or(opt.p_grid, Axis::poly, "--p-grid");
    const auto r_grid = grid_or(opt.r_grid, Axis::rate, "--r-grid");
    const auto rate_env = frontier::empirical_envelope(points, d_grid, p_grid);
    const auto dist_env = frontier::distortion_envelope(points, r_grid, p_grid);
    manifest.write("envelope_rate.csv", io::envelope_csv(rate_env));
    manifest.write("envelope_distortion.csv", io::envelope_csv(dist_env));

    Json mono;
    const auto report = [](const frontier::Envelope& env) {
        Json list = Json::array();
        for (const auto& v : frontier::monotonicity_check(env)) {
            list.push_back({{"relaxed", frontier::to_string(v.relaxed)},
                            {"from", {v.from_b, v.from_p}},
                            {"to", {v.to_b, v.to_p}},
                            {"before", v.before ? Json(*v.before) : Json()},
                            {"after", v.after ? Json(*v.after) : Json()}});
        }
        return list;
    };
    mono["rate_envelope_violations"] = report(rate_env);
    mono["distortion_envelope_violations"] = report(dist_env);
    mono["grids"] = {{"D0", d_grid}, {"P0", p_grid}, {"R0", r_grid},
                     {"source", opt.d_grid.empty() ? "empirical deciles" : "user"}};

    const auto axes = io::split_csv_line(opt.axes);
    if (axes.size() != 2) throw ValidationError("--axes needs two of R, D, P");
    const Axis x = frontier::parse_axis(axes[0]);
    const Axis y = frontier::parse_axis(axes[1]);
    std::optional<frontier::BudgetFilter> filter;
    if (!opt.budget.empty()) {
        const auto colon = opt.budget.find(':');
        if (colon == std::string::npos) throw ValidationError("--budget must look like P:0.1");
        filter = frontier::BudgetFilter{frontier::parse_axis(opt.budget.substr(0, colon)),
                                        parse_list(opt.budget.substr(colon + 1), "--budget").at(0)};
    }
    const auto front = frontier::pareto_front(points, x, y, filter);
    manifest.write("front.csv", io::sweep_csv(front.points));
    mono["front"] = {{"axes", {frontier::to_string(x), frontier::to_string(y)}},
                     {"budget", filter ? Json({{"axis", frontier::to_string(filter->axis)}, {"bound", filter->bound}})
                                       : Json()},
                     {"size", front.points.size()},
                     {"empty_after_filter", front.empty}};

    // Tightened polysemanticity budget versus the unconstrained (R, D) front.
    const double p_low = p_grid.front();
    const auto all_rd = frontier::pareto_front(points, Axis::rate, Axis::distortion);
    const auto low_rd = frontier::pareto_front(points, Axis::rate, Axis::distortion,
                                               frontier::BudgetFilter{Axis::poly, p_low});
    manifest.write("front_RD_lowest_P.csv", io::sweep_csv(low_rd.points));
    mono["lowest_P_budget"] = {
        {"P0", p_low},
        {"front_size", low_rd.points.size()},
        {"weakly_dominated_by_unfiltered",
         frontier::weakly_dominated_by(low_rd.points, all_rd.points, Axis::rate, Axis::distortion)}};
    manifest.write("frontier_report.json", mono.dump(2) + "\n");
}

void write_fig3_outputs(Manifest& manifest, const DgpSetup& setup, const sae::TrainConfig& base) {
    const auto stairs = combinat::monosemantic_frontier(setup.pmf, static_cast<int>(base.width));
    manifest.write("staircase.csv", io::staircase_csv(stairs));
    Json runs = Json::array();
    std::string summary = "seed,R,D,P_joint,P_dec\n";
    for (std::size_t s = 0; s < kFig3Seeds; ++s) {
        auto cfg = base;
        cfg.seed = derive_seed(kFig3BaseSeed, s);
        const auto result = sae::train(setup.pmf, setup.basis, cfg);
        const auto tag = "seed" + std::to_string(s);
        manifest.write("trace_" + tag + ".csv", io::trace_csv(result.trace));
        for (const auto& p : io::save_checkpoint(out_path(manifest.dir(), "checkpoint_" + tag), result.params, cfg)) {
            manifest.record(fs::relative(p, manifest.dir()).string());
        }
        auto m = measurement_json(result.params, setup, sae::MeasureSpec::exact());
        m["seed"] = cfg.seed;
        m["below_monosemantic_floor"] = m["D"].get<double>() < stairs.infeasible_below;
        summary += std::to_string(cfg.seed) + "," + io::format_double(m["R"].get<double>()) + "," +
                   io::format_double(m["D"].get<double>()) + "," + io::format_double(m["P_joint"].get<double>()) +
                   "," + io::format_double(m["P_dec"].get<double>()) + "\n";
        runs.push_back(m);
        say(tag + ": D=" + io::format_double(m["D"].get<double>()) +
            " P_joint=" + io::format_double(m["P_joint"].get<double>()));
    }
    manifest.write("fig3_summary.csv", summary);
    Json j;
    j["monosemantic_floor_D"] = stairs.infeasible_below;
    j["runs"] = runs;
    manifest.write("fig3_report.json", j.dump(2) + "\n");
    say("best monosemantic distortion at width " + std::to_string(base.width) + ": " +
        io::format_double(stairs.infeasible_below));
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return kOk;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const RuntimeFailure& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Rate-distortion-polysemanticity lab: toy SAEs, exact frontiers and proxy audits", "rdp-lab"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir = "rdp_out";
    app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();

    // gen-dgp
    auto* gen = app.add_subcommand("gen-dgp", "Write pmf and basis files for a DGP");
    DgpSource gen_src;
    gen->add_option("--preset", gen_src.preset, "Built-in DGP preset")->check(CLI::IsMember({"fig3", "fig4"}));
    gen->add_option("config", gen_src.config, "DGP config file")->check(CLI::ExistingFile);

    // train
    auto* train = app.add_subcommand("train", "Train one SAE and measure R, D, P");
    DgpSource train_src;
    train_src.add(train);
    TrainFlags train_flags;
    train_flags.add(train, false);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Train a (K, lambda, seed) grid");
    std::string sweep_config;
    std::string sweep_preset;
    std::string sweep_ks, sweep_lambdas;
    std::optional<std::size_t> sweep_seeds;
    std::optional<std::uint64_t> sweep_base_seed;
    sweep->add_option("--preset", sweep_preset, "Built-in grid")->check(CLI::IsMember({"fig4"}));
    sweep->add_option("--config", sweep_config, "Grid config: DGP keys, ks, lambdas, seeds, base_seed, [train]")
        ->check(CLI::ExistingFile);
    sweep->add_option("--ks", sweep_ks, "Comma-separated K values");
    sweep->add_option("--lambdas", sweep_lambdas, "Comma-separated lambda values");
    sweep->add_option("--seeds", sweep_seeds, "Seeds per cell");
    sweep->add_option("--base-seed", sweep_base_seed, "Seed expanded per cell");
    TrainFlags sweep_flags;
    sweep_flags.add(sweep, true);

    // frontier
    auto* front = app.add_subcommand("frontier", "Envelopes, Pareto fronts and monotonicity checks for a sweep CSV");
    std::string front_sweep;
    FrontierOptions front_opt;
    front->add_option("--sweep", front_sweep, "Sweep CSV")->required()->check(CLI::ExistingFile);
    front->add_option("--d-grid", front_opt.d_grid, "D0 grid (default: deciles)");
    front->add_option("--p-grid", front_opt.p_grid, "P0 grid (default: deciles)");
    front->add_option("--r-grid", front_opt.r_grid, "R0 grid for the distortion dual (default: deciles)");
    front->add_option("--axes", front_opt.axes, "Front axes, two of R,D,P")->capture_default_str();
    front->add_option("--budget", front_opt.budget, "Filter before the front, e.g. P:0.1");

    // enumerate
    auto* en = app.add_subcommand("enumerate", "Exact aligned-code optimum and monosemantic staircase");
    DgpSource en_src;
    en_src.add(en, false);
    int en_m = 0;
    int en_k = 1;
    bool en_mono = false;
    en->add_option("--m,--width", en_m, "Dictionary width")->required();
    en->add_option("--k,--K", en_k, "Active-atom cap")->capture_default_str();
    en->add_flag("--monosemantic-only", en_mono, "Restrict atoms to singletons");

    // rate-tax
    auto* tax = app.add_subcommand("rate-tax", "Check the rate-tax assumptions and bound");
    DgpSource tax_src;
    tax_src.add(tax, false);
    int tax_m = 0;
    int tax_k = 1;
    tax->add_option("--m,--width", tax_m, "Dictionary width")->required();
    tax->add_option("--k,--K", tax_k, "Rate budget")->required();

    // predicates
    auto* pred = app.add_subcommand("predicates", "Three-concept hedging and splitting inequalities");
    DgpSource pred_src;
    pred_src.add(pred, false);
    int pred_k = 2;
    pred->add_option("--K,--k", pred_k, "Active-atom cap (1 or 2)")->check(CLI::IsMember({1, 2}))->capture_default_str();

    // audit
    auto* aud = app.add_subcommand("audit", "Violation rate and RDP rank correlation of proxies");
    std::string aud_in, aud_orient, aud_proxies;
    aud->add_option("--in", aud_in, "CSV sae_id,R,D,<proxies>")->required()->check(CLI::ExistingFile);
    aud->add_option("--orientation", aud_orient, "JSON proxy -> +1/-1")->check(CLI::ExistingFile);
    aud->add_option("--proxies", aud_proxies, "Comma-separated subset of proxies");

    // repro
    auto* repro = app.add_subcommand("repro", "Run a figure preset end to end");
    std::string repro_target;
    repro->add_option("target", repro_target, "fig3 or fig4")->required()->check(CLI::IsMember({"fig3", "fig4"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidation;
    }

    if (*gen) {
        return guarded([&] {
            Manifest manifest("gen-dgp", out_dir);
            if (gen_src.preset.empty() == gen_src.config.empty()) {
                throw ValidationError("give exactly one of a config file or --preset");
            }
            DgpSetup setup = gen_src.preset.empty() ? gen_src.load(manifest)
                                                    : (gen_src.preset == "fig3" ? fig3_dgp() : fig4_dgp());
            if (!gen_src.preset.empty()) manifest.config["preset"] = gen_src.preset;
            manifest.config["dgp"] = setup.config;
            manifest.seed = setup.config["basis_seed"].get<std::uint64_t>();
            manifest.write("pmf.toml", io::pmf_to_text(setup.pmf));
            manifest.write("basis.csv", io::basis_csv(setup.basis));
            manifest.write("dgp.json", setup.config.dump(2) + "\n");
            manifest.finish();
            say("wrote pmf.toml, basis.csv, dgp.json to " + out_dir);
        });
    }
    if (*train) {
        return guarded([&] {
            Manifest manifest("train", out_dir);
            const auto setup = train_src.load(manifest);
            const auto base = train_src.preset == "fig3" ? fig3_train() : sae::TrainConfig{};
            const auto cfg = train_flags.resolve(base, manifest);
            manifest.config["dgp"] = setup.config;
            manifest.config["train"] = io::train_config_json(cfg);
            manifest.seed = cfg.seed;
            const auto result = sae::train(setup.pmf, setup.basis, cfg);
            for (const auto& p : io::save_checkpoint(out_dir, result.params, cfg)) {
                manifest.record(fs::path(p).filename().string());
            }
            manifest.write("trace.csv", io::trace_csv(result.trace));
            manifest.write("cosines_dec.csv", io::cosine_csv(poly::cosine_table(result.params.w_dec, setup.basis)));
            const auto m = measurement_json(result.params, setup, measure_spec_for(setup.pmf, cfg.seed));
            manifest.write("measurement.json", m.dump(2) + "\n");
            manifest.finish();
            say("R=" + io::format_double(m["R"].get<double>()) + " D=" + io::format_double(m["D"].get<double>()) +
                " P_joint=" + io::format_double(m["P_joint"].get<double>()));
        });
    }
    if (*sweep) {
        return guarded([&] {
            Manifest manifest("sweep", out_dir);
            if (sweep_preset.empty() == sweep_config.empty()) throw ValidationError("give exactly one of --preset or --config");
            std::optional<frontier::SweepGrid> grid;
            if (!sweep_preset.empty()) {
                grid = fig4_grid();
                manifest.config["preset"] = sweep_preset;
                manifest.config["dgp"] = fig4_dgp().config;
            } else {
                manifest.input(sweep_config);
                const Json cfg = io::load_structured(sweep_config);
                const std::vector<std::string> grid_keys = {"ks", "lambdas", "seeds", "base_seed", "train"};
                reject_unknown(cfg, concat(concat(kPmfKeys, kDgpKeys), grid_keys), "sweep config");
                auto setup = dgp_from_config(subset(cfg, concat(kPmfKeys, kDgpKeys)));
                if (!cfg.contains("ks")) throw ValidationError("sweep config: missing key 'ks'");
                sae::TrainConfig base;
                if (cfg.contains("train")) base = io::train_config_from_json(cfg.at("train"), base);
                grid = frontier::SweepGrid{std::move(setup.pmf), std::move(setup.basis),
                                           cfg.at("ks").get<std::vector<int>>(),
                                           cfg.value("lambdas", frontier::default_lambdas()),
                                           cfg.value("seeds", std::size_t{1}), base,
                                           cfg.value("base_seed", std::uint64_t{0})};
                manifest.config["dgp"] = setup.config;
            }
            if (!sweep_ks.empty()) {
                grid->ks.clear();
                for (double v : parse_list(sweep_ks, "--ks")) grid->ks.push_back(static_cast<int>(v));
            }
            if (!sweep_lambdas.empty()) grid->lambdas = parse_list(sweep_lambdas, "--lambdas");
            if (sweep_seeds) grid->seeds = *sweep_seeds;
            if (sweep_base_seed) grid->base_seed = *sweep_base_seed;
            grid->base = sweep_flags.resolve(grid->base, manifest);
            grid->validate();
            manifest.config["ks"] = grid->ks;
            manifest.config["lambdas"] = grid->lambdas;
            manifest.config["lambda_grid_note"] = "default lambda axis {0,1,3,10,30,100} unless overridden";
            manifest.config["seeds"] = grid->seeds;
            manifest.config["train"] = io::train_config_json(grid->base);
            manifest.config["measure"] = grid->pmf.enumerable() ? "exact" : "monte_carlo(100000)";
            manifest.seed = grid->base_seed;
            const auto points = frontier::run_sweep(*grid);
            manifest.write("sweep.csv", io::sweep_csv(points));
            manifest.finish();
            const auto failed = std::count_if(points.begin(), points.end(), [](const auto& p) { return !p.ok; });
            say(std::to_string(points.size()) + " cells, " + std::to_string(failed) + " failed");
        });
    }
    if (*front) {
        return guarded([&] {
            Manifest manifest("frontier", out_dir);
            manifest.input(front_sweep);
            manifest.config = {{"sweep", front_sweep}, {"d_grid", front_opt.d_grid}, {"p_grid", front_opt.p_grid},
                               {"r_grid", front_opt.r_grid}, {"axes", front_opt.axes}, {"budget", front_opt.budget}};
            analyze_sweep(io::parse_sweep_csv(io::read_file(front_sweep)), front_opt, manifest);
            manifest.finish();
            say("wrote envelopes, fronts and frontier_report.json to " + out_dir);
        });
    }
    if (*en) {
        return guarded([&] {
            Manifest manifest("enumerate", out_dir);
            const auto pmf = en_src.load_pmf_only(manifest);
            manifest.config = {{"pmf", io::pmf_to_json(pmf)}, {"m", en_m}, {"K", en_k}, {"monosemantic_only", en_mono}};
            const auto best = combinat::brute_force_optimum(pmf, en_m, en_k, en_mono);
            Json j;
            j["D"] = best.distortion;
            j["R"] = best.rate;
            j["code"] = io::code_json(best.code);
            j["dictionaries_searched"] = best.dictionaries;
            manifest.write("optimum.json", j.dump(2) + "\n");
            const auto stairs = combinat::monosemantic_frontier(pmf, en_m);
            manifest.write("frontier.csv", io::staircase_csv(stairs));
            manifest.write("staircase.json", Json({{"infeasible_below", stairs.infeasible_below},
                                                   {"min_omitted_mass", combinat::min_omitted_mass(pmf, en_m)},
                                                   {"expected_sparsity", stairs.expected_sparsity}})
                                                     .dump(2) +
                                                 "\n");
            manifest.finish();
            say("optimum D=" + io::format_double(best.distortion) + " R=" + io::format_double(best.rate) +
                (combinat::is_monosemantic(best.code) ? " (monosemantic)" : " (polysemantic)"));
        });
    }
    if (*tax) {
        return guarded([&] {
            Manifest manifest("rate-tax", out_dir);
            const auto pmf = tax_src.load_pmf_only(manifest);
            manifest.config = {{"pmf", io::pmf_to_json(pmf)}, {"m", tax_m}, {"k", tax_k}};
            const auto report = combinat::rate_tax(pmf, tax_m, tax_k);
            manifest.write("rate_tax.json", io::rate_tax_json(report).dump(2) + "\n");
            manifest.finish();
            say(std::string("assumptions ") + (report.assumptions_hold() ? "hold" : "do not hold") +
                (report.bound ? ", bound=" + io::format_double(*report.bound) : std::string()));
        });
    }
    if (*pred) {
        return guarded([&] {
            Manifest manifest("predicates", out_dir);
            const auto pmf = pred_src.load_pmf_only(manifest);
            manifest.config = {{"pmf", io::pmf_to_json(pmf)}, {"K", pred_k}};
            const auto rows = combinat::three_concept_predicates(pmf, pred_k);
            manifest.write("predicates.json", io::predicates_json(rows).dump(2) + "\n");
            manifest.finish();
            const auto holds = std::count_if(rows.begin(), rows.end(),
                                             [](const auto& r) { return r.verdict == combinat::Verdict::holds; });
            say(std::to_string(rows.size()) + " inequalities, " + std::to_string(holds) + " hold");
        });
    }
    if (*aud) {
        return guarded([&] {
            Manifest manifest("audit", out_dir);
            manifest.input(aud_in);
            const auto table = io::parse_audit_csv(io::read_file(aud_in));
            std::map<std::string, int> orientation;
            if (!aud_orient.empty()) {
                manifest.input(aud_orient);
                orientation = io::parse_orientation(io::load_structured(aud_orient));
            }
            std::vector<std::string> proxies = table.proxies;
            if (!aud_proxies.empty()) {
                proxies = io::split_csv_line(aud_proxies);
                for (const auto& p : proxies) {
                    if (!is_one_of(p, table.proxies)) throw ValidationError("--proxies: no column named '" + p + "'");
                }
            }
            Json orient = Json::object();
            for (const auto& [k, v] : orientation) orient[k] = v;
            manifest.config = {{"in", aud_in}, {"proxies", proxies}, {"orientation", orient}};
            const auto report = audit::audit_report(table.records, proxies, orientation);
            manifest.write("audit_report.json", io::audit_json(report).dump(2) + "\n");
            manifest.write("dominated_pairs.csv", io::pairs_csv(table.records, audit::dominated_pairs(table.records)));
            manifest.finish();
            for (const auto& s : report.ranking) {
                say(s.proxy + ": V=" + (s.violation ? io::format_double(*s.violation) : "undefined") +
                    " rho=" + (s.rho ? io::format_double(*s.rho) : "undefined"));
            }
        });
    }
    if (*repro) {
        return guarded([&] {
            Manifest manifest("repro " + repro_target, out_dir);
            manifest.config["preset"] = repro_target;
            if (repro_target == "fig3") {
                const auto setup = fig3_dgp();
                const auto base = fig3_train();
                manifest.config["dgp"] = setup.config;
                manifest.config["train"] = io::train_config_json(base);
                manifest.config["seeds"] = kFig3Seeds;
                manifest.seed = kFig3BaseSeed;
                manifest.write("pmf.toml", io::pmf_to_text(setup.pmf));
                manifest.write("basis.csv", io::basis_csv(setup.basis));
                write_fig3_outputs(manifest, setup, base);
            } else {
                const auto grid = fig4_grid();
                manifest.config["dgp"] = fig4_dgp().config;
                manifest.config["ks"] = grid.ks;
                manifest.config["lambdas"] = grid.lambdas;
                manifest.config["seeds"] = grid.seeds;
                manifest.config["train"] = io::train_config_json(grid.base);
                manifest.seed = grid.base_seed;
                manifest.write("pmf.toml", io::pmf_to_text(grid.pmf));
                manifest.write("basis.csv", io::basis_csv(grid.basis));
                const auto points = frontier::run_sweep(grid);
                manifest.write("sweep.csv", io::sweep_csv(points));
                analyze_sweep(points, {}, manifest);
                say(std::to_string(points.size()) + " cells written to " + out_dir);
            }
            manifest.finish();
        });
    }
    return kValidation;
}

}  // namespace rdp::cli
