#pragma once
#include <pdcd/pdcd.hpp>
#include <CLI11.hpp>
#include <json.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

/*
 * Command-line front end: `run`, `compare` and `validate-steps`.
 * Configuration is a JSON document (see configs/ and the README); command
 * line flags override config fields, and PDCD_SEED overrides solver.seed
 * from the config (an explicit --seed still wins).
 */
namespace pdcd::cli {

using json = nlohmann::json;

enum ExitCode : int
{
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_diverged = 3,
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

// -----------------------------------------------------------------------
// JSON field access with field-naming errors
// -----------------------------------------------------------------------

namespace detail {

inline const json* find(const json& obj, const std::string& key)
{
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& obj, const std::string& section, const std::string& key, std::optional<double> dflt = {})
{
    const json* v = find(obj, key);
    if (!v) {
        if (dflt) return *dflt;
        throw ConfigError(section + "." + key + ": required field is missing");
    }
    if (!v->is_number()) throw ConfigError(section + "." + key + ": expected a number");
    return v->get<double>();
}

inline std::uint64_t count(const json& obj, const std::string& section, const std::string& key,
    std::optional<std::uint64_t> dflt = {})
{
    const json* v = find(obj, key);
    if (!v) {
        if (dflt) return *dflt;
        throw ConfigError(section + "." + key + ": required field is missing");
    }
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<long long>() >= 0) return static_cast<std::uint64_t>(v->get<long long>());
    throw ConfigError(section + "." + key + ": expected a non-negative integer");
}

inline std::string text(const json& obj, const std::string& section, const std::string& key,
    std::optional<std::string> dflt = {})
{
    const json* v = find(obj, key);
    if (!v) {
        if (dflt) return *dflt;
        throw ConfigError(section + "." + key + ": required field is missing");
    }
    if (!v->is_string()) throw ConfigError(section + "." + key + ": expected a string");
    return v->get<std::string>();
}

inline bool flag(const json& obj, const std::string& section, const std::string& key, bool dflt)
{
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_boolean()) throw ConfigError(section + "." + key + ": expected true or false");
    return v->get<bool>();
}

/* a number (broadcast to `size` entries) or an array of `size` numbers */
inline std::optional<Vector> weights(const json& obj, const std::string& section, const std::string& key, Index size)
{
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    const std::string name = section + "." + key;
    if (v->is_number()) return Vector::Constant(size, v->get<double>());
    if (!v->is_array()) throw ConfigError(name + ": expected a number or an array of numbers");
    if (static_cast<Index>(v->size()) != size) {
        throw ConfigError(name + ": expected " + std::to_string(size) + " entries, got " + std::to_string(v->size()));
    }
    Vector out(size);
    for (Index k = 0; k < size; ++k) {
        if (!(*v)[k].is_number()) throw ConfigError(name + ": entries must be numbers");
        out[k] = (*v)[k].get<double>();
    }
    return out;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base / path).string();
}

inline Vector load_vector(const std::string& path)
{
    try {
        return read_csv_vector(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

inline Matrix load_matrix(const std::string& path)
{
    try {
        return read_csv_matrix(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

inline void require_file(const std::string& field, const std::string& path)
{
    if (!std::filesystem::exists(path)) throw ConfigError(field + ": file '" + path + "' does not exist");
}

/* A and b from problem.data {A, b} (CSV) or problem.synth (regression generator) */
inline RegressionData regression_data(const json& pj, const std::filesystem::path& base, bool volume,
    const VolumeDims& dims)
{
    if (const json* d = find(pj, "data")) {
        const std::string a = resolve(base, text(*d, "problem.data", "A"));
        const std::string b = resolve(base, text(*d, "problem.data", "b"));
        require_file("problem.data.A", a);
        require_file("problem.data.b", b);
        RegressionData out;
        out.A = load_matrix(a);
        out.b = load_vector(b);
        if (out.A.rows() != out.b.size()) throw ConfigError("problem.data: A and b have different row counts");
        return out;
    }
    const json* s = find(pj, "synth");
    if (!s) throw ConfigError("problem.data: missing (give either problem.data or problem.synth)");
    const std::string sec = "problem.synth";
    const auto seed = count(*s, sec, "seed", 0);
    const auto m = static_cast<Index>(count(*s, sec, "m"));
    const double noise = number(*s, sec, "noise", 0.0);
    if (volume) return synth_tv_volume(seed, dims, m, noise);
    const auto n = static_cast<Index>(count(*s, sec, "n"));
    return synth_regression(seed, m, n, number(*s, sec, "sparsity", 0.1), noise);
}

} // namespace detail

/* builds the problem described by the "problem" section */
inline ProblemSpec build_problem(const json& pj, const std::filesystem::path& base = ".")
{
    using namespace detail;
    if (!pj.is_object()) throw ConfigError("problem: section is missing");
    const std::string kind = text(pj, "problem", "kind");
    try {
        if (kind == "toy_counterexample") return build_toy_counterexample();
        if (kind == "lasso") {
            const RegressionData d = regression_data(pj, base, false, {});
            return build_lasso(d.A, d.b, number(pj, "problem", "alpha"));
        }
        if (kind == "tv_l1") {
            const json* vol = find(pj, "volume");
            if (!vol || !vol->is_array() || vol->size() != 3) {
                throw ConfigError("problem.volume: expected [dx, dy, dz]");
            }
            VolumeDims dims{};
            for (int a = 0; a < 3; ++a) {
                if (!(*vol)[a].is_number_integer() || (*vol)[a].get<long long>() < 1) {
                    throw ConfigError("problem.volume: dimensions must be positive integers");
                }
                dims[a] = (*vol)[a].get<Index>();
            }
            const RegressionData d = regression_data(pj, base, true, dims);
            return build_tv_l1(d.A, d.b, number(pj, "problem", "alpha"), number(pj, "problem", "r"), dims);
        }
        if (kind == "svm_dual") {
            SparseMatrix A;
            Vector labels;
            if (const json* d = find(pj, "data")) {
                const std::string path = resolve(base, text(*d, "problem.data", "libsvm"));
                require_file("problem.data.libsvm", path);
                LibsvmData ls;
                try {
                    ls = read_libsvm(path);
                } catch (const IoError& e) {
                    throw ConfigError(e.what());
                }
                A = ls.X.transpose();
                labels = ls.labels;
            } else if (const json* s = find(pj, "synth")) {
                const std::string sec = "problem.synth";
                ClassificationData cd = synth_svm(count(*s, sec, "seed", 0), static_cast<Index>(count(*s, sec, "samples")),
                    static_cast<Index>(count(*s, sec, "features")), number(*s, sec, "separation", 2.5));
                A = std::move(cd.A);
                labels = std::move(cd.labels);
            } else {
                throw ConfigError("problem.data: missing (give either problem.data or problem.synth)");
            }
            const double nsamp = static_cast<double>(labels.size());
            const double lambda = number(pj, "problem", "lambda", 1.0 / nsamp);
            Vector C;
            if (flag(pj, "problem", "class_weighted", false)) {
                C = svm_class_weights(labels, number(pj, "problem", "C_max", 1.0 / nsamp));
            } else {
                C = Vector::Constant(labels.size(), number(pj, "problem", "C", 1.0 / nsamp));
            }
            return build_svm_dual(A, labels, C, lambda);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
    throw ConfigError("problem.kind: unknown kind '" + kind + "' (expected tv_l1, svm_dual, lasso or toy_counterexample)");
}

// -----------------------------------------------------------------------
// Solver and output sections
// -----------------------------------------------------------------------

struct OutputSettings
{
    std::optional<std::string> trace;
    std::optional<std::string> solution;
    std::string format = "csv";
    bool wall_time = false;
};

struct RunSettings
{
    ProblemSpec problem;
    SolverConfig solver;
    std::uint64_t max_epochs = 100;
    OutputSettings output;
};

inline Variant variant_field(const json& sj)
{
    const std::string v = detail::text(sj, "solver", "variant", "cd_primal_dual");
    const auto parsed = parse_variant(v);
    if (!parsed) throw ConfigError("solver.variant: unknown variant '" + v + "'");
    return *parsed;
}

/* steps for `variant` honouring solver.tau / solver.sigma / solver.safety */
inline StepSizes steps_for(const ProblemSpec& problem, const json& sj, Variant variant)
{
    using namespace detail;
    StepSizeOptions opts;
    opts.safety = number(sj, "solver", "safety", 0.95);
    opts.experimental = flag(sj, "solver", "experimental", false);
    if (auto s = weights(sj, "solver", "sigma", problem.p())) {
        try {
            opts.sigma = WeightVector(std::move(*s));
        } catch (const Error& e) {
            throw ConfigError(std::string("solver.sigma: ") + e.what());
        }
    }
    try {
        if (auto t = weights(sj, "solver", "tau", problem.n())) {
            const WeightVector beta = variant == Variant::full_vu_condat
                ? WeightVector::constant(problem.n(), problem.f->global_lipschitz())
                : problem.beta();
            WeightVector sigma = opts.sigma ? *opts.sigma : default_sigma(*problem.M, beta);
            StepSizes st{WeightVector(std::move(*t)), std::move(sigma), opts.safety};
            st.tau.require_positive("tau");
            return st;
        }
        return default_stepsizes(problem, variant, opts);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
}

inline OutputSettings output_settings(const json& oj)
{
    using namespace detail;
    OutputSettings o;
    if (find(oj, "trace")) o.trace = text(oj, "output", "trace");
    if (find(oj, "solution")) o.solution = text(oj, "output", "solution");
    o.format = text(oj, "output", "format", "csv");
    if (o.format != "csv" && o.format != "json") throw ConfigError("output.format: expected csv or json");
    o.wall_time = flag(oj, "output", "wall_time", false);
    return o;
}

inline json section(const json& cfg, const char* name)
{
    auto it = cfg.find(name);
    if (it == cfg.end() || it->is_null()) return json::object();
    if (!it->is_object()) throw ConfigError(std::string(name) + ": expected an object");
    return *it;
}

inline RunSettings interpret(const json& cfg, const std::filesystem::path& base)
{
    using namespace detail;
    RunSettings rs;
    rs.problem = build_problem(section(cfg, "problem"), base);
    const json sj = section(cfg, "solver");
    SolverConfig& sc = rs.solver;
    sc.variant = variant_field(sj);
    sc.seed = count(sj, "solver", "seed", 0);
    rs.max_epochs = count(sj, "solver", "max_epochs", 100);
    if (rs.max_epochs < 1) throw ConfigError("solver.max_epochs: must be >= 1");
    sc.max_iterations = rs.max_epochs * epoch_length(rs.problem, sc.variant);
    sc.checkpoint_every = count(sj, "solver", "checkpoint_every", 0);
    sc.stop_tolerance = number(sj, "solver", "stop_tolerance", 0.0);
    if (sc.stop_tolerance < 0.0) throw ConfigError("solver.stop_tolerance: must be >= 0");
    sc.resync_every = count(sj, "solver", "resync_every", 10000);
    sc.steps = steps_for(rs.problem, sj, sc.variant);
    if (sc.variant == Variant::cd_pd_mj1 && !rs.problem.M->all_multiplicities_one()) {
        throw ConfigError("solver.variant: cd_pd_mj1 requires every dual row to couple a single primal block");
    }
    if (sc.variant == Variant::cd_forward_backward && !rs.problem.h->is_zero()) {
        throw ConfigError("solver.variant: cd_forward_backward requires h = 0");
    }
    rs.output = output_settings(section(cfg, "output"));
    sc.record_wall_time = rs.output.wall_time;
    return rs;
}

// -----------------------------------------------------------------------
// Entry point
// -----------------------------------------------------------------------

struct Overrides
{
    std::string config;
    std::string problem_kind;
    std::string variant;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> max_epochs;
    std::optional<std::uint64_t> checkpoint_every;
    std::optional<double> stop_tolerance;
    std::optional<double> safety;
    std::string trace, solution, format;
    std::string variants; // compare
    std::string output;   // compare
};

inline json load_config(const Overrides& ov, std::filesystem::path& base)
{
    json cfg = json::object();
    base = ".";
    if (!ov.config.empty()) {
        std::ifstream in(ov.config);
        if (!in) throw ConfigError("config: cannot read '" + ov.config + "'");
        try {
            cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config: invalid JSON in '" + ov.config + "': " + e.what());
        }
        if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
        base = std::filesystem::path(ov.config).parent_path();
        if (base.empty()) base = ".";
    }
    for (const char* s : {"problem", "solver", "output"}) {
        if (!cfg.contains(s) || cfg[s].is_null()) cfg[s] = json::object();
        else if (!cfg[s].is_object()) throw ConfigError(std::string(s) + ": expected an object");
    }
    if (!ov.problem_kind.empty()) cfg["problem"]["kind"] = ov.problem_kind;
    if (ov.config.empty() && ov.problem_kind.empty()) {
        throw ConfigError("config: no --config file and no --problem given");
    }
    if (const char* env = std::getenv("PDCD_SEED"); env && *env) {
        std::uint64_t s = 0;
        const std::string_view sv(env);
        const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), s);
        if (res.ec != std::errc() || res.ptr != sv.data() + sv.size()) {
            throw ConfigError("PDCD_SEED: expected a non-negative integer, got '" + std::string(env) + "'");
        }
        cfg["solver"]["seed"] = s;
    }
    if (!ov.variant.empty()) cfg["solver"]["variant"] = ov.variant;
    if (ov.seed) cfg["solver"]["seed"] = *ov.seed;
    if (ov.max_epochs) cfg["solver"]["max_epochs"] = *ov.max_epochs;
    if (ov.checkpoint_every) cfg["solver"]["checkpoint_every"] = *ov.checkpoint_every;
    if (ov.stop_tolerance) cfg["solver"]["stop_tolerance"] = *ov.stop_tolerance;
    if (ov.safety) cfg["solver"]["safety"] = *ov.safety;
    if (!ov.trace.empty()) cfg["output"]["trace"] = ov.trace;
    if (!ov.solution.empty()) cfg["output"]["solution"] = ov.solution;
    if (!ov.format.empty()) cfg["output"]["format"] = ov.format;
    return cfg;
}

inline std::string summary_line(const RunResult& r, const ProblemSpec& problem, Variant v, double seconds)
{
    std::ostringstream s;
    s << std::setprecision(10) << "status=" << to_string(r.status) << " variant=" << to_string(v);
    if (!r.trace.empty()) {
        const Checkpoint& c = r.trace.back();
        s << " objective=" << c.objective << " residual=" << c.residual;
        if (c.duality_gap) s << " duality_gap=" << *c.duality_gap;
    } else {
        s << " objective=" << problem.objective(r.x);
    }
    s << " epochs=" << r.iterations / epoch_length(problem, v) << " iterations=" << r.iterations
      << " wall_time=" << std::setprecision(4) << seconds << "s";
    return s.str();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline int cmd_run(const Overrides& ov, std::ostream& out)
{
    std::filesystem::path base;
    const json cfg = load_config(ov, base);
    RunSettings rs = interpret(cfg, base);
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run(rs.problem, rs.solver);
    const double secs = seconds_since(t0);
    if (rs.output.trace) write_trace(*rs.output.trace, r.trace, rs.output.format);
    if (rs.output.solution) write_solution(*rs.output.solution, r.x, r.z, rs.output.format);
    out << summary_line(r, rs.problem, rs.solver.variant, secs) << '\n';
    return r.status == RunStatus::diverged ? exit_diverged : exit_ok;
}

inline std::vector<Variant> parse_variant_list(const std::string& csv, const json& sj)
{
    std::vector<std::string> names;
    if (!csv.empty()) {
        std::stringstream ss(csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) names.push_back(item);
        }
    } else if (const json* v = detail::find(sj, "variants")) {
        if (!v->is_array()) throw ConfigError("solver.variants: expected an array of variant names");
        for (const auto& e : *v) {
            if (!e.is_string()) throw ConfigError("solver.variants: entries must be strings");
            names.push_back(e.get<std::string>());
        }
    }
    std::vector<Variant> out;
    for (const auto& n : names) {
        const auto v = parse_variant(n);
        if (!v) throw ConfigError("variants: unknown variant '" + n + "'");
        out.push_back(*v);
    }
    if (out.size() < 2) throw ConfigError("variants: compare needs at least two solver variants");
    return out;
}

inline constexpr const char* compare_csv_header = "variant,epoch,objective,residual,wall_time";

inline int cmd_compare(const Overrides& ov, std::ostream& out, std::ostream& err)
{
    std::filesystem::path base;
    json cfg = load_config(ov, base);
    const std::vector<Variant> variants = parse_variant_list(ov.variants, cfg["solver"]);
    cfg["output"]["wall_time"] = true;

    std::ostringstream csv;
    csv << std::setprecision(17) << compare_csv_header << '\n';
    bool diverged = false;
    std::optional<ProblemSpec> problem;
    for (Variant v : variants) {
        json c = cfg;
        c["solver"]["variant"] = std::string(to_string(v));
        RunSettings rs = interpret(c, base);
        const auto t0 = std::chrono::steady_clock::now();
        const RunResult r = run(rs.problem, rs.solver);
        const double secs = seconds_since(t0);
        for (const auto& cp : r.trace.checkpoints()) {
            csv << to_string(v) << ',' << cp.epoch << ',' << cp.objective << ',' << cp.residual << ','
                << cp.wall_time.value_or(0.0) << '\n';
        }
        (ov.output.empty() ? err : out) << summary_line(r, rs.problem, v, secs) << '\n';
        diverged = diverged || r.status == RunStatus::diverged;
    }
    if (ov.output.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(ov.output);
        if (!f) throw IoError("cannot open '" + ov.output + "' for writing");
        f << csv.str();
    }
    return diverged ? exit_diverged : exit_ok;
}

inline int cmd_validate_steps(const Overrides& ov, std::ostream& out)
{
    std::filesystem::path base;
    const json cfg = load_config(ov, base);
    const RunSettings rs = interpret(cfg, base);
    const ProblemSpec& p = rs.problem;
    const StepSizes& st = rs.solver.steps;
    const bool full = rs.solver.variant == Variant::full_vu_condat;
    const WeightVector beta = full ? WeightVector::constant(p.n(), p.f->global_lipschitz()) : p.beta();
    const WeightVector m = p.M->multiplicities();

    out << std::setprecision(10) << "# variant " << to_string(rs.solver.variant) << ", n = " << p.n()
        << ", p = " << p.p() << (full ? ", beta = global Lipschitz constant" : "") << '\n';
    out << "block,beta,rho,tau_max,tau,ratio\n";
    double worst = 0.0;
    for (Index i = 0; i < p.n(); ++i) {
        const double rho = coordinate_spectral_term(*p.M, st.sigma, m, i);
        const double denom = beta[i] + rho;
        const double ratio = st.tau[i] * denom;
        worst = std::max(worst, ratio);
        out << i << ',' << beta[i] << ',' << rho << ',' << (denom > 0 ? 1.0 / denom : infinity) << ',' << st.tau[i]
            << ',' << ratio << '\n';
    }
    const bool ok = worst < 1.0;
    out << "max tau_i (beta_i + rho_i) = " << worst << (ok ? " < 1: step-size condition holds" : " >= 1: VIOLATED")
        << '\n';
    return ok ? exit_ok : exit_config;
}

/* runs the CLI on `args` (args[0] is the program name) */
inline int main_entry(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Randomized coordinate-descent primal-dual solver for f(x) + g(x) + h(Mx)", "pdcd"};
    app.require_subcommand(1);
    Overrides ov;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("-c,--config", ov.config, "JSON configuration file");
        sc->add_option("--problem", ov.problem_kind, "problem kind (overrides problem.kind)");
        sc->add_option("--variant", ov.variant, "solver variant (overrides solver.variant)");
        sc->add_option("--seed", ov.seed, "random seed (overrides solver.seed and PDCD_SEED)");
        sc->add_option("--max-epochs", ov.max_epochs, "epoch budget");
        sc->add_option("--checkpoint-every", ov.checkpoint_every, "iterations between checkpoints (0 = one epoch)");
        sc->add_option("--stop-tolerance", ov.stop_tolerance, "stop when the saddle residual is at most this");
        sc->add_option("--safety", ov.safety, "step-size safety factor in (0, 1)");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "solve one problem with one variant");
    add_common(run_cmd);
    run_cmd->add_option("--trace", ov.trace, "trace output path");
    run_cmd->add_option("--solution", ov.solution, "solution output path");
    run_cmd->add_option("--format", ov.format, "output format: csv or json");

    CLI::App* cmp_cmd = app.add_subcommand("compare", "run several variants on the same problem");
    add_common(cmp_cmd);
    cmp_cmd->add_option("--variants", ov.variants, "comma-separated variant names (at least two)");
    cmp_cmd->add_option("-o,--output", ov.output, "long-format CSV output path (default: stdout)");

    CLI::App* val_cmd = app.add_subcommand("validate-steps", "report the per-block step-size condition");
    add_common(val_cmd);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(ov, out);
        if (cmp_cmd->parsed()) return cmd_compare(ov, out, err);
        return cmd_validate_steps(ov, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace pdcd::cli
