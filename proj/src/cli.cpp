#include "otrom/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "otrom/interpolation.hpp"
#include "otrom/io.hpp"
#include "otrom/parallel.hpp"
#include "otrom/pod.hpp"

namespace otrom::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

/// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) invalid(where_ + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) invalid(path(key) + " must be a finite number");
        return v.get<double>();
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) invalid(path(key) + " must be a nonnegative integer");
        return v.get<std::size_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) invalid(path(key) + " must be true or false");
        return j_.at(key).get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback, std::initializer_list<const char*> allowed) {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) invalid(path(key) + " must be a string");
        const auto s = j_.at(key).get<std::string>();
        if (allowed.size() > 0 &&
            std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return s == a; })) {
            std::string opts;
            for (const char* a : allowed) opts += (opts.empty() ? "" : "|") + std::string(a);
            invalid(path(key) + " must be one of " + opts);
        }
        return s;
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) invalid("unknown key " + path(k));
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void parse_fom(const json& j, RunConfig& cfg) {
    Section s(j, "fom");
    auto& f = cfg.fom;
    f.nx = s.count("nx", f.nx);
    f.nz = s.count("nz", f.nz);
    f.hx = s.number("hx", f.hx);
    f.hz = s.number("hz", f.hz);
    f.x0 = s.number("x0", f.x0);
    f.z0 = s.number("z0", f.z0);
    f.nu = s.number("nu", f.nu);
    f.dt = s.number("dt", f.dt);
    f.t_final = s.number("t_final", f.t_final);
    f.save_stride = s.count("save_stride", f.save_stride);
    f.boundary = s.text("boundary", "periodic", {"periodic", "outflow"}) == "periodic" ? fomgen::Boundary::Periodic
                                                                                      : fomgen::Boundary::Outflow;
    cfg.ref_refinement = s.count("ref_refinement", cfg.ref_refinement);
    cfg.ref_save_division = s.count("ref_save_division", cfg.ref_save_division);
    if (s.has("velocity")) {
        Section v(s.raw("velocity"), "fom.velocity");
        const auto kind = v.text("kind", "constant", {"constant", "rotation"});
        f.velocity.kind = kind == "constant" ? fomgen::VelocityKind::Constant : fomgen::VelocityKind::Rotation;
        f.velocity.vx = v.number("vx", 0.0);
        f.velocity.vz = v.number("vz", 0.0);
        f.velocity.omega = v.number("omega", 0.0);
        f.velocity.center_x = v.number("center_x", 0.0);
        f.velocity.center_z = v.number("center_z", 0.0);
        v.finish();
    }
    if (s.has("blob")) {
        Section b(s.raw("blob"), "fom.blob");
        f.blob.center_x = b.number("center_x", f.blob.center_x);
        f.blob.center_z = b.number("center_z", f.blob.center_z);
        f.blob.sigma = b.number("sigma", f.blob.sigma);
        f.blob.amplitude = b.number("amplitude", f.blob.amplitude);
        b.finish();
    }
    s.finish();
}

void parse_rom(const json& j, RomSection& r) {
    Section s(j, "rom");
    r.n_checkpoints = s.count("n_checkpoints", r.n_checkpoints);
    if (s.has("n_total_synthetic")) r.n_total_synthetic = s.count("n_total_synthetic", 0);
    if (s.has("epsilon")) r.epsilon = s.number("epsilon", 0.0);
    r.epsilon_relative = s.number("epsilon_relative", r.epsilon_relative);
    r.marginal_tol = s.number("marginal_tol", r.marginal_tol);
    r.max_iters = static_cast<int>(s.count("max_iters", static_cast<std::size_t>(r.max_iters)));
    r.mapping = s.text("mapping", "linear", {"linear", "minl2"}) == "linear" ? rom::MappingKind::Linear
                                                                             : rom::MappingKind::MinL2;
    r.regression = s.text("regression", "gpr", {"gpr", "piecewise_linear"}) == "gpr"
                       ? rom::RegressionKind::Gpr
                       : rom::RegressionKind::PiecewiseLinear;
    r.correction = s.boolean("correction", r.correction);
    r.pod_threshold = s.number("pod_threshold", r.pod_threshold);
    r.sign_strategy = s.text("sign_strategy", "split", {"split", "nonnegative"}) == "split"
                          ? measure::SignStrategy::Split
                          : measure::SignStrategy::Nonnegative;
    s.finish();
}

void parse_eval(const json& j, EvalSection& e) {
    Section s(j, "eval");
    if (s.has("test_time_offsets")) {
        const auto& v = s.raw("test_time_offsets");
        if (!v.is_array()) invalid("eval.test_time_offsets must be an array");
        e.test_time_offsets.clear();
        for (const auto& x : v) {
            if (!x.is_number()) invalid("eval.test_time_offsets entries must be numbers");
            e.test_time_offsets.push_back(x.get<double>());
        }
    }
    if (s.has("sweep_checkpoints")) {
        const auto& v = s.raw("sweep_checkpoints");
        if (!v.is_array()) invalid("eval.sweep_checkpoints must be an array");
        e.sweep_checkpoints.clear();
        for (const auto& x : v) {
            if (!x.is_number_integer() || x.get<long long>() < 2) {
                invalid("eval.sweep_checkpoints entries must be integers >= 2");
            }
            e.sweep_checkpoints.push_back(x.get<std::size_t>());
        }
    }
    s.finish();
}

void validate(const RunConfig& cfg) {
    try {
        cfg.fom.validate();
    } catch (const Error& e) {
        invalid("fom: " + std::string(e.what()));
    }
    if (cfg.ref_refinement == 0 || cfg.ref_save_division == 0) {
        invalid("fom.ref_refinement and fom.ref_save_division must be at least 1");
    }
    if ((cfg.fom.save_stride * cfg.ref_refinement) % cfg.ref_save_division != 0) {
        invalid("fom.save_stride * fom.ref_refinement must be divisible by fom.ref_save_division");
    }
    const auto& r = cfg.rom;
    if (r.n_checkpoints < 2) invalid("rom.n_checkpoints must be at least 2");
    if (r.epsilon && !(*r.epsilon > 0.0)) invalid("rom.epsilon must be positive");
    if (!(r.epsilon_relative > 0.0)) invalid("rom.epsilon_relative must be positive");
    if (!(r.marginal_tol > 0.0)) invalid("rom.marginal_tol must be positive");
    if (r.max_iters < 1) invalid("rom.max_iters must be at least 1");
    if (!(r.pod_threshold > 0.0 && r.pod_threshold <= 1.0)) invalid("rom.pod_threshold must lie in (0, 1]");
    for (double off : cfg.eval.test_time_offsets) {
        if (!(off > 0.0 && off < 1.0)) invalid("eval.test_time_offsets must lie in (0, 1)");
        const double scaled = off * static_cast<double>(cfg.ref_save_division);
        if (std::abs(scaled - std::nearbyint(scaled)) > 1e-9) {
            invalid("eval.test_time_offsets must be multiples of 1 / fom.ref_save_division");
        }
    }
}

std::string g17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

fs::path train_path(const RunConfig& cfg) { return cfg.work_dir / "train.otrm"; }
fs::path reference_path(const RunConfig& cfg) { return cfg.work_dir / "reference.otrm"; }
fs::path model_path(const RunConfig& cfg) { return cfg.work_dir / "model"; }

measure::Trajectory load_artifact(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifact, "missing " + path.string() + " (run generate first)");
    return io::load_trajectory(path);
}

std::vector<double> times_of(const measure::Trajectory& t) {
    std::vector<double> out;
    for (const auto& s : t.snapshots()) out.push_back(s.time);
    return out;
}

struct EvalResult {
    rom::ErrorReport interp;
    rom::ErrorReport gen;
    std::optional<rom::ErrorReport> interp_corrected;
    std::optional<rom::ErrorReport> gen_corrected;
};

EvalResult evaluate_model(const rom::RomModel& model, const measure::Trajectory& train,
                          const measure::Trajectory& reference, std::span<const double> tests) {
    const auto plain = [&](double t) { return rom::infer(model, t).values; };
    const auto train_times = times_of(train);
    EvalResult r{rom::error_metrics(rom::ErrorKind::Interp, train, plain, train_times),
                 rom::error_metrics(rom::ErrorKind::Gen, reference, plain, tests), std::nullopt, std::nullopt};
    if (model.corrector()) {
        const auto corrected = [&](double t) { return rom::infer_corrected(model, t).values; };
        r.interp_corrected = rom::error_metrics(rom::ErrorKind::Interp, train, corrected, train_times);
        r.gen_corrected = rom::error_metrics(rom::ErrorKind::Gen, reference, corrected, tests);
    }
    return r;
}

}  // namespace

fomgen::FomConfig RunConfig::reference_fom() const {
    auto f = fom;
    f.dt = fom.dt / static_cast<double>(ref_refinement);
    f.save_stride = fom.save_stride * ref_refinement / ref_save_division;
    return f;
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        invalid(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section top(j, "config");
    if (top.has("fom")) parse_fom(top.raw("fom"), cfg);
    if (top.has("rom")) parse_rom(top.raw("rom"), cfg.rom);
    if (top.has("eval")) parse_eval(top.raw("eval"), cfg.eval);
    if (top.has("paths")) {
        Section p(top.raw("paths"), "paths");
        cfg.work_dir = p.text("work_dir", cfg.work_dir.string(), {});
        p.finish();
    }
    top.finish();
    validate(cfg);
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) invalid("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid: return 2;
        case ErrorCode::MissingArtifact:
        case ErrorCode::Io:
        case ErrorCode::BadMagic:
        case ErrorCode::VersionMismatch:
        case ErrorCode::TruncatedFile: return 3;
        default: return 4;
    }
}

rom::TrainOptions train_options(const RunConfig& cfg, std::size_t n_checkpoints, std::size_t n_training_snapshots) {
    rom::TrainOptions o;
    o.n_checkpoints = n_checkpoints;
    const std::size_t n_total = cfg.rom.n_total_synthetic.value_or(n_training_snapshots);
    o.n_synth = rom::n_synth_for_total(n_total, n_checkpoints);
    o.interp.epsilon = cfg.rom.epsilon;
    o.interp.epsilon_relative = cfg.rom.epsilon_relative;
    o.interp.sinkhorn.marginal_tol = cfg.rom.marginal_tol;
    o.interp.sinkhorn.max_iters = cfg.rom.max_iters;
    o.interp.sign_strategy = cfg.rom.sign_strategy;
    o.interp.threads = default_thread_count();
    o.mapping = cfg.rom.mapping;
    o.regression = cfg.rom.regression;
    o.correction = cfg.rom.correction;
    o.pod_threshold = cfg.rom.pod_threshold;
    return o;
}

std::vector<double> test_times(const RunConfig& cfg, const measure::Trajectory& train) {
    std::vector<double> out;
    const double t_f = train.t_final();
    for (std::size_t k = 0; k < train.size(); ++k)
        for (double off : cfg.eval.test_time_offsets) {
            const double t = (static_cast<double>(k) + off) * train.dt();
            if (t <= t_f * (1.0 + 1e-12)) out.push_back(t);
        }
    std::sort(out.begin(), out.end());
    return out;
}

void cmd_generate(const RunConfig& cfg) {
    ensure_dir(cfg.work_dir);
    const auto train = fomgen::simulate(cfg.fom);
    const auto reference = fomgen::simulate(cfg.reference_fom());
    io::save_trajectory(train, train_path(cfg));
    io::save_trajectory(reference, reference_path(cfg));
    std::cout << "wrote " << train_path(cfg).string() << " (" << train.size() << " snapshots) and "
              << reference_path(cfg).string() << " (" << reference.size() << " snapshots)\n";
}

void cmd_train(const RunConfig& cfg) {
    const auto train = load_artifact(train_path(cfg));
    rom::TrainTimings tm;
    const auto model = rom::train(train, train_options(cfg, cfg.rom.n_checkpoints, train.size()), &tm);
    io::save_model(model, model_path(cfg));

    const double total = std::max(tm.total(), 1e-300);
    auto line = [&](const char* name, double s) {
        std::cerr << "timing " << name << " " << std::fixed << std::setprecision(3) << s << " s "
                  << std::setprecision(1) << 100.0 * s / total << "%\n";
    };
    line("checkpoints", tm.checkpoints);
    line("transport", tm.transport);
    line("mapping", tm.mapping);
    line("correction", tm.correction);
    std::cerr.unsetf(std::ios::floatfield);
    std::cout << "wrote " << model_path(cfg).string() << " (" << model.interpolation().n_checkpoints()
              << " checkpoints, max marginal violation " << model.interpolation().max_marginal_violation() << ")\n";
}

void cmd_infer(const RunConfig& cfg, double t, const std::optional<fs::path>& output) {
    if (!fs::exists(model_path(cfg) / "manifest.json")) {
        throw Error(ErrorCode::MissingArtifact, "missing " + model_path(cfg).string() + " (run train first)");
    }
    const auto model = io::load_model(model_path(cfg));
    const auto s = model.corrector() ? rom::infer_corrected(model, t) : rom::infer(model, t);
    const auto& g = model.grid();
    std::string text = "x,z,value\n";
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto p = g.cell_center(l);
        text += g17(p.x) + "," + g17(p.z) + "," + g17(s.values[static_cast<Eigen::Index>(l)]) + "\n";
    }
    const fs::path out = output.value_or(cfg.work_dir / "prediction.csv");
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    write_file(out, text);
    std::cout << "wrote " << out.string() << " (t = " << g17(t) << ", sum = " << g17(s.values.sum()) << ")\n";
}

void cmd_evaluate(const RunConfig& cfg) {
    const auto train = load_artifact(train_path(cfg));
    const auto reference = load_artifact(reference_path(cfg));
    if (!fs::exists(model_path(cfg) / "manifest.json")) {
        throw Error(ErrorCode::MissingArtifact, "missing " + model_path(cfg).string() + " (run train first)");
    }
    const auto model = io::load_model(model_path(cfg));
    const auto tests = test_times(cfg, train);
    const auto train_times = times_of(train);
    const fs::path out = cfg.work_dir / "eval";
    ensure_dir(out);

    std::vector<std::pair<std::string, rom::ErrorReport>> reports;
    reports.emplace_back("disc", rom::error_metrics(
                                     rom::ErrorKind::Disc, reference,
                                     [&](double t) { return train[*train.find_time(t)].values; }, train_times));
    auto r = evaluate_model(model, train, reference, tests);
    reports.emplace_back("interp", r.interp);
    reports.emplace_back("gen", r.gen);
    if (r.interp_corrected) reports.emplace_back("interp_corrected", *r.interp_corrected);
    if (r.gen_corrected) reports.emplace_back("gen_corrected", *r.gen_corrected);

    const auto dict = interp::generate_synthetic_matrix(model.interpolation(), model.metadata().n_synth);
    Eigen::MatrixXd checks(dict.columns.rows(), static_cast<Eigen::Index>(model.interpolation().n_checkpoints()));
    for (std::size_t k = 0; k < model.interpolation().n_checkpoints(); ++k)
        checks.col(static_cast<Eigen::Index>(k)) = model.interpolation().checkpoints()[k].values;
    const pod::EnergyThreshold th{model.metadata().pod_threshold};
    const auto u_synth = pod::compute_pod(dict.columns, th);
    const auto u_check = pod::compute_pod(checks, th);
    for (const auto& [name, basis] : {std::pair<std::string, const pod::PODBasis*>{"proj_synth", &u_synth},
                                      {"proj_check", &u_check}}) {
        std::vector<double> errs;
        for (double t : tests) errs.push_back(pod::projection_error(reference[*reference.find_time(t)].values, *basis));
        reports.emplace_back(name, rom::make_report(rom::ErrorKind::Proj, tests, std::move(errs)));
    }

    std::string summary = "metric,mean,count\n";
    for (const auto& [name, rep] : reports) {
        io::export_error_report_csv(rep, out / ("errors_" + name + ".csv"));
        summary += name + "," + g17(rep.mean) + "," + std::to_string(rep.errors.size()) + "\n";
    }
    write_file(out / "summary.csv", summary);
    std::cout << summary;
}

void cmd_sweep(const RunConfig& cfg, const std::optional<std::vector<std::size_t>>& checkpoints) {
    const auto train = load_artifact(train_path(cfg));
    const auto reference = load_artifact(reference_path(cfg));
    const auto tests = test_times(cfg, train);
    const std::size_t n_total = cfg.rom.n_total_synthetic.value_or(train.size());

    std::vector<std::size_t> list;
    for (auto n : checkpoints.value_or(cfg.eval.sweep_checkpoints)) {
        if (n < 2) invalid("sweep checkpoint counts must be at least 2");
        if (n <= train.size() && n <= n_total) list.push_back(n);
    }
    if (list.empty()) invalid("no sweep checkpoint count fits the training trajectory");

    std::string csv =
        "n_checkpoints,n_synth,n_total,n_columns,mean_interp,mean_gen,mean_interp_corrected,mean_gen_corrected\n";
    for (auto n_c : list) {
        const auto opts = train_options(cfg, n_c, train.size());
        const auto model = rom::train(train, opts);
        const auto r = evaluate_model(model, train, reference, tests);
        const std::size_t n_columns = n_c + opts.n_synth * (n_c - 1);
        csv += std::to_string(n_c) + "," + std::to_string(opts.n_synth) + "," + std::to_string(n_total) + "," +
               std::to_string(n_columns) + "," + g17(r.interp.mean) + "," + g17(r.gen.mean) + "," +
               (r.interp_corrected ? g17(r.interp_corrected->mean) : "") + "," +
               (r.gen_corrected ? g17(r.gen_corrected->mean) : "") + "\n";
        std::cerr << "sweep n_checkpoints=" << n_c << " mean_interp=" << r.interp.mean << "\n";
    }
    ensure_dir(cfg.work_dir);
    write_file(cfg.work_dir / "sweep.csv", csv);
    std::cout << csv;
}

int run(int argc, char** argv) {
    CLI::App app{"Optimal-transport reduced order models for advection-dominated trajectories", "otrom"};
    app.require_subcommand(1);

    std::string config_path;
    std::string work_dir;
    double time = 0.0;
    std::string output;
    std::vector<std::size_t> checkpoints;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--work-dir", work_dir, "Override paths.work_dir");
    };
    auto* gen = app.add_subcommand("generate", "Simulate training and reference trajectories");
    auto* trn = app.add_subcommand("train", "Train and save a ROM");
    auto* inf = app.add_subcommand("infer", "Predict the snapshot at one time");
    auto* evl = app.add_subcommand("evaluate", "Write error CSVs for the saved model");
    auto* swp = app.add_subcommand("sweep", "Mean errors versus checkpoint count");
    for (auto* sub : {gen, trn, inf, evl, swp}) add_common(sub);
    inf->add_option("--time", time, "Query time")->required();
    inf->add_option("--output", output, "Output CSV (default <work_dir>/prediction.csv)");
    swp->add_option("--checkpoints", checkpoints, "Checkpoint counts, comma separated")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto cfg = load_config(config_path);
        if (!work_dir.empty()) cfg.work_dir = work_dir;
        if (gen->parsed()) cmd_generate(cfg);
        if (trn->parsed()) cmd_train(cfg);
        if (inf->parsed()) cmd_infer(cfg, time, output.empty() ? std::nullopt : std::optional<fs::path>(output));
        if (evl->parsed()) cmd_evaluate(cfg);
        if (swp->parsed()) cmd_sweep(cfg, checkpoints.empty() ? std::nullopt : std::optional(checkpoints));
        return 0;
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error\t" << to_string(e.code()) << "\t" << msg << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error\tInternal\t" << e.what() << "\n";
        return 4;
    }
}

}  // namespace otrom::cli
