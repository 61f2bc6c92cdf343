#include "otrom/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "otrom/error.hpp"

namespace otrom::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

using Magic = std::array<char, 4>;
constexpr Magic trajectory_magic{'O', 'T', 'R', 'M'};
constexpr Magic plan_magic{'O', 'T', 'R', 'P'};
constexpr Magic matrix_magic{'O', 'T', 'R', 'X'};
constexpr Magic part_magic{'O', 'T', 'R', 'S'};

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

class Writer {
public:
    explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }

    void magic(const Magic& m) { out_.write(m.data(), 4); }

    template <class T>
    void put(T v) {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <class T>
    void put_all(const T* data, std::size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
        } else {
            for (std::size_t k = 0; k < n; ++k) put(data[k]);
        }
    }

    void close() {
        out_.close();
        if (!out_) throw Error(ErrorCode::Io, "failed writing " + path_.string());
    }

private:
    fs::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw Error(ErrorCode::Io, "cannot open " + path.string());
    }

    void expect(const Magic& m) {
        Magic got{};
        in_.read(got.data(), 4);
        if (in_.gcount() != 4) throw Error(ErrorCode::TruncatedFile, path_.string() + ": missing header");
        if (got != m) throw Error(ErrorCode::BadMagic, path_.string() + ": unexpected file magic");
        const auto v = get<std::uint32_t>();
        if (v != format_version) {
            throw Error(ErrorCode::VersionMismatch, path_.string() + ": format version " + std::to_string(v));
        }
    }

    template <class T>
    T get() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
            throw Error(ErrorCode::TruncatedFile, path_.string() + ": file ends early");
        }
        return to_little(v);
    }

    template <class T>
    void get_all(T* data, std::size_t n) {
        if constexpr (std::endian::native == std::endian::little) {
            const auto bytes = static_cast<std::streamsize>(n * sizeof(T));
            in_.read(reinterpret_cast<char*>(data), bytes);
            if (in_.gcount() != bytes) throw Error(ErrorCode::TruncatedFile, path_.string() + ": file ends early");
        } else {
            for (std::size_t k = 0; k < n; ++k) data[k] = get<T>();
        }
    }

    /// Guards allocations against corrupt counts.
    void require(std::uint64_t bytes) {
        const auto pos = in_.tellg();
        in_.seekg(0, std::ios::end);
        const auto end = in_.tellg();
        in_.seekg(pos);
        if (pos < 0 || end < pos || static_cast<std::uint64_t>(end - pos) < bytes) {
            throw Error(ErrorCode::TruncatedFile, path_.string() + ": payload shorter than header claims");
        }
    }

    void finish() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw Error(ErrorCode::Io, path_.string() + ": trailing bytes after payload");
        }
    }

private:
    fs::path path_;
    std::ifstream in_;
};

void write_plan_body(Writer& w, const transport::TransportPlan& p) {
    w.put<std::uint64_t>(p.rows());
    w.put<std::uint64_t>(p.cols());
    w.put<std::uint32_t>(p.is_sparse() ? 1u : 0u);
    w.put<double>(p.epsilon_used);
    w.put<std::int64_t>(p.iterations);
    w.put<double>(p.marginal_violation);
    w.put<std::uint64_t>(p.stored_entries());
    p.for_each([&](std::size_t i, std::size_t j, double v) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(j));
        w.put<double>(v);
    });
}

transport::TransportPlan read_plan_body(Reader& r) {
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    const auto sparse = r.get<std::uint32_t>();
    const auto eps = r.get<double>();
    const auto iters = r.get<std::int64_t>();
    const auto viol = r.get<double>();
    const auto nnz = r.get<std::uint64_t>();
    if (sparse > 1) throw Error(ErrorCode::Io, "unknown plan storage kind");
    r.require(nnz * 16);

    std::vector<std::uint64_t> row_ptr(rows + 1, 0);
    std::vector<std::uint32_t> col_idx(nnz);
    std::vector<double> values(nnz);
    std::uint64_t prev_i = 0;
    for (std::uint64_t k = 0; k < nnz; ++k) {
        const auto i = r.get<std::uint32_t>();
        col_idx[k] = r.get<std::uint32_t>();
        values[k] = r.get<double>();
        if (i >= rows || i < prev_i) throw Error(ErrorCode::Io, "plan triplets out of order");
        prev_i = i;
        ++row_ptr[i + 1];
    }
    for (std::uint64_t i = 0; i < rows; ++i) row_ptr[i + 1] += row_ptr[i];

    transport::TransportPlan p;
    if (sparse) {
        p = transport::TransportPlan::sparse(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
    } else {
        if (nnz != rows * cols) throw Error(ErrorCode::Io, "dense plan entry count mismatch");
        p = transport::TransportPlan::dense(rows, cols, std::move(values));
    }
    p.epsilon_used = eps;
    p.iterations = static_cast<int>(iters);
    p.marginal_violation = viol;
    return p;
}

void write_u32s(Writer& w, const std::vector<std::uint32_t>& v) {
    w.put<std::uint64_t>(v.size());
    w.put_all(v.data(), v.size());
}

std::vector<std::uint32_t> read_u32s(Reader& r) {
    const auto n = r.get<std::uint64_t>();
    r.require(n * 4);
    std::vector<std::uint32_t> v(n);
    r.get_all(v.data(), n);
    return v;
}

void save_part(const interp::SignPart& part, const fs::path& path) {
    Writer w(path);
    w.magic(part_magic);
    w.put<std::uint32_t>(format_version);
    w.put<double>(part.mass_left);
    w.put<double>(part.mass_right);
    write_u32s(w, part.src_support);
    write_u32s(w, part.dst_support);
    write_plan_body(w, *part.plan);
    w.close();
}

interp::SignPart load_part(const fs::path& path) {
    Reader r(path);
    r.expect(part_magic);
    interp::SignPart part;
    part.mass_left = r.get<double>();
    part.mass_right = r.get<double>();
    part.src_support = read_u32s(r);
    part.dst_support = read_u32s(r);
    part.plan = read_plan_body(r);
    r.finish();
    return part;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "missing " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, path.string() + ": malformed manifest: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

fs::path artifact(const fs::path& dir, const std::string& name) {
    const auto p = dir / name;
    if (!fs::exists(p)) throw Error(ErrorCode::MissingArtifact, "missing " + p.string());
    return p;
}

json hyper_json(const gpr::Hyperparameters& h) {
    return {{"signal_variance", h.signal_variance}, {"length_scale", h.length_scale}, {"noise", h.noise}};
}

gpr::Hyperparameters hyper_from(const json& j) {
    return {j.at("signal_variance").get<double>(), j.at("length_scale").get<double>(), j.at("noise").get<double>()};
}

std::string format_g17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void save_trajectory(const measure::Trajectory& traj, const fs::path& path) {
    const auto& g = traj.grid();
    Writer w(path);
    w.magic(trajectory_magic);
    w.put<std::uint32_t>(format_version);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.nx()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.nz()));
    w.put<double>(g.hx());
    w.put<double>(g.hz());
    w.put<double>(g.x0());
    w.put<double>(g.z0());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(traj.size()));
    w.put<double>(traj.dt());
    w.put<double>(traj.t_final());
    for (const auto& s : traj.snapshots()) w.put_all(s.values.data(), static_cast<std::size_t>(s.values.size()));
    w.close();
}

measure::Trajectory load_trajectory(const fs::path& path) {
    Reader r(path);
    r.expect(trajectory_magic);
    const auto nx = r.get<std::uint32_t>();
    const auto nz = r.get<std::uint32_t>();
    const auto hx = r.get<double>();
    const auto hz = r.get<double>();
    const auto x0 = r.get<double>();
    const auto z0 = r.get<double>();
    const auto n_t = r.get<std::uint32_t>();
    const auto dt = r.get<double>();
    const auto t_f = r.get<double>();
    const measure::Grid g(nx, nz, hx, hz, x0, z0);
    r.require(std::uint64_t{n_t} * g.size() * 8);

    std::vector<measure::Snapshot> snaps(n_t);
    for (std::uint32_t k = 0; k < n_t; ++k) {
        snaps[k].values.resize(static_cast<Eigen::Index>(g.size()));
        r.get_all(snaps[k].values.data(), g.size());
        snaps[k].time = static_cast<double>(k) * dt;
    }
    r.finish();
    if (n_t > 0) snaps.back().time = t_f;
    return measure::Trajectory(g, dt, std::move(snaps));
}

void save_plan(const transport::TransportPlan& plan, const fs::path& path) {
    Writer w(path);
    w.magic(plan_magic);
    w.put<std::uint32_t>(format_version);
    write_plan_body(w, plan);
    w.close();
}

transport::TransportPlan load_plan(const fs::path& path) {
    Reader r(path);
    r.expect(plan_magic);
    auto p = read_plan_body(r);
    r.finish();
    return p;
}

void save_matrix(const Eigen::MatrixXd& m, const fs::path& path) {
    Writer w(path);
    w.magic(matrix_magic);
    w.put<std::uint32_t>(format_version);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.put_all(m.data(), static_cast<std::size_t>(m.size()));
    w.close();
}

Eigen::MatrixXd load_matrix(const fs::path& path) {
    Reader r(path);
    r.expect(matrix_magic);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    r.require(rows * cols * 8);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.get_all(m.data(), static_cast<std::size_t>(m.size()));
    r.finish();
    return m;
}

void save_model(const rom::RomModel& model, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

    const auto& ip = model.interpolation();
    const auto& g = ip.grid();
    const auto& meta = model.metadata();
    json m;
    m["format"] = "otrom-model";
    m["version"] = format_version;
    m["grid"] = {{"nx", g.nx()}, {"nz", g.nz()}, {"hx", g.hx()}, {"hz", g.hz()}, {"x0", g.x0()}, {"z0", g.z0()}};
    m["epsilon"] = meta.epsilon ? json(*meta.epsilon) : json(nullptr);
    m["epsilon_relative"] = meta.epsilon_relative;
    m["marginal_tol"] = meta.marginal_tol;
    m["n_synth"] = meta.n_synth;
    m["pod_threshold"] = meta.pod_threshold;
    m["sign_strategy"] = meta.sign_strategy == measure::SignStrategy::Split ? "split" : "nonnegative";
    m["dt"] = meta.dt;
    m["checkpoint_indices"] = meta.checkpoint_indices;

    Eigen::MatrixXd cps(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(ip.n_checkpoints()));
    std::vector<double> cp_times;
    for (std::size_t k = 0; k < ip.n_checkpoints(); ++k) {
        cps.col(static_cast<Eigen::Index>(k)) = ip.checkpoints()[k].values;
        cp_times.push_back(ip.checkpoints()[k].time);
    }
    save_matrix(cps, dir / "checkpoints.bin");
    m["checkpoint_times"] = cp_times;

    json intervals = json::array();
    for (std::size_t i = 0; i < ip.intervals().size(); ++i) {
        json entry;
        for (const auto& [name, part] : {std::pair<std::string, const interp::SignPart*>{"positive", &ip.intervals()[i].positive},
                                         {"negative", &ip.intervals()[i].negative}}) {
            if (!part->plan) {
                entry[name] = nullptr;
                continue;
            }
            const std::string file = "interval_" + std::to_string(i) + "_" + name + ".bin";
            save_part(*part, dir / file);
            entry[name] = file;
        }
        intervals.push_back(entry);
    }
    m["intervals"] = intervals;

    const auto& map = model.mapping();
    json mapping;
    mapping["kind"] = rom::to_string(map.kind());
    if (map.kind() == rom::MappingKind::MinL2) {
        mapping["regression"] = rom::to_string(map.regression());
        mapping["train_times"] = map.train_times();
        mapping["alpha_samples"] = map.alpha_samples();
        const auto h = map.gpr_hyperparameters();
        mapping["gpr"] = h ? hyper_json(*h) : json(nullptr);
    }
    m["mapping"] = mapping;

    if (const auto& c = model.corrector()) {
        json corr;
        corr["t_final"] = c->t_final();
        corr["energy_threshold"] = c->basis().energy_threshold;
        corr["singular_values"] = std::vector<double>(c->basis().singular_values.data(),
                                                      c->basis().singular_values.data() + c->basis().singular_values.size());
        corr["offsets"] = c->offsets();
        corr["scales"] = c->scales();
        json regs = json::array();
        for (const auto& r : c->regressors()) {
            regs.push_back({{"x", r.train_x()}, {"y", r.train_y()}, {"mean", r.mean_const()},
                            {"hyper", hyper_json(r.hyperparameters())}});
        }
        corr["regressors"] = regs;
        save_matrix(c->basis().modes, dir / "residual_basis.bin");
        corr["basis_file"] = "residual_basis.bin";
        m["corrector"] = corr;
    } else {
        m["corrector"] = nullptr;
    }
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

rom::RomModel load_model(const fs::path& dir) {
    const json m = read_json(dir / "manifest.json");
    try {
        if (m.at("format") != "otrom-model") throw Error(ErrorCode::BadMagic, "not a model manifest");
        if (m.at("version").get<std::uint32_t>() != format_version) {
            throw Error(ErrorCode::VersionMismatch, "model manifest version mismatch");
        }
        const auto& jg = m.at("grid");
        const measure::Grid g(jg.at("nx").get<std::size_t>(), jg.at("nz").get<std::size_t>(), jg.at("hx").get<double>(),
                              jg.at("hz").get<double>(), jg.at("x0").get<double>(), jg.at("z0").get<double>());

        rom::RomMetadata meta;
        if (!m.at("epsilon").is_null()) meta.epsilon = m.at("epsilon").get<double>();
        meta.epsilon_relative = m.at("epsilon_relative").get<double>();
        meta.marginal_tol = m.at("marginal_tol").get<double>();
        meta.n_synth = m.at("n_synth").get<std::size_t>();
        meta.pod_threshold = m.at("pod_threshold").get<double>();
        meta.sign_strategy = m.at("sign_strategy") == "split" ? measure::SignStrategy::Split
                                                              : measure::SignStrategy::Nonnegative;
        meta.dt = m.at("dt").get<double>();
        meta.checkpoint_indices = m.at("checkpoint_indices").get<std::vector<std::size_t>>();

        const auto cp_times = m.at("checkpoint_times").get<std::vector<double>>();
        const Eigen::MatrixXd cps = load_matrix(artifact(dir, "checkpoints.bin"));
        if (static_cast<std::size_t>(cps.cols()) != cp_times.size() || static_cast<std::size_t>(cps.rows()) != g.size()) {
            throw Error(ErrorCode::ShapeMismatch, "checkpoint file does not match manifest");
        }
        std::vector<measure::Snapshot> snaps;
        for (std::size_t k = 0; k < cp_times.size(); ++k) snaps.push_back({cps.col(static_cast<Eigen::Index>(k)), cp_times[k]});

        std::vector<interp::IntervalModel> intervals;
        for (const auto& e : m.at("intervals")) {
            interp::IntervalModel iv;
            if (!e.at("positive").is_null()) iv.positive = load_part(artifact(dir, e.at("positive").get<std::string>()));
            if (!e.at("negative").is_null()) iv.negative = load_part(artifact(dir, e.at("negative").get<std::string>()));
            intervals.push_back(std::move(iv));
        }
        interp::InterpolationModel ip(g, std::move(snaps), std::move(intervals));

        const auto& jm = m.at("mapping");
        std::optional<rom::TimeAlphaMapping> mapping;
        if (jm.at("kind") == "linear") {
            mapping = rom::TimeAlphaMapping::linear(cp_times);
        } else if (jm.at("kind") == "minl2") {
            const auto reg = jm.at("regression") == "gpr" ? rom::RegressionKind::Gpr : rom::RegressionKind::PiecewiseLinear;
            std::optional<gpr::Hyperparameters> h;
            if (!jm.at("gpr").is_null()) h = hyper_from(jm.at("gpr"));
            mapping = rom::TimeAlphaMapping::minl2_with(cp_times, jm.at("train_times").get<std::vector<double>>(),
                                                        jm.at("alpha_samples").get<std::vector<double>>(), reg, h);
        } else {
            throw Error(ErrorCode::Io, "unknown mapping kind in manifest");
        }

        std::optional<rom::ResidualCorrector> corrector;
        if (!m.at("corrector").is_null()) {
            const auto& jc = m.at("corrector");
            pod::PODBasis basis;
            basis.modes = load_matrix(artifact(dir, jc.at("basis_file").get<std::string>()));
            const auto sv = jc.at("singular_values").get<std::vector<double>>();
            basis.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
            basis.energy_threshold = jc.at("energy_threshold").get<double>();
            std::vector<gpr::GprModel> regs;
            for (const auto& r : jc.at("regressors")) {
                regs.emplace_back(r.at("x").get<std::vector<double>>(), r.at("y").get<std::vector<double>>(),
                                  hyper_from(r.at("hyper")), r.at("mean").get<double>());
            }
            corrector.emplace(std::move(basis), std::move(regs), jc.at("offsets").get<std::vector<double>>(),
                              jc.at("scales").get<std::vector<double>>(), jc.at("t_final").get<double>());
        }
        return rom::RomModel(std::move(ip), std::move(*mapping), std::move(corrector), std::move(meta));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, (dir / "manifest.json").string() + ": invalid manifest: " + e.what());
    }
}

void export_error_report_csv(const rom::ErrorReport& report, const fs::path& path) {
    if (report.errors.empty()) throw Error(ErrorCode::InvalidArgument, "error report is empty");
    const std::string kind = rom::to_string(report.kind);
    std::string text = "time,error,kind\n";
    for (std::size_t k = 0; k < report.errors.size(); ++k)
        text += format_g17(report.times[k]) + "," + format_g17(report.errors[k]) + "," + kind + "\n";
    text += "mean," + format_g17(report.mean) + "," + kind + "\n";
    write_text(path, text);
}

}  // namespace otrom::io
