// consenseg command line tool.
//
// Subcommands:
//   segment   run the particle pipeline on one image and write masks
//   evaluate  score a predicted mask against a reference mask
//   optimize  random search over (delta1, delta2, sigma2)
//   simulate  run the particle dynamics without an image and dump frames
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric/domain error.
// Every command is deterministic for a fixed --seed; omitting --seed draws one
// from the OS entropy pool and reports it.

#include <CLI11.hpp>
#include <json.hpp>

#include <consenseg/clusters.hpp>
#include <consenseg/image.hpp>
#include <consenseg/mask_ops.hpp>
#include <consenseg/metrics.hpp>
#include <consenseg/optimizer.hpp>
#include <consenseg/particles.hpp>
#include <consenseg/pnm.hpp>
#include <consenseg/rng.hpp>
#include <consenseg/solver.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace consenseg;

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form, locale independent.
std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_seconds(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::uint64_t entropy_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

DiffusionKind diffusion_from_name(const std::string& name) {
    if (name == "d1") return DiffusionKind::D1;
    if (name == "d2") return DiffusionKind::D2;
    if (name == "d3") return DiffusionKind::D3;
    if (name == "d4") return DiffusionKind::D4;
    if (name == "const") return DiffusionKind::Constant;
    throw usage_error("unknown diffusion function: " + name);
}

// One JSON config entry bound to a CLI option. Config values apply only when
// the flag was not given on the command line (CLI wins over config, config
// wins over the built-in default).
struct CfgOpt {
    std::string name;
    CLI::Option* opt = nullptr;
    std::function<void(const json&)> apply;
};

class ConfigBinder {
public:
    void bind(CLI::Option* opt, const std::string& name, double& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_number())
                                    throw usage_error("config key '" + name + "' must be a number");
                                var = j.get<double>();
                            }});
    }
    void bind(CLI::Option* opt, const std::string& name, std::int64_t& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_number_integer())
                                    throw usage_error("config key '" + name + "' must be an integer");
                                var = j.get<std::int64_t>();
                            }});
    }
    void bind(CLI::Option* opt, const std::string& name, int& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_number_integer())
                                    throw usage_error("config key '" + name + "' must be an integer");
                                var = j.get<int>();
                            }});
    }
    void bind(CLI::Option* opt, const std::string& name, std::uint64_t& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_number_unsigned() && !j.is_number_integer())
                                    throw usage_error("config key '" + name + "' must be an integer");
                                var = j.get<std::uint64_t>();
                            }});
    }
    void bind(CLI::Option* opt, const std::string& name, std::string& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_string())
                                    throw usage_error("config key '" + name + "' must be a string");
                                var = j.get<std::string>();
                            }});
    }
    void bind(CLI::Option* opt, const std::string& name, bool& var) {
        entries_.push_back({name, opt, [name, &var](const json& j) {
                                if (!j.is_boolean())
                                    throw usage_error("config key '" + name + "' must be a boolean");
                                var = j.get<bool>();
                            }});
    }

    // Registers a callback fired when the named key is applied from a config.
    void on_applied(const std::string& name, std::function<void()> cb) {
        for (auto& e : entries_)
            if (e.name == name) {
                auto prev = e.apply;
                e.apply = [prev, cb](const json& j) {
                    prev(j);
                    cb();
                };
                return;
            }
    }

    // Applies a config file on top of defaults. Unknown keys are rejected.
    void merge(const std::string& path) const {
        if (path.empty())
            return;
        std::ifstream in(path);
        if (!in)
            throw io_error(path + ": cannot open config file");
        json cfg;
        try {
            cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw usage_error(path + ": config is not valid JSON (" + e.what() + ")");
        }
        if (!cfg.is_object())
            throw usage_error(path + ": config root must be a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            const CfgOpt* entry = nullptr;
            for (const auto& e : entries_)
                if (e.name == key) {
                    entry = &e;
                    break;
                }
            if (!entry)
                throw usage_error(path + ": unknown config key '" + key + "'");
            if (entry->opt->count() == 0)
                entry->apply(value);
        }
    }

private:
    std::vector<CfgOpt> entries_;
};

// Options shared by segment and optimize.
struct PipelineFlags {
    double T = 100.0;
    double dt = 0.01;
    std::string diffusion = "d1";
    double r_merge = 0.0; // 0: delta1/2
    double threshold = 0.5;
    int min_fg = 10;
    int min_bg = 10;
    int connectivity = 8;

    void add(CLI::App* cmd, ConfigBinder& bind) {
        bind.bind(cmd->add_option("--T", T, "Time horizon"), "T", T);
        bind.bind(cmd->add_option("--dt", dt, "Time step"), "dt", dt);
        bind.bind(cmd->add_option("--diffusion", diffusion, "Diffusion function")
                      ->check(CLI::IsMember({"d1", "d2", "d3", "d4", "const"})),
                  "diffusion", diffusion);
        bind.bind(cmd->add_option("--r-merge", r_merge,
                                  "Cluster merge radius (default: delta1/2)"),
                  "r-merge", r_merge);
        bind.bind(cmd->add_option("--threshold", threshold, "Binarization threshold"),
                  "threshold", threshold);
        bind.bind(cmd->add_option("--min-fg", min_fg, "Minimum foreground component size"),
                  "min-fg", min_fg);
        bind.bind(cmd->add_option("--min-bg", min_bg, "Minimum background component size"),
                  "min-bg", min_bg);
        bind.bind(cmd->add_option("--connectivity", connectivity, "Pixel connectivity")
                      ->check(CLI::IsMember({4, 8})),
                  "connectivity", connectivity);
    }

    PipelineConfig pipeline() const {
        PipelineConfig cfg;
        cfg.r_merge = r_merge;
        cfg.threshold = threshold;
        cfg.min_fg = min_fg;
        cfg.min_bg = min_bg;
        cfg.connectivity = connectivity;
        return cfg;
    }
};

struct MetricFlags {
    std::string metric = "dice";
    double tau = 1.0;
    double beta = 1.0;

    void add(CLI::App* cmd, ConfigBinder& bind) {
        bind.bind(cmd->add_option("--metric", metric, "Metric name")
                      ->check(CLI::IsMember({"dice", "jaccard", "surface-dice", "fbeta",
                                             "precision", "sensitivity"})),
                  "metric", metric);
        bind.bind(cmd->add_option("--tau", tau, "Surface Dice tolerance (pixels)"), "tau", tau);
        bind.bind(cmd->add_option("--beta", beta, "F-beta weight"), "beta", beta);
    }

    MetricKind kind() const {
        MetricKind m = metric_from_name(metric);
        m.tau = tau;
        m.beta = beta;
        return m;
    }
};

void append_metric_params(json& j, const MetricKind& m) {
    if (m.kind == MetricKind::Kind::SurfaceDice)
        j["tau"] = m.tau;
    if (m.kind == MetricKind::Kind::FBeta)
        j["beta"] = m.beta;
}

struct SeedFlag {
    std::uint64_t seed = 0;
    bool set_by_config = false;
    CLI::Option* opt = nullptr;

    void add(CLI::App* cmd, ConfigBinder& bind) {
        opt = cmd->add_option("--seed", seed, "RNG seed (default: OS entropy)");
        bind.bind(opt, "seed", seed);
        bind.on_applied("seed", [this] { set_by_config = true; });
    }

    // Must run after config merge; reports an entropy-drawn seed on stderr.
    std::uint64_t resolve() {
        if (opt->count() == 0 && !set_by_config) {
            seed = entropy_seed();
            std::cerr << "seed: " << seed << "\n";
        }
        return seed;
    }
};

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error(path + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
        throw io_error(path + ": write failed");
}

// Frames plus a per-snapshot stats CSV, shared by simulate and segment.
void write_snapshot_outputs(const SimulationTrace& trace, const ModelParams& params,
                            const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw io_error(dir + ": cannot create directory (" + ec.message() + ")");

    std::string csv = "time,mean_x,mean_y,energy,clusters\n";
    const double r = params.delta1 / 2.0;
    for (const Snapshot& s : trace.snapshots) {
        const auto step = static_cast<std::int64_t>(std::llround(s.time / params.epsilon));
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%08lld.ppm", static_cast<long long>(step));
        write_ppm_frame(s.positions, (fs::path(dir) / name).string());
        std::int32_t nclusters = 0;
        single_linkage_labels(s.positions, r, &nclusters);
        csv += fmt_double(s.time) + "," + fmt_double(s.mean.x) + "," + fmt_double(s.mean.y) + "," +
               fmt_double(s.energy) + "," + std::to_string(nclusters) + "\n";
    }
    write_text_file((fs::path(dir) / "stats.csv").string(), csv);
}

// ---------------------------------------------------------------------------

struct SegmentCmd {
    std::string input, truth, out_multilevel, out_mask, snapshot_dir, config;
    double delta1 = 0.5, delta2 = 0.1, sigma2 = 0.1;
    std::int64_t snapshot_every = 0;
    PipelineFlags pipe;
    SeedFlag seedf;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add(CLI::App& app) {
        cmd = app.add_subcommand("segment", "Segment one grayscale image");
        binder.bind(cmd->add_option("--input", input, "Input PGM image")->required(), "input", input);
        binder.bind(cmd->add_option("--truth", truth, "Reference mask PGM; prints metrics"), "truth",
                    truth);
        binder.bind(cmd->add_option("--delta1", delta1, "Spatial interaction radius"), "delta1",
                    delta1);
        binder.bind(cmd->add_option("--delta2", delta2, "Feature interaction radius"), "delta2",
                    delta2);
        binder.bind(cmd->add_option("--sigma2", sigma2, "Diffusion scale"), "sigma2", sigma2);
        pipe.add(cmd, binder);
        seedf.add(cmd, binder);
        binder.bind(cmd->add_option("--out-multilevel", out_multilevel, "Multi-level mask PGM path"),
                    "out-multilevel", out_multilevel);
        binder.bind(cmd->add_option("--out-mask", out_mask, "Binary mask PGM path"), "out-mask",
                    out_mask);
        binder.bind(cmd->add_option("--snapshot-every", snapshot_every,
                                    "Snapshot stride in steps (with --snapshot-dir)"),
                    "snapshot-every", snapshot_every);
        binder.bind(cmd->add_option("--snapshot-dir", snapshot_dir, "Directory for PPM frames"),
                    "snapshot-dir", snapshot_dir);
        cmd->add_option("--config", config, "JSON config file");
    }

    int run() {
        binder.merge(config);
        const std::uint64_t seed = seedf.resolve();

        const GrayImage img = read_pgm(input);
        ModelParams params;
        params.delta1 = delta1;
        params.delta2 = delta2;
        params.sigma2 = sigma2;
        params.diffusion = diffusion_from_name(pipe.diffusion);
        params.epsilon = pipe.dt;
        params.horizon = pipe.T;

        std::int64_t every = 0;
        if (!snapshot_dir.empty()) {
            every = snapshot_every > 0 ? snapshot_every
                                       : std::max<std::int64_t>(1, params.step_count() / 10);
        }

        RngStream rng(seed);
        const SegmentationResult res = segment_image(img, params, pipe.pipeline(), rng, every);

        if (!out_multilevel.empty())
            write_pgm(res.multilevel, out_multilevel);
        if (!out_mask.empty())
            write_pgm(res.mask, out_mask);
        if (!snapshot_dir.empty())
            write_snapshot_outputs(res.trace, params, snapshot_dir);

        json report;
        report["seed"] = seed;
        report["clusters"] = res.clusters.count();
        if (!truth.empty()) {
            const BinaryMask ref = read_mask_pgm(truth);
            const ConfusionCounts c = confusion(res.mask, ref);
            report["dice"] = volumetric_dice(c);
            report["jaccard"] = jaccard(c);
            report["surface_dice"] = surface_dice(res.mask, ref, 1.0);
            report["tau"] = 1.0;
            report["fbeta"] = f_beta(c, 1.0);
            report["beta"] = 1.0;
            report["precision"] = precision(c);
            report["sensitivity"] = sensitivity(c);
        }
        std::cout << report.dump(2) << "\n";
        return 0;
    }
};

struct EvaluateCmd {
    std::string pred, truth, config;
    MetricFlags metricf;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add(CLI::App& app) {
        cmd = app.add_subcommand("evaluate", "Score a predicted mask against a reference");
        binder.bind(cmd->add_option("--pred", pred, "Predicted mask PGM")->required(), "pred", pred);
        binder.bind(cmd->add_option("--truth", truth, "Reference mask PGM")->required(), "truth",
                    truth);
        metricf.add(cmd, binder);
        cmd->add_option("--config", config, "JSON config file");
    }

    int run() {
        binder.merge(config);
        const BinaryMask p = read_mask_pgm(pred);
        const BinaryMask t = read_mask_pgm(truth);
        const MetricKind m = metricf.kind();
        const double value = evaluate_metric(p, t, m);
        json out;
        out["metric"] = metric_name(m);
        append_metric_params(out, m);
        out["value"] = value;
        out["loss"] = loss(value);
        std::cout << out.dump(2) << "\n";
        return 0;
    }
};

struct OptimizeCmd {
    std::string input, truth, trace_out, result_out, config;
    std::int64_t iters = 300;
    double delta1_lo = 0.0; // 0: pixel spacing of the input image
    double delta1_hi = 0.7;
    double delta2_lo = 0.05;
    double delta2_hi = 0.3;
    double sigma2_lo = std::exp(-5.0);
    double sigma2_hi = 1.0;
    bool timings = false;
    PipelineFlags pipe;
    MetricFlags metricf;
    SeedFlag seedf;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add(CLI::App& app) {
        cmd = app.add_subcommand("optimize",
                                 "Random search over (delta1, delta2, sigma2) on one image");
        binder.bind(cmd->add_option("--input", input, "Input PGM image")->required(), "input", input);
        binder.bind(cmd->add_option("--truth", truth, "Reference mask PGM")->required(), "truth",
                    truth);
        metricf.add(cmd, binder);
        binder.bind(cmd->add_option("--iters", iters, "Number of trials"), "iters", iters);
        pipe.add(cmd, binder);
        seedf.add(cmd, binder);
        binder.bind(cmd->add_option("--delta1-lo", delta1_lo,
                                    "delta1 prior lower bound (default: pixel spacing)"),
                    "delta1-lo", delta1_lo);
        binder.bind(cmd->add_option("--delta1-hi", delta1_hi, "delta1 prior upper bound"),
                    "delta1-hi", delta1_hi);
        binder.bind(cmd->add_option("--delta2-lo", delta2_lo, "delta2 prior lower bound"),
                    "delta2-lo", delta2_lo);
        binder.bind(cmd->add_option("--delta2-hi", delta2_hi, "delta2 prior upper bound"),
                    "delta2-hi", delta2_hi);
        binder.bind(cmd->add_option("--sigma2-lo", sigma2_lo, "sigma2 prior lower bound"),
                    "sigma2-lo", sigma2_lo);
        binder.bind(cmd->add_option("--sigma2-hi", sigma2_hi, "sigma2 prior upper bound"),
                    "sigma2-hi", sigma2_hi);
        binder.bind(cmd->add_option("--trace-out", trace_out, "Per-trial CSV path"), "trace-out",
                    trace_out);
        binder.bind(cmd->add_option("--result-out", result_out, "Result JSON path"), "result-out",
                    result_out);
        binder.bind(cmd->add_flag("--timings", timings,
                                  "Record measured wall time in the CSV seconds column "
                                  "(breaks byte determinism across runs)"),
                    "timings", timings);
        cmd->add_option("--config", config, "JSON config file");
    }

    int run() {
        binder.merge(config);
        const std::uint64_t seed = seedf.resolve();

        const GrayImage img = read_pgm(input);
        const BinaryMask ref = read_mask_pgm(truth);

        ModelParams base;
        base.diffusion = diffusion_from_name(pipe.diffusion);
        base.epsilon = pipe.dt;
        base.horizon = pipe.T;

        SearchSpace space = SearchSpace::defaults_for(img);
        if (delta1_lo > 0.0)
            space.delta1_lo = delta1_lo;
        space.delta1_hi = delta1_hi;
        space.delta2_lo = delta2_lo;
        space.delta2_hi = delta2_hi;
        space.sigma2_lo = sigma2_lo;
        space.sigma2_hi = sigma2_hi;

        const MetricKind metric = metricf.kind();
        const OptResult result =
            optimize(img, ref, base, pipe.pipeline(), metric, space, iters, seed);

        for (const Trial& t : result.trials)
            std::cerr << "trial " << t.index + 1 << "/" << iters << " loss=" << fmt_double(t.loss_value)
                      << " (" << fmt_seconds(t.wall_seconds) << "s)"
                      << (t.error.empty() ? "" : " error: " + t.error) << "\n";

        if (!trace_out.empty()) {
            std::string csv = "trial,delta1,delta2,sigma2,metric,loss,seconds\n";
            for (const Trial& t : result.trials) {
                csv += std::to_string(t.index) + "," + fmt_double(t.delta1) + "," +
                       fmt_double(t.delta2) + "," + fmt_double(t.sigma2) + "," +
                       fmt_double(t.metric_value) + "," + fmt_double(t.loss_value) + "," +
                       (timings ? fmt_seconds(t.wall_seconds) : std::string("0.000")) + "\n";
            }
            write_text_file(trace_out, csv);
        }

        json out;
        out["seed"] = seed;
        out["metric"] = metric_name(metric);
        append_metric_params(out, metric);
        out["iterations"] = iters;
        json best;
        best["trial"] = result.best.index;
        best["delta1"] = result.best.delta1;
        best["delta2"] = result.best.delta2;
        best["sigma2"] = result.best.sigma2;
        best["value"] = result.best.metric_value;
        best["loss"] = result.best.loss_value;
        out["best"] = best;
        const std::string dumped = out.dump(2) + "\n";
        if (!result_out.empty())
            write_text_file(result_out, dumped);
        std::cout << dumped;
        return 0;
    }
};

struct SimulateCmd {
    std::string init = "uniform", out_dir, config;
    std::int64_t n = 10000, snapshot_every = 1000;
    double delta1 = 0.2, delta2 = 1.0, sigma2 = 0.0;
    std::string diffusion = "const";
    double T = 100.0, dt = 0.01;
    SeedFlag seedf;
    ConfigBinder binder;
    CLI::App* cmd = nullptr;

    void add(CLI::App& app) {
        cmd = app.add_subcommand("simulate", "Run the particle dynamics and dump frames");
        binder.bind(cmd->add_option("--n", n, "Particle count"), "n", n);
        binder.bind(cmd->add_option("--init", init, "Initial condition")
                        ->check(CLI::IsMember({"uniform"})),
                    "init", init);
        binder.bind(cmd->add_option("--delta1", delta1, "Spatial interaction radius"), "delta1",
                    delta1);
        binder.bind(cmd->add_option("--delta2", delta2,
                                    "Feature interaction radius (>= 1 disables feature gating)"),
                    "delta2", delta2);
        binder.bind(cmd->add_option("--sigma2", sigma2, "Diffusion scale"), "sigma2", sigma2);
        binder.bind(cmd->add_option("--diffusion", diffusion, "Diffusion function")
                        ->check(CLI::IsMember({"d1", "d2", "d3", "d4", "const"})),
                    "diffusion", diffusion);
        binder.bind(cmd->add_option("--T", T, "Time horizon"), "T", T);
        binder.bind(cmd->add_option("--dt", dt, "Time step"), "dt", dt);
        seedf.add(cmd, binder);
        binder.bind(cmd->add_option("--snapshot-every", snapshot_every, "Snapshot stride in steps"),
                    "snapshot-every", snapshot_every);
        binder.bind(cmd->add_option("--out-dir", out_dir, "Output directory")->required(), "out-dir",
                    out_dir);
        cmd->add_option("--config", config, "JSON config file");
    }

    int run() {
        binder.merge(config);
        const std::uint64_t seed = seedf.resolve();
        if (n < 2)
            throw std::domain_error("simulate: --n must be at least 2");
        if (snapshot_every < 1)
            throw std::domain_error("simulate: --snapshot-every must be positive");

        ModelParams params;
        params.delta1 = delta1;
        params.delta2 = delta2;
        params.sigma2 = sigma2;
        params.diffusion = diffusion_from_name(diffusion);
        params.epsilon = dt;
        params.horizon = T;
        params.validate();

        RngStream rng(seed);
        const ParticleSystem sys = random_uniform_system(static_cast<std::size_t>(n), rng);
        auto [final_sys, trace] = simulate(sys, params, rng, snapshot_every);
        write_snapshot_outputs(trace, params, out_dir);

        std::int32_t nclusters = 0;
        single_linkage_labels(trace.snapshots.back().positions, params.delta1 / 2.0, &nclusters);
        json out;
        out["seed"] = seed;
        out["snapshots"] = trace.snapshots.size();
        out["final_clusters"] = nclusters;
        std::cout << out.dump(2) << "\n";
        return 0;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle consensus segmentation toolkit"};
    app.require_subcommand(1);

    SegmentCmd segment_cmd;
    EvaluateCmd evaluate_cmd;
    OptimizeCmd optimize_cmd;
    SimulateCmd simulate_cmd;
    segment_cmd.add(app);
    evaluate_cmd.add(app);
    optimize_cmd.add(app);
    simulate_cmd.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (segment_cmd.cmd->parsed())
            return segment_cmd.run();
        if (evaluate_cmd.cmd->parsed())
            return evaluate_cmd.run();
        if (optimize_cmd.cmd->parsed())
            return optimize_cmd.run();
        if (simulate_cmd.cmd->parsed())
            return simulate_cmd.run();
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
