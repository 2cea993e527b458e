// Command-line front end: pattern, optimize, sweep, gridcheck.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rhs/experiments.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kValidation = 2, kIo = 3, kAllFailed = 4 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool svg = false;
    std::optional<std::string> beams;
    std::string quantize;
    std::string sizes;
};

rhs::ExperimentConfig load(const Options& o) {
    if (o.config_path.empty()) {
        rhs::ExperimentConfig c;
        c.validate();
        return c;
    }
    std::ifstream in(o.config_path);
    if (!in) throw IoError("cannot read config file '" + o.config_path + "'");
    return rhs::load_experiment_config(in);
}

fs::path output_dir(const Options& o, const rhs::ExperimentConfig& c) {
    fs::path dir = o.out_dir.empty() ? fs::path(c.experiment.output_dir) : fs::path(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    fn(out);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

int cmd_pattern(const Options& o) {
    rhs::ExperimentConfig c = load(o);
    if (o.beams) {
        if (o.beams->find_first_not_of(" \t") == std::string::npos)
            throw rhs::InvalidArgument("--beams needs at least one angle");
        c.pattern.beams_deg = rhs::KeyValueFile::parse_number_list(*o.beams, "--beams");
        c.pattern.weights.clear();
    }
    if (!o.quantize.empty()) c.pattern.quantize = o.quantize;
    const auto result = rhs::run_pattern(c);
    const fs::path dir = output_dir(o, c);
    write_file(dir / "pattern.csv", [&](std::ostream& os) { rhs::write_line_pattern_csv(os, result); });
    if (o.svg) {
        write_file(dir / "pattern.svg", [&](std::ostream& os) {
            rhs::write_svg_chart(os, "Radiation pattern", "theta (deg)", "gain (dB)",
                                 {{"pattern", result.angles_deg, result.gains_db}});
        });
    }
    const auto lobes = rhs::local_maxima(result.pattern);
    std::printf("wrote %s\n", (dir / "pattern.csv").string().c_str());
    for (std::size_t i = 0; i < std::min<std::size_t>(lobes.size(), c.pattern.beams_deg.size()); ++i)
        std::printf("lobe %zu: %.1f deg, %.2f dB\n", i + 1, result.angles_deg[lobes[i]], result.gains_db[lobes[i]]);
    return kOk;
}

int cmd_optimize(const Options& o) {
    const rhs::ExperimentConfig c = load(o);
    const std::uint64_t seed = o.seed.value_or(c.experiment.seed);
    const auto trials = rhs::run_optimize(c, seed);
    const fs::path dir = output_dir(o, c);
    for (const auto& t : trials) {
        if (!t.ok) continue;
        write_file(dir / ("convergence_trial_" + std::to_string(t.trial) + ".csv"),
                   [&](std::ostream& os) { rhs::write_convergence_csv(os, t); });
    }
    write_file(dir / "optimize_summary.csv", [&](std::ostream& os) { rhs::write_optimize_summary_csv(os, trials); });
    std::size_t ok = 0;
    for (const auto& t : trials) {
        if (t.ok) {
            ++ok;
            std::printf("trial %zu: rate %.4f (baseline %.4f), %zu iterations, %s\n", t.trial, t.final_rate,
                        t.baseline_rate, t.iterations, rhs::to_string(t.termination));
        } else {
            std::printf("trial %zu: %s\n", t.trial, t.error.c_str());
        }
    }
    if (ok == 0) {
        std::fprintf(stderr, "error: every trial failed\n");
        return kAllFailed;
    }
    return kOk;
}

int cmd_sweep(const Options& o) {
    const rhs::ExperimentConfig c = load(o);
    std::vector<std::size_t> sizes = c.experiment.sizes;
    if (!o.sizes.empty()) {
        sizes.clear();
        for (double v : rhs::KeyValueFile::parse_number_list(o.sizes, "--sizes")) {
            if (!(v >= 2.0) || v != std::floor(v)) throw rhs::InvalidArgument("--sizes entries must be integers >= 2");
            sizes.push_back(static_cast<std::size_t>(v));
        }
    }
    const std::uint64_t seed = o.seed.value_or(c.experiment.seed);
    const auto points = rhs::run_sweep(c, sizes, seed);
    const fs::path dir = output_dir(o, c);
    write_file(dir / "sweep.csv", [&](std::ostream& os) { rhs::write_sweep_csv(os, points); });
    if (o.svg) {
        rhs::SvgSeries proposed{"proposed", {}, {}, "#1f77b4"}, baseline{"superposition", {}, {}, "#d62728"};
        for (const auto& p : points) {
            proposed.x.push_back(static_cast<double>(p.M));
            proposed.y.push_back(p.proposed_mean);
            baseline.x.push_back(static_cast<double>(p.M));
            baseline.y.push_back(p.baseline_mean);
        }
        write_file(dir / "sweep.svg", [&](std::ostream& os) {
            rhs::write_svg_chart(os, "Sum rate vs surface size", "M = N", "sum rate (bit/s/Hz)", {proposed, baseline});
        });
    }
    bool any = false;
    for (const auto& p : points) {
        any |= p.trials > 0;
        std::printf("M=%zu proposed %.4f +- %.4f, baseline %.4f (%zu trials)\n", p.M, p.proposed_mean, p.proposed_std,
                    p.baseline_mean, p.trials);
    }
    if (!any) {
        std::fprintf(stderr, "error: every trial failed\n");
        return kAllFailed;
    }
    return kOk;
}

int cmd_gridcheck(const Options& o) {
    const rhs::ExperimentConfig c = load(o);
    const std::uint64_t seed = o.seed.value_or(c.experiment.seed);
    const auto r = rhs::run_gridcheck(c, seed);
    const fs::path dir = output_dir(o, c);
    write_file(dir / "gridcheck.csv", [&](std::ostream& os) { rhs::write_gridcheck_csv(os, r); });
    std::printf("median ratio %.6f over %zu instances: %s (threshold %.2f)\n", r.median_ratio, r.instances.size(),
                r.passed ? "PASS" : "FAIL", c.gridcheck.threshold);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Holographic surface beamforming experiments"};
    app.require_subcommand(1, 1);
    Options o;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "configuration file");
        sub->add_option("--out", o.out_dir, "output directory");
        sub->add_flag("--svg", o.svg, "also write an SVG chart");
    };
    auto seeded = [&](CLI::App* sub) { sub->add_option("--seed", seed, "experiment seed"); };

    auto* pattern = app.add_subcommand("pattern", "radiation pattern of a line surface");
    common(pattern);
    std::string beams;
    pattern->add_option("--beams", beams, "comma separated beam angles in degrees");
    pattern->add_option("--quantize", o.quantize, "none, pin-ideal or pin-measured")
        ->check(CLI::IsMember({"none", "pin-ideal", "pin-measured"}));

    auto* optimize = app.add_subcommand("optimize", "optimize seeded trials");
    common(optimize);
    seeded(optimize);

    auto* sweep = app.add_subcommand("sweep", "sum rate versus surface size");
    common(sweep);
    seeded(sweep);
    sweep->add_option("--sizes", o.sizes, "comma separated values of M (N = M)");

    auto* grid = app.add_subcommand("gridcheck", "compare the optimizer with an exhaustive amplitude grid");
    common(grid);
    seeded(grid);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }
    if (pattern->count("--beams")) o.beams = beams;
    for (auto* sub : {optimize, sweep, grid})
        if (sub->parsed() && sub->count("--seed")) o.seed = seed;

    try {
        if (pattern->parsed()) return cmd_pattern(o);
        if (optimize->parsed()) return cmd_optimize(o);
        if (sweep->parsed()) return cmd_sweep(o);
        return cmd_gridcheck(o);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const rhs::InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    } catch (const rhs::LobeShortfall& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }
}
