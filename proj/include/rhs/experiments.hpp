#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <ostream>
#include <string>
#include <vector>

#include "rhs/config.hpp"

namespace rhs {

// ---------------------------------------------------------------------------
// Radiation pattern of a line surface

enum class Quantization { none, pin_ideal, pin_measured };

inline Quantization parse_quantization(const std::string& s) {
    if (s == "none") return Quantization::none;
    if (s == "pin-ideal") return Quantization::pin_ideal;
    if (s == "pin-measured") return Quantization::pin_measured;
    throw InvalidArgument("quantization must be none, pin-ideal or pin-measured (got '" + s + "')");
}

struct LinePattern {
    std::vector<double> angles_deg;  // signed
    std::vector<double> gains_db;
    RadiationPattern pattern;
};

/// Single-feed line of `elements` radiators fed from one end.
inline RhsGeometry pattern_geometry(const ExperimentConfig& cfg) {
    GeometrySettings line = cfg.geometry;
    line.feed_positions.clear();
    return line.build(cfg.pattern.elements, 1, 1);
}

inline LinePattern run_pattern(const RhsGeometry& g, const std::vector<double>& beams_deg,
                               const std::vector<double>& weights, Quantization q, double threshold,
                               double step_deg) {
    if (beams_deg.empty()) throw InvalidArgument("at least one beam direction is required");
    if (!weights.empty() && weights.size() != beams_deg.size())
        throw InvalidArgument("beam weights must match beam directions in length");
    std::vector<WeightedBeam> beams;
    for (std::size_t i = 0; i < beams_deg.size(); ++i)
        beams.push_back({line_direction(g, beams_deg[i]), weights.empty() ? 1.0 : weights[i]});
    const HolographicAmplitudes amps = multibeam_pattern(g, 0, beams);

    Eigen::VectorXd w = amps.values();
    if (q != Quantization::none)
        w = quantize_pin(amps, threshold, q == Quantization::pin_ideal ? PinMode::ideal : PinMode::measured)
                .element_weights();

    LinePattern out;
    const auto grid = line_grid(g, -90.0, 90.0, step_deg);
    out.pattern = radiation_pattern(g, w, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(g.num_feeds())), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) out.angles_deg.push_back(signed_line_angle_deg(g, grid[i]));
    out.gains_db = out.pattern.gains_db;
    return out;
}

inline LinePattern run_pattern(const ExperimentConfig& cfg) {
    return run_pattern(pattern_geometry(cfg), cfg.pattern.beams_deg, cfg.pattern.weights,
                       parse_quantization(cfg.pattern.quantize), cfg.pattern.threshold, cfg.pattern.step_deg);
}

inline void write_line_pattern_csv(std::ostream& os, const LinePattern& p) {
    os << "theta_deg,gain_db\n";
    for (std::size_t i = 0; i < p.angles_deg.size(); ++i)
        os << format_fixed6(p.angles_deg[i]) << ',' << format_fixed6(p.gains_db[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Seeded optimization trials

struct TrialOutcome {
    std::size_t trial = 0;
    std::uint64_t seed = 0;  // substream seed, experiment seed XOR trial
    bool ok = false;
    std::string error;
    std::vector<double> trajectory;
    double final_rate = 0.0;
    double baseline_rate = 0.0;
    std::size_t iterations = 0;
    Termination termination = Termination::max_iterations;
};

inline TrialOutcome run_trial(const ExperimentConfig& cfg, const RhsGeometry& g, std::uint64_t seed,
                              std::size_t trial) {
    TrialOutcome t;
    t.trial = trial;
    t.seed = seed ^ trial;
    try {
        auto rng = trial_rng(seed, trial);
        DownlinkModel model(g, generate_channel(g, cfg.channel, rng), cfg.budget);
        const OptimizationReport proposed = optimize(model, cfg.optimizer);
        const OptimizationReport baseline = baseline_superposition(model, cfg.optimizer.allocation);
        t.trajectory = proposed.rate_trajectory;
        t.final_rate = proposed.final_rate();
        t.baseline_rate = baseline.final_rate();
        t.iterations = proposed.iterations_used;
        t.termination = proposed.termination;
        t.ok = true;
    } catch (const SingularChannel& e) {
        t.error = "singular";
    }
    return t;
}

/// Trials run concurrently; results come back in trial order.
inline std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg, const RhsGeometry& g, std::uint64_t seed) {
    std::vector<std::future<TrialOutcome>> jobs;
    for (std::size_t t = 0; t < cfg.experiment.trials; ++t)
        jobs.push_back(std::async(std::launch::async, [&, t] { return run_trial(cfg, g, seed, t); }));
    std::vector<TrialOutcome> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

inline std::vector<TrialOutcome> run_optimize(const ExperimentConfig& cfg, std::uint64_t seed) {
    return run_trials(cfg, cfg.geometry.build(), seed);
}

inline bool all_failed(const std::vector<TrialOutcome>& trials) {
    return std::none_of(trials.begin(), trials.end(), [](const TrialOutcome& t) { return t.ok; });
}

inline void write_optimize_summary_csv(std::ostream& os, const std::vector<TrialOutcome>& trials) {
    os << "seed,final_rate,baseline_rate,iterations,status\n";
    for (const auto& t : trials) {
        os << t.seed << ',';
        if (t.ok)
            os << format_fixed6(t.final_rate) << ',' << format_fixed6(t.baseline_rate) << ',' << t.iterations << ','
               << to_string(t.termination) << '\n';
        else
            os << ",,," << t.error << '\n';
    }
}

inline void write_convergence_csv(std::ostream& os, const TrialOutcome& t) {
    os << "iter,sum_rate\n";
    for (std::size_t i = 0; i < t.trajectory.size(); ++i) os << i << ',' << format_fixed6(t.trajectory[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Size sweep (M = N)

struct SweepPoint {
    std::size_t M = 0;
    double proposed_mean = 0.0;
    double baseline_mean = 0.0;
    double proposed_std = 0.0;  // sample standard deviation, 0 for a single trial
    std::size_t trials = 0;     // successful trials
    std::vector<TrialOutcome> outcomes;
};

inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes,
                                         std::uint64_t seed) {
    if (sizes.empty()) throw InvalidArgument("sweep needs at least one size");
    for (auto M : sizes)
        if (M < 2) throw InvalidArgument("sweep sizes must be >= 2");
    std::vector<SweepPoint> out;
    for (auto M : sizes) {
        SweepPoint p;
        p.M = M;
        p.outcomes = run_trials(cfg, cfg.geometry.build(M, M, cfg.geometry.feeds), seed);
        std::vector<double> rates;
        for (const auto& t : p.outcomes) {
            if (!t.ok) continue;
            rates.push_back(t.final_rate);
            p.baseline_mean += t.baseline_rate;
        }
        p.trials = rates.size();
        if (p.trials > 0) {
            for (double r : rates) p.proposed_mean += r;
            p.proposed_mean /= static_cast<double>(p.trials);
            p.baseline_mean /= static_cast<double>(p.trials);
            if (p.trials > 1) {
                double ss = 0.0;
                for (double r : rates) ss += (r - p.proposed_mean) * (r - p.proposed_mean);
                p.proposed_std = std::sqrt(ss / static_cast<double>(p.trials - 1));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    os << "M,rate_proposed_mean,rate_baseline_mean,rate_proposed_std,trials\n";
    for (const auto& p : points)
        os << p.M << ',' << format_fixed6(p.proposed_mean) << ',' << format_fixed6(p.baseline_mean) << ','
           << format_fixed6(p.proposed_std) << ',' << p.trials << '\n';
}

// ---------------------------------------------------------------------------
// Exhaustive amplitude-grid check on tiny surfaces

struct GridInstance {
    std::uint64_t seed = 0;
    double grid_best = 0.0;
    double optimizer_rate = 0.0;
    double ratio = 0.0;
    HolographicAmplitudes grid_argmax;
};

struct GridcheckResult {
    std::vector<GridInstance> instances;
    double median_ratio = 0.0;
    bool passed = false;
};

inline DownlinkModel gridcheck_model(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t instance) {
    const auto& gc = cfg.gridcheck;
    GeometrySettings gs = cfg.geometry;
    gs.feed_positions.clear();
    const RhsGeometry g = gs.build(gc.rows, gc.cols, gc.feeds);
    ChannelConfig ch = cfg.channel;
    ch.num_users = gc.users;
    auto rng = trial_rng(seed, instance);
    return DownlinkModel(g, generate_channel(g, ch, rng), cfg.budget);
}

/// Best sum rate over every amplitude vector on the uniform grid {0, 1/(n-1), ..., 1}^MN.
inline std::pair<double, HolographicAmplitudes> grid_search(const DownlinkModel& model, std::size_t levels,
                                                            PowerAllocation alloc) {
    const std::size_t E = model.num_elements();
    std::size_t total = 1;
    for (std::size_t e = 0; e < E; ++e) total *= levels;
    double best = -1.0;
    HolographicAmplitudes arg = HolographicAmplitudes::constant(E, 0.0);
    Eigen::VectorXd m(static_cast<Eigen::Index>(E));
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t x = i;
        for (std::size_t e = 0; e < E; ++e, x /= levels)
            m[static_cast<Eigen::Index>(e)] = static_cast<double>(x % levels) / static_cast<double>(levels - 1);
        try {
            HolographicAmplitudes a(m);
            const double r = model.rate(a, model.zero_forcing(a, alloc));
            if (r > best) best = r, arg = a;
        } catch (const SingularChannel&) {
        }
    }
    return {best, arg};
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline GridcheckResult run_gridcheck(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto& gc = cfg.gridcheck;
    if (gc.rows * gc.cols > GridcheckSettings::kMaxElements)
        throw InvalidArgument("gridcheck is limited to " + std::to_string(GridcheckSettings::kMaxElements) +
                              " elements (got " + std::to_string(gc.rows * gc.cols) + ")");
    if (gc.users > gc.feeds) throw InvalidArgument("gridcheck.users must not exceed gridcheck.feeds");

    std::vector<std::future<GridInstance>> jobs;
    for (std::size_t i = 0; i < gc.instances; ++i) {
        jobs.push_back(std::async(std::launch::async, [&, i] {
            const DownlinkModel model = gridcheck_model(cfg, seed, i);
            GridInstance inst;
            inst.seed = seed ^ i;
            std::tie(inst.grid_best, inst.grid_argmax) = grid_search(model, gc.levels, cfg.optimizer.allocation);
            try {
                inst.optimizer_rate = optimize(model, cfg.optimizer).final_rate();
            } catch (const SingularChannel&) {
                inst.optimizer_rate = 0.0;
            }
            inst.ratio = inst.grid_best > 0.0 ? inst.optimizer_rate / inst.grid_best : 0.0;
            return inst;
        }));
    }
    GridcheckResult out;
    std::vector<double> ratios;
    for (auto& j : jobs) {
        out.instances.push_back(j.get());
        ratios.push_back(out.instances.back().ratio);
    }
    out.median_ratio = median(ratios);
    out.passed = out.median_ratio >= gc.threshold;
    return out;
}

inline void write_gridcheck_csv(std::ostream& os, const GridcheckResult& r) {
    os << "seed,grid_best_rate,optimizer_rate,ratio\n";
    for (const auto& i : r.instances)
        os << i.seed << ',' << format_fixed6(i.grid_best) << ',' << format_fixed6(i.optimizer_rate) << ','
           << format_fixed6(i.ratio) << '\n';
}

// ---------------------------------------------------------------------------
// Minimal SVG line charts

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

inline void write_svg_chart(std::ostream& os, const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, const std::vector<SvgSeries>& series) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
          "font-size=\"12\">\n<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">", W / 2);
    os << buf << title << "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#888\"/>\n",
                  L, T, W - L - R, H - T - B);
    os << buf;
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%g\" text-anchor=\"middle\">%.4g</text>\n", px(xv),
                      H - B + 16, xv);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n", L - 6, py(yv) + 4,
                      yv);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">", W / 2, H - 12);
    os << buf << xlabel << "</text>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">",
                  H / 2, H / 2);
    os << buf << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(s.x[i]), py(s.y[i]));
            os << buf;
        }
        os << "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" fill=\"%s\">", W - R - 150, T + 16 + 16.0 * k,
                      s.color.c_str());
        os << buf << s.label << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace rhs
