#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rhs/beamforming.hpp"
#include "rhs/channel.hpp"
#include "rhs/errors.hpp"
#include "rhs/fp_optimizer.hpp"
#include "rhs/geometry.hpp"
#include "rhs/holography.hpp"

namespace rhs {

/// Flat `block.key = value` text file. `#` starts a comment; blank lines are ignored.
class KeyValueFile {
public:
    static KeyValueFile parse(std::istream& is) {
        KeyValueFile f;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
            if (!f.values_.emplace(key, value).second)
                throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        return f;
    }

    static KeyValueFile parse_string(const std::string& text) {
        std::istringstream ss(text);
        return parse(ss);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_double(key, it->second);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_u64(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw InvalidArgument("config key '" + key + "': expected a boolean, got '" + it->second + "'");
    }

    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : parse_number_list(it->second, key);
    }

    /// Keys present in the file that were never read.
    std::vector<std::string> unused_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    static std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
        std::vector<double> out;
        std::string item;
        std::istringstream ss(text);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) throw InvalidArgument(what + ": empty list item");
            out.push_back(to_double(what, item));
        }
        return out;
    }

    static double to_double(const std::string& key, const std::string& text) {
        if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (text.empty() || *end != '\0' || errno == ERANGE || std::isnan(v))
            throw InvalidArgument("config key '" + key + "': expected a number, got '" + text + "'");
        return v;
    }

    static std::uint64_t to_u64(const std::string& key, const std::string& text) {
        errno = 0;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
        if (text.empty() || text[0] == '-' || *end != '\0' || errno == ERANGE)
            throw InvalidArgument("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
        return v;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

struct GeometrySettings {
    std::size_t rows = 8;
    std::size_t cols = 8;
    std::size_t feeds = 4;
    double frequency_hz = 12e9;
    std::optional<double> spacing_x;  // meters; default lambda/5.5
    std::optional<double> spacing_y;
    double waveguide_index = RhsGeometry::kDefaultWaveguideIndex;
    double attenuation = 0.0;
    std::vector<Point2> feed_positions;  // empty = default layout

    /// Surface of the given size using this block's physical parameters.
    RhsGeometry build(std::size_t r, std::size_t c, std::size_t k) const {
        const double lambda = kSpeedOfLight / frequency_hz;
        const double sx = spacing_x.value_or(RhsGeometry::kDefaultSpacingWavelengths * lambda);
        const double sy = spacing_y.value_or(RhsGeometry::kDefaultSpacingWavelengths * lambda);
        std::vector<Point2> feeds_at = feed_positions;
        if (feeds_at.empty()) {
            feeds_at = RhsGeometry::default_feed_layout(c, sy, k);
        } else if (feeds_at.size() != k) {
            throw InvalidArgument("geometry.feed_positions lists " + std::to_string(feeds_at.size()) +
                                  " feeds, expected " + std::to_string(k));
        }
        return RhsGeometry(r, c, sx, sy, std::move(feeds_at), frequency_hz, waveguide_index, attenuation);
    }

    RhsGeometry build() const { return build(rows, cols, feeds); }
};

struct PatternSettings {
    std::size_t elements = 16;
    std::vector<double> beams_deg{-3.0, 23.0};
    std::vector<double> weights;  // empty = equal
    std::string quantize = "none";  // none | pin-ideal | pin-measured
    double threshold = 0.5;
    double step_deg = 0.1;
};

struct ExperimentSettings {
    std::uint64_t seed = 1;
    std::size_t trials = 20;
    std::vector<std::size_t> sizes{4, 8, 12};
    std::string output_dir = "out";
};

struct GridcheckSettings {
    std::size_t rows = 2;
    std::size_t cols = 2;
    std::size_t feeds = 2;
    std::size_t users = 2;
    std::size_t instances = 20;
    std::size_t levels = 5;
    double threshold = 0.9;
    static constexpr std::size_t kMaxElements = 6;
};

struct ExperimentConfig {
    GeometrySettings geometry;
    ChannelConfig channel;
    LinkBudget budget{0.5, 1e-2};
    OptimizerConfig optimizer;
    ExperimentSettings experiment;
    PatternSettings pattern;
    GridcheckSettings gridcheck;

    void validate() const {
        geometry.build();
        channel.validate();
        budget.validate();
        optimizer.validate();
        if (experiment.trials < 1) throw InvalidArgument("experiment.trials must be >= 1");
        if (experiment.sizes.empty()) throw InvalidArgument("experiment.sizes must not be empty");
        for (auto s : experiment.sizes)
            if (s < 2) throw InvalidArgument("experiment.sizes entries must be >= 2");
        if (channel.num_users > geometry.feeds)
            throw InvalidArgument("channel.users must not exceed geometry.feeds (zero forcing)");
        if (pattern.elements < 1) throw InvalidArgument("pattern.elements must be >= 1");
        if (!(pattern.step_deg > 0.0)) throw InvalidArgument("pattern.step_deg must be positive");
        if (!(pattern.threshold > 0.0 && pattern.threshold < 1.0))
            throw InvalidArgument("pattern.threshold must lie in (0, 1)");
        if (pattern.quantize != "none" && pattern.quantize != "pin-ideal" && pattern.quantize != "pin-measured")
            throw InvalidArgument("pattern.quantize must be none, pin-ideal or pin-measured");
        if (!pattern.weights.empty() && pattern.weights.size() != pattern.beams_deg.size())
            throw InvalidArgument("pattern.weights must match pattern.beams in length");
        if (gridcheck.users > gridcheck.feeds) throw InvalidArgument("gridcheck.users must not exceed gridcheck.feeds");
        if (gridcheck.levels < 2) throw InvalidArgument("gridcheck.levels must be >= 2");
        if (gridcheck.instances < 1) throw InvalidArgument("gridcheck.instances must be >= 1");
    }
};

namespace detail {

inline std::size_t as_count(double v, const std::string& key) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) throw InvalidArgument(key + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

inline std::vector<Point2> parse_points(const std::string& text) {
    // "x:y; x:y; ..."
    std::vector<Point2> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidArgument("geometry.feed_positions: expected 'x:y' items");
        out.push_back({KeyValueFile::to_double("geometry.feed_positions", item.substr(0, colon)),
                       KeyValueFile::to_double("geometry.feed_positions", item.substr(colon + 1))});
    }
    return out;
}

inline std::string trim_copy(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads every known key; unknown keys are rejected so typos surface early.
inline ExperimentConfig load_experiment_config(KeyValueFile f) {
    ExperimentConfig c;
    auto count = [&](const std::string& key, std::size_t fallback) {
        return detail::as_count(f.get_double(key, static_cast<double>(fallback)), key);
    };

    auto& g = c.geometry;
    g.rows = count("geometry.rows", g.rows);
    g.cols = count("geometry.cols", g.cols);
    g.feeds = count("geometry.feeds", g.feeds);
    g.frequency_hz = f.get_double("geometry.frequency_hz", g.frequency_hz);
    if (f.has("geometry.spacing_x")) g.spacing_x = f.get_double("geometry.spacing_x", 0.0);
    if (f.has("geometry.spacing_y")) g.spacing_y = f.get_double("geometry.spacing_y", 0.0);
    g.waveguide_index = f.get_double("geometry.waveguide_index", g.waveguide_index);
    g.attenuation = f.get_double("geometry.attenuation", g.attenuation);
    g.feed_positions = detail::parse_points(f.get_string("geometry.feed_positions", ""));
    if (!(g.frequency_hz > 0.0)) throw InvalidArgument("geometry.frequency_hz must be positive");

    auto& ch = c.channel;
    ch.num_users = count("channel.users", ch.num_users);
    ch.path_count = count("channel.paths", ch.path_count);
    ch.rician_factor_db = f.get_double("channel.rician_factor_db", ch.rician_factor_db);
    ch.pathloss_exponent = f.get_double("channel.pathloss_exponent", ch.pathloss_exponent);
    ch.distance_min = f.get_double("channel.distance_min", ch.distance_min);
    ch.distance_max = f.get_double("channel.distance_max", ch.distance_max);
    ch.theta_max_deg = f.get_double("channel.theta_max_deg", ch.theta_max_deg);

    c.budget.transmit_power = f.get_double("budget.transmit_power", c.budget.transmit_power);
    c.budget.noise_power = f.get_double("budget.noise_power", c.budget.noise_power);

    auto& o = c.optimizer;
    o.max_outer_iterations = count("optimizer.max_iterations", o.max_outer_iterations);
    o.rate_tolerance = f.get_double("optimizer.tolerance", o.rate_tolerance);
    o.coordinate_passes = count("optimizer.passes", o.coordinate_passes);
    o.fp_rounds = count("optimizer.fp_rounds", o.fp_rounds);
    o.safeguard = f.get_bool("optimizer.safeguard", o.safeguard);
    o.line_search = f.get_bool("optimizer.line_search", o.line_search);
    const std::string init = f.get_string("optimizer.init", "superposition");
    if (init == "superposition") o.init_mode = InitMode::superposition;
    else if (init == "uniform_half") o.init_mode = InitMode::uniform_half;
    else throw InvalidArgument("optimizer.init must be superposition or uniform_half");
    const std::string alloc = f.get_string("optimizer.allocation", "equal");
    if (alloc == "equal") o.allocation = PowerAllocation::equal;
    else if (alloc == "waterfilling") o.allocation = PowerAllocation::waterfilling;
    else throw InvalidArgument("optimizer.allocation must be equal or waterfilling");

    auto& e = c.experiment;
    e.seed = f.get_u64("experiment.seed", e.seed);
    e.trials = count("experiment.trials", e.trials);
    if (f.has("experiment.sizes")) {
        e.sizes.clear();
        for (double s : f.get_list("experiment.sizes", {})) e.sizes.push_back(detail::as_count(s, "experiment.sizes"));
    }
    e.output_dir = f.get_string("experiment.output_dir", e.output_dir);

    auto& p = c.pattern;
    p.elements = count("pattern.elements", p.elements);
    p.beams_deg = f.get_list("pattern.beams", p.beams_deg);
    p.weights = f.get_list("pattern.weights", p.weights);
    p.quantize = detail::trim_copy(f.get_string("pattern.quantize", p.quantize));
    p.threshold = f.get_double("pattern.threshold", p.threshold);
    p.step_deg = f.get_double("pattern.step_deg", p.step_deg);

    auto& gc = c.gridcheck;
    gc.rows = count("gridcheck.rows", gc.rows);
    gc.cols = count("gridcheck.cols", gc.cols);
    gc.feeds = count("gridcheck.feeds", gc.feeds);
    gc.users = count("gridcheck.users", gc.users);
    gc.instances = count("gridcheck.instances", gc.instances);
    gc.levels = count("gridcheck.levels", gc.levels);
    gc.threshold = f.get_double("gridcheck.threshold", gc.threshold);

    if (const auto unused = f.unused_keys(); !unused.empty())
        throw InvalidArgument("unknown config key '" + unused.front() + "'");
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(std::istream& is) { return load_experiment_config(KeyValueFile::parse(is)); }

}  // namespace rhs
