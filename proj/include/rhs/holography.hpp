#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rhs/errors.hpp"
#include "rhs/geometry.hpp"

namespace rhs {

using cdouble = std::complex<double>;

/// Per-element radiation amplitudes, row-major over the surface, each in [0, 1].
class HolographicAmplitudes {
public:
    HolographicAmplitudes() = default;

    explicit HolographicAmplitudes(Eigen::VectorXd values) : values_(std::move(values)) {
        for (Eigen::Index i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!(v >= 0.0 && v <= 1.0))
                throw InvalidArgument("holographic amplitude " + std::to_string(i) +
                                      " outside [0, 1]: " + std::to_string(v));
        }
    }

    static HolographicAmplitudes constant(std::size_t size, double value) {
        return HolographicAmplitudes(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(size), value));
    }

    const Eigen::VectorXd& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

    friend bool operator==(const HolographicAmplitudes& a, const HolographicAmplitudes& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Eigen::VectorXd values_;
};

// ---------------------------------------------------------------------------
// Hologram construction

/// Real part of the object/reference interferogram at element (m, n) for feed k.
inline double interference_real(const RhsGeometry& g, std::size_t k, std::size_t m, std::size_t n,
                                const Direction& dir) {
    return std::cos(object_phase(g, m, n, dir) - reference_phase(g, k, m, n));
}

/// Interferogram mapped to a radiation amplitude in [0, 1].
inline double hologram_amplitude(const RhsGeometry& g, std::size_t k, std::size_t m, std::size_t n,
                            const Direction& dir) {
    return (interference_real(g, k, m, n, dir) + 1.0) / 2.0;
}

struct WeightedBeam {
    Direction direction;
    double weight = 1.0;
};

/// Weighted average of single-beam holograms toward each requested direction.
inline HolographicAmplitudes multibeam_pattern(const RhsGeometry& g, std::size_t k,
                                               std::span<const WeightedBeam> beams) {
    if (beams.empty()) throw InvalidArgument("multibeam pattern needs at least one beam");
    double total = 0.0;
    for (const auto& b : beams) {
        if (!(b.weight >= 0.0)) throw InvalidArgument("beam weights must be nonnegative");
        b.direction.validate();
        total += b.weight;
    }
    if (!(total > 0.0)) throw InvalidArgument("beam weights are all zero");
    g.feed(k);

    Eigen::VectorXd out(static_cast<Eigen::Index>(g.num_elements()));
    for (std::size_t m = 0; m < g.rows(); ++m) {
        for (std::size_t n = 0; n < g.cols(); ++n) {
            double acc = 0.0;
            for (const auto& b : beams) acc += b.weight * hologram_amplitude(g, k, m, n, b.direction);
            out[static_cast<Eigen::Index>(g.flat_index(m, n))] = std::clamp(acc / total, 0.0, 1.0);
        }
    }
    return HolographicAmplitudes(std::move(out));
}

/// Equal-weight hologram toward every direction, averaged over all feeds.
/// Multi-feed surfaces share one amplitude per element, so each feed's
/// interferogram contributes equally.
inline HolographicAmplitudes superposition_pattern(const RhsGeometry& g,
                                                   std::span<const Direction> directions) {
    if (directions.empty()) throw InvalidArgument("superposition needs at least one direction");
    std::vector<WeightedBeam> beams;
    beams.reserve(directions.size());
    for (const auto& d : directions) beams.push_back({d, 1.0});
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_elements()));
    for (std::size_t k = 0; k < g.num_feeds(); ++k) acc += multibeam_pattern(g, k, beams).values();
    acc /= static_cast<double>(g.num_feeds());
    return HolographicAmplitudes(acc.cwiseMax(0.0).cwiseMin(1.0));
}

// ---------------------------------------------------------------------------
// PIN-diode quantization

enum class PinMode { ideal, measured };

/// Binary element states. OFF diodes radiate (off_weight), ON diodes are
/// detuned (on_weight). Weights are field amplitudes.
struct PinState {
    std::vector<std::uint8_t> off;  // 1 = diode OFF (radiating)
    PinMode mode = PinMode::ideal;
    double off_weight = 1.0;
    double on_weight = 0.0;

    /// Field amplitudes from the measured radiation efficiencies
    /// (~37 % OFF, ~13 % ON at 12 GHz).
    static constexpr double kMeasuredOffEfficiency = 0.37;
    static constexpr double kMeasuredOnEfficiency = 0.13;

    static std::pair<double, double> weights_for(PinMode mode) {
        if (mode == PinMode::measured)
            return {std::sqrt(kMeasuredOffEfficiency), std::sqrt(kMeasuredOnEfficiency)};
        return {1.0, 0.0};
    }

    Eigen::VectorXd element_weights() const {
        Eigen::VectorXd w(static_cast<Eigen::Index>(off.size()));
        for (std::size_t i = 0; i < off.size(); ++i)
            w[static_cast<Eigen::Index>(i)] = off[i] ? off_weight : on_weight;
        return w;
    }
};

inline PinState quantize_pin(const HolographicAmplitudes& amps, double threshold,
                             PinMode mode = PinMode::ideal) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InvalidArgument("PIN threshold must lie in (0, 1): " + std::to_string(threshold));
    PinState s;
    s.mode = mode;
    std::tie(s.off_weight, s.on_weight) = PinState::weights_for(mode);
    s.off.resize(amps.size());
    for (std::size_t i = 0; i < amps.size(); ++i) s.off[i] = amps[i] > threshold ? 1 : 0;
    return s;
}

// ---------------------------------------------------------------------------
// Far field

/// Complex far-field sum over feeds (outer) and row-major elements (inner).
inline cdouble array_factor(const RhsGeometry& g, const Eigen::Ref<const Eigen::VectorXd>& element_weights,
                            const Eigen::Ref<const Eigen::VectorXcd>& feed_excitations, const Direction& dir) {
    if (static_cast<std::size_t>(element_weights.size()) != g.num_elements())
        throw InvalidArgument("element weight vector length does not match the surface");
    if (static_cast<std::size_t>(feed_excitations.size()) != g.num_feeds())
        throw InvalidArgument("feed excitation vector length does not match the feed count");
    if ((element_weights.array() < 0.0).any()) throw InvalidArgument("element weights must be nonnegative");
    const cdouble j(0.0, 1.0);
    cdouble total = 0.0;
    for (std::size_t k = 0; k < g.num_feeds(); ++k) {
        cdouble per_feed = 0.0;
        for (std::size_t m = 0; m < g.rows(); ++m) {
            for (std::size_t n = 0; n < g.cols(); ++n) {
                const double w = element_weights[static_cast<Eigen::Index>(g.flat_index(m, n))];
                per_feed += w * reference_amplitude(g, k, m, n) *
                            std::exp(j * (object_phase(g, m, n, dir) - reference_phase(g, k, m, n)));
            }
        }
        total += feed_excitations[static_cast<Eigen::Index>(k)] * per_feed;
    }
    return total;
}

/// Normalized pattern over a list of directions. `shape` is {rows, cols} when
/// the grid is a row-major 2-D raster; empty for an ordered 1-D cut.
struct RadiationPattern {
    std::vector<Direction> grid;
    std::vector<double> gains_db;
    std::size_t raster_rows = 0;
    std::size_t raster_cols = 0;

    bool is_raster() const noexcept { return raster_rows > 0 && raster_cols > 0; }
};

inline constexpr double kGainFloorDb = -300.0;

inline RadiationPattern radiation_pattern(const RhsGeometry& g,
                                          const Eigen::Ref<const Eigen::VectorXd>& element_weights,
                                          const Eigen::Ref<const Eigen::VectorXcd>& feed_excitations,
                                          std::span<const Direction> grid) {
    if (grid.empty()) throw InvalidArgument("radiation pattern grid is empty");
    RadiationPattern out;
    out.grid.assign(grid.begin(), grid.end());
    std::vector<double> mag(grid.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        mag[i] = std::abs(array_factor(g, element_weights, feed_excitations, grid[i]));
        peak = std::max(peak, mag[i]);
    }
    if (!(peak > 0.0)) throw InvalidArgument("array factor vanishes over the whole grid");
    out.gains_db.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.gains_db[i] = mag[i] > 0.0 ? std::max(20.0 * std::log10(mag[i] / peak), kGainFloorDb) : kGainFloorDb;
    return out;
}

/// Signed-angle cut through a line surface, start + i * step for i = 0..count-1.
inline std::vector<Direction> line_grid(const RhsGeometry& g, double start_deg, double stop_deg, double step_deg) {
    if (!(step_deg > 0.0) || stop_deg < start_deg) throw InvalidArgument("bad angle grid");
    const auto count = static_cast<std::size_t>(std::floor((stop_deg - start_deg) / step_deg + 1e-9)) + 1;
    std::vector<Direction> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(line_direction(g, start_deg + static_cast<double>(i) * step_deg));
    return out;
}

/// Requested more lobes than the pattern has local maxima.
class LobeShortfall : public std::runtime_error {
public:
    LobeShortfall(std::size_t requested, std::vector<Direction> found)
        : std::runtime_error("pattern has " + std::to_string(found.size()) + " local maxima, " +
                             std::to_string(requested) + " requested"),
          found_(std::move(found)) {}

    const std::vector<Direction>& found() const noexcept { return found_; }

private:
    std::vector<Direction> found_;
};

/// Indices of local maxima, sorted by gain (descending, ties by index).
/// 1-D cuts: interior points strictly above both neighbors.
/// Rasters: points strictly above every existing 4-neighbor.
inline std::vector<std::size_t> local_maxima(const RadiationPattern& p) {
    std::vector<std::size_t> idx;
    const auto& g = p.gains_db;
    if (p.is_raster()) {
        const std::size_t R = p.raster_rows, C = p.raster_cols;
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t i = r * C + c;
                bool peak = true;
                if (r > 0) peak &= g[i] > g[i - C];
                if (r + 1 < R) peak &= g[i] > g[i + C];
                if (c > 0) peak &= g[i] > g[i - 1];
                if (c + 1 < C) peak &= g[i] > g[i + 1];
                if (peak) idx.push_back(i);
            }
        }
    } else {
        for (std::size_t i = 1; i + 1 < g.size(); ++i)
            if (g[i] > g[i - 1] && g[i] > g[i + 1]) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
    return idx;
}

inline std::vector<Direction> find_main_lobes(const RadiationPattern& p, std::size_t count) {
    if (count < 1) throw InvalidArgument("lobe count must be >= 1");
    const auto idx = local_maxima(p);
    std::vector<Direction> dirs;
    for (std::size_t i = 0; i < std::min(count, idx.size()); ++i) dirs.push_back(p.grid[idx[i]]);
    if (idx.size() < count) throw LobeShortfall(count, std::move(dirs));
    return dirs;
}

inline std::string format_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    if (s == "-0.000000") s = "0.000000";
    return s;
}

/// CSV with columns theta_deg, phi_deg, gain_db.
inline void write_pattern_csv(std::ostream& os, const RadiationPattern& p) {
    os << "theta_deg,phi_deg,gain_db\n";
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        os << format_fixed6(rad2deg(p.grid[i].theta)) << ',' << format_fixed6(rad2deg(p.grid[i].phi)) << ','
           << format_fixed6(p.gains_db[i]) << '\n';
}

}  // namespace rhs
