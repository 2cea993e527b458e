#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rhs/errors.hpp"

namespace rhs {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, exact
inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Point on the surface plane, meters.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Far-field direction. theta is measured from broadside (0 = surface normal),
/// phi is the azimuth in the surface plane measured from the x axis.
struct Direction {
    double theta = 0.0;  // [0, pi/2]
    double phi = 0.0;    // [0, 2 pi)

    static Direction from_degrees(double theta_deg, double phi_deg) {
        Direction d{deg2rad(theta_deg), deg2rad(phi_deg)};
        d.validate();
        return d;
    }

    void validate() const {
        if (!(theta >= 0.0 && theta <= kPi / 2.0 + 1e-12))
            throw InvalidArgument("direction theta outside [0, pi/2]: " + std::to_string(theta));
        if (!(phi >= 0.0 && phi < 2.0 * kPi))
            throw InvalidArgument("direction phi outside [0, 2pi): " + std::to_string(phi));
    }

    friend bool operator==(const Direction&, const Direction&) = default;
};

/// Planar holographic surface: an M x N grid of radiation elements sitting on a
/// guiding structure excited by K embedded feeds. Element (m, n) sits at
/// (m * spacing_x, n * spacing_y); feed positions share that coordinate frame.
class RhsGeometry {
public:
    /// Spacing used when none is given: a fraction of the free-space wavelength.
    /// At lambda/5.5 and a guide index of 1.5 every spurious order of the
    /// amplitude hologram stays in invisible space for all steering angles.
    static constexpr double kDefaultSpacingWavelengths = 1.0 / 5.5;
    static constexpr double kDefaultWaveguideIndex = 1.5;

    RhsGeometry(std::size_t rows, std::size_t cols, double spacing_x, double spacing_y,
                std::vector<Point2> feeds, double carrier_frequency,
                double waveguide_index = kDefaultWaveguideIndex, double attenuation = 0.0)
        : rows_(rows),
          cols_(cols),
          spacing_x_(spacing_x),
          spacing_y_(spacing_y),
          feeds_(std::move(feeds)),
          frequency_(carrier_frequency),
          waveguide_index_(waveguide_index),
          attenuation_(attenuation) {
        validate();
    }

    /// Surface with default spacing, guide index and the default feed layout:
    /// feeds spread evenly along the x = 0 edge, a lone feed sits at the origin.
    static RhsGeometry with_defaults(std::size_t rows, std::size_t cols, std::size_t feeds,
                                     double carrier_frequency) {
        if (!(carrier_frequency > 0.0))
            throw InvalidArgument("carrier frequency must be positive");
        const double spacing = kDefaultSpacingWavelengths * kSpeedOfLight / carrier_frequency;
        return RhsGeometry(rows, cols, spacing, spacing, default_feed_layout(cols, spacing, feeds),
                           carrier_frequency);
    }

    static std::vector<Point2> default_feed_layout(std::size_t cols, double spacing_y,
                                                   std::size_t feeds) {
        if (feeds == 0) throw InvalidArgument("at least one feed is required");
        std::vector<Point2> out(feeds);
        if (feeds == 1) return out;
        const double edge = static_cast<double>(cols - 1) * spacing_y;
        for (std::size_t k = 0; k < feeds; ++k)
            out[k] = {0.0, (static_cast<double>(k) + 0.5) * edge / static_cast<double>(feeds)};
        return out;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t num_elements() const noexcept { return rows_ * cols_; }
    std::size_t num_feeds() const noexcept { return feeds_.size(); }
    double spacing_x() const noexcept { return spacing_x_; }
    double spacing_y() const noexcept { return spacing_y_; }
    const std::vector<Point2>& feeds() const noexcept { return feeds_; }
    const Point2& feed(std::size_t k) const {
        if (k >= feeds_.size()) throw InvalidIndex("feed index " + std::to_string(k) + " out of range");
        return feeds_[k];
    }
    double carrier_frequency() const noexcept { return frequency_; }
    double waveguide_index() const noexcept { return waveguide_index_; }
    double attenuation() const noexcept { return attenuation_; }
    double wavelength() const noexcept { return kSpeedOfLight / frequency_; }

    /// Row-major flat index of element (m, n).
    std::size_t flat_index(std::size_t m, std::size_t n) const {
        check_element(m, n);
        return m * cols_ + n;
    }

    void check_element(std::size_t m, std::size_t n) const {
        if (m >= rows_ || n >= cols_)
            throw InvalidIndex("element (" + std::to_string(m) + ", " + std::to_string(n) +
                               ") outside " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                               " surface");
    }

    /// A surface with a single row or column of elements.
    bool is_line() const noexcept { return rows_ == 1 || cols_ == 1; }

private:
    void validate() const {
        if (rows_ < 1 || cols_ < 1) throw InvalidArgument("surface needs at least one row and column");
        if (feeds_.empty()) throw InvalidArgument("at least one feed is required");
        if (!(spacing_x_ > 0.0) || !(spacing_y_ > 0.0)) throw InvalidArgument("element spacing must be positive");
        if (!(frequency_ > 0.0)) throw InvalidArgument("carrier frequency must be positive");
        if (!(waveguide_index_ >= 1.0)) throw InvalidArgument("waveguide index must be >= 1");
        if (!(attenuation_ >= 0.0)) throw InvalidArgument("attenuation must be >= 0");
        const double xmax = static_cast<double>(rows_ - 1) * spacing_x_;
        const double ymax = static_cast<double>(cols_ - 1) * spacing_y_;
        const double slack = 1e-12 * (1.0 + xmax + ymax);
        for (const auto& f : feeds_) {
            if (f.x < -slack || f.x > xmax + slack || f.y < -slack || f.y > ymax + slack)
                throw InvalidArgument("feed position outside the surface bounding box");
        }
    }

    std::size_t rows_;
    std::size_t cols_;
    double spacing_x_;
    double spacing_y_;
    std::vector<Point2> feeds_;
    double frequency_;
    double waveguide_index_;
    double attenuation_;
};

inline double free_space_wavenumber(const RhsGeometry& g) {
    return 2.0 * kPi * g.carrier_frequency() / kSpeedOfLight;
}

inline Point2 element_position(const RhsGeometry& g, std::size_t m, std::size_t n) {
    g.check_element(m, n);
    return {static_cast<double>(m) * g.spacing_x(), static_cast<double>(n) * g.spacing_y()};
}

inline double feed_distance(const RhsGeometry& g, std::size_t k, std::size_t m, std::size_t n) {
    return distance(g.feed(k), element_position(g, m, n));
}

/// Travel phase of the guided reference wave from feed k to element (m, n).
inline double reference_phase(const RhsGeometry& g, std::size_t k, std::size_t m, std::size_t n) {
    return g.waveguide_index() * free_space_wavenumber(g) * feed_distance(g, k, m, n);
}

/// Free-space phase of a plane wave toward `dir`, projected on element (m, n).
inline double object_phase(const RhsGeometry& g, std::size_t m, std::size_t n, const Direction& dir) {
    const Point2 r = element_position(g, m, n);
    const double st = std::sin(dir.theta);
    return free_space_wavenumber(g) * (r.x * st * std::cos(dir.phi) + r.y * st * std::sin(dir.phi));
}

/// Field decay of the reference wave along the guide, exp(-alpha d).
inline double reference_amplitude(const RhsGeometry& g, std::size_t k, std::size_t m, std::size_t n) {
    return std::exp(-g.attenuation() * feed_distance(g, k, m, n));
}

/// Maps a signed angle in the plane of a line surface to a Direction:
/// positive angles lean toward +axis (phi = 0 along x, pi/2 along y), negative
/// angles toward -axis. Lines along x are the default for 1 x 1 surfaces.
inline Direction line_direction(const RhsGeometry& g, double signed_deg) {
    if (!(signed_deg >= -90.0 && signed_deg <= 90.0))
        throw InvalidArgument("line angle outside [-90, 90] degrees: " + std::to_string(signed_deg));
    const bool along_y = g.rows() == 1 && g.cols() > 1;
    const double base = along_y ? kPi / 2.0 : 0.0;
    const double phi = signed_deg < 0.0 ? base + kPi : base;
    return Direction{deg2rad(std::abs(signed_deg)), phi};
}

/// Inverse of line_direction.
inline double signed_line_angle_deg(const RhsGeometry& g, const Direction& d) {
    const bool along_y = g.rows() == 1 && g.cols() > 1;
    const double base = along_y ? kPi / 2.0 : 0.0;
    const double deg = rad2deg(d.theta);
    return std::abs(d.phi - base) < 1e-9 ? deg : -deg;
}

}  // namespace rhs
