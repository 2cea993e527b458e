#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rhs/errors.hpp"
#include "rhs/geometry.hpp"

namespace rhs {

using cdouble = std::complex<double>;

/// Geometric Rician multipath model. Defaults: 10 dB K-factor, three
/// scattered paths, d^-2.7 pathloss relative to the nearest user.
struct ChannelConfig {
    std::size_t num_users = 3;
    std::size_t path_count = 3;
    double rician_factor_db = 10.0;  // +inf gives a pure line-of-sight channel
    double pathloss_exponent = 2.7;
    double distance_min = 20.0;  // meters; user distances ~ U[min, max]
    double distance_max = 100.0;
    double theta_max_deg = 60.0;  // user and scatterer directions ~ U[0, theta_max]
    std::uint64_t seed = 1;

    void validate() const {
        if (num_users < 1) throw InvalidArgument("channel needs at least one user");
        if (path_count < 1) throw InvalidArgument("channel needs at least one scattered path");
        if (std::isnan(rician_factor_db) || rician_factor_db == -std::numeric_limits<double>::infinity())
            throw InvalidArgument("rician factor must be a number of dB");
        if (!(pathloss_exponent >= 0.0)) throw InvalidArgument("pathloss exponent must be >= 0");
        if (!(distance_min > 0.0) || !(distance_max >= distance_min))
            throw InvalidArgument("user distance range must satisfy 0 < min <= max");
        if (!(theta_max_deg >= 0.0 && theta_max_deg <= 90.0))
            throw InvalidArgument("theta_max must lie in [0, 90] degrees");
    }
};

struct PropagationPath {
    Direction direction;
    double power = 0.0;  // share of the user's channel energy carried by this path
};

/// L x (M*N) element-to-user channel. Row l is h_l. Path metadata is kept when
/// the matrix was generated (not when loaded from a dump).
struct ChannelMatrix {
    Eigen::MatrixXcd entries;
    std::vector<std::vector<PropagationPath>> paths;

    std::size_t num_users() const noexcept { return static_cast<std::size_t>(entries.rows()); }
    std::size_t num_elements() const noexcept { return static_cast<std::size_t>(entries.cols()); }
};

/// exp(+j * object_phase) for every element, row-major.
inline Eigen::VectorXcd steering_vector(const RhsGeometry& g, const Direction& dir) {
    dir.validate();
    Eigen::VectorXcd a(static_cast<Eigen::Index>(g.num_elements()));
    for (std::size_t m = 0; m < g.rows(); ++m)
        for (std::size_t n = 0; n < g.cols(); ++n)
            a[static_cast<Eigen::Index>(g.flat_index(m, n))] = std::polar(1.0, object_phase(g, m, n, dir));
    return a;
}

/// Per-trial generator: substream seeded with seed XOR trial index.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) { return std::mt19937_64(seed ^ trial); }

namespace detail {

inline Direction draw_direction(const RhsGeometry& g, double theta_max, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Direction d;
    d.theta = deg2rad(theta_max) * u01(rng);
    if (g.is_line()) {
        d.phi = (g.rows() == 1 && g.cols() > 1) ? kPi / 2.0 : 0.0;
    } else {
        d.phi = 2.0 * kPi * u01(rng);
        if (d.phi >= 2.0 * kPi) d.phi = 0.0;
    }
    return d;
}

}  // namespace detail

/// h_l = sqrt(beta_l) * ( sqrt(K/(1+K)) a(los_l) + sqrt(1/(1+K)) sum_p g_p/sqrt(P) a(dir_p) ).
/// Draw order per user: distance, line-of-sight direction, then (direction, gain) per path.
inline ChannelMatrix generate_channel(const RhsGeometry& g, const ChannelConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const std::size_t L = cfg.num_users, P = cfg.path_count;
    std::uniform_real_distribution<double> dist(cfg.distance_min, cfg.distance_max);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));

    const bool pure_los = std::isinf(cfg.rician_factor_db);
    const double kappa = pure_los ? 0.0 : std::pow(10.0, cfg.rician_factor_db / 10.0);
    const double los_w = pure_los ? 1.0 : std::sqrt(kappa / (1.0 + kappa));
    const double nlos_w = pure_los ? 0.0 : std::sqrt(1.0 / (1.0 + kappa));

    std::vector<double> distances(L);
    std::vector<Direction> los(L);
    std::vector<std::vector<Direction>> dirs(L, std::vector<Direction>(P));
    std::vector<std::vector<cdouble>> gains(L, std::vector<cdouble>(P));
    for (std::size_t l = 0; l < L; ++l) {
        distances[l] = dist(rng);
        los[l] = detail::draw_direction(g, cfg.theta_max_deg, rng);
        for (std::size_t p = 0; p < P; ++p) {
            dirs[l][p] = detail::draw_direction(g, cfg.theta_max_deg, rng);
            const double re = gauss(rng);
            const double im = gauss(rng);
            gains[l][p] = {re, im};
        }
    }
    double nearest = distances[0];
    for (double d : distances) nearest = std::min(nearest, d);

    ChannelMatrix out;
    out.entries = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(g.num_elements()));
    out.paths.resize(L);
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(P));
    for (std::size_t l = 0; l < L; ++l) {
        const double beta = std::pow(distances[l] / nearest, -cfg.pathloss_exponent);
        Eigen::VectorXcd h = los_w * steering_vector(g, los[l]);
        out.paths[l].push_back({los[l], beta * los_w * los_w});
        if (!pure_los) {
            for (std::size_t p = 0; p < P; ++p) {
                h += (nlos_w * inv_sqrt_p * gains[l][p]) * steering_vector(g, dirs[l][p]);
                out.paths[l].push_back({dirs[l][p], beta * std::norm(nlos_w * inv_sqrt_p * gains[l][p])});
            }
        }
        out.entries.row(static_cast<Eigen::Index>(l)) = std::sqrt(beta) * h.transpose();
    }
    return out;
}

/// Strongest arrival direction of each user. Without path metadata the
/// direction is estimated by a matched-filter scan over a 0.5 degree grid.
inline std::vector<Direction> dominant_directions(const RhsGeometry& g, const ChannelMatrix& H) {
    std::vector<Direction> out;
    out.reserve(H.num_users());
    if (H.paths.size() == H.num_users()) {
        for (const auto& user : H.paths) {
            std::size_t best = 0;
            for (std::size_t p = 1; p < user.size(); ++p)
                if (user[p].power > user[best].power) best = p;
            out.push_back(user.at(best).direction);
        }
        return out;
    }
    std::vector<Direction> scan;
    if (g.is_line()) {
        const double base = (g.rows() == 1 && g.cols() > 1) ? kPi / 2.0 : 0.0;
        for (int t = 0; t <= 180; ++t) {
            scan.push_back({deg2rad(0.5 * t), base});
            if (t > 0) scan.push_back({deg2rad(0.5 * t), base + kPi});
        }
    } else {
        for (int t = 0; t <= 180; ++t)
            for (int p = 0; p < 720; ++p) scan.push_back({deg2rad(0.5 * t), deg2rad(0.5 * p)});
    }
    for (std::size_t l = 0; l < H.num_users(); ++l) {
        double best = -1.0;
        Direction arg{};
        for (const auto& d : scan) {
            const double c = std::abs(H.entries.row(static_cast<Eigen::Index>(l)).transpose().dot(steering_vector(g, d)));
            if (c > best) best = c, arg = d;
        }
        out.push_back(arg);
    }
    return out;
}

/// Dump with columns user, element, re, im (17 significant digits, exact round trip).
inline void write_channel_csv(std::ostream& os, const ChannelMatrix& H) {
    os << "user,element,re,im\n";
    char buf[128];
    for (Eigen::Index l = 0; l < H.entries.rows(); ++l) {
        for (Eigen::Index e = 0; e < H.entries.cols(); ++e) {
            std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g\n", static_cast<long>(l), static_cast<long>(e),
                          H.entries(l, e).real(), H.entries(l, e).imag());
            os << buf;
        }
    }
}

inline ChannelMatrix read_channel_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("user,element,re,im", 0) != 0)
        throw InvalidArgument("channel csv: missing header 'user,element,re,im'");
    struct Entry {
        long user, element;
        double re, im;
    };
    std::vector<Entry> rows;
    long max_user = -1, max_elem = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ss(line);
        Entry e{};
        if (!(ss >> e.user >> e.element >> e.re >> e.im) || e.user < 0 || e.element < 0)
            throw InvalidArgument("channel csv: malformed row '" + line + "'");
        max_user = std::max(max_user, e.user);
        max_elem = std::max(max_elem, e.element);
        rows.push_back(e);
    }
    if (rows.empty()) throw InvalidArgument("channel csv: no entries");
    ChannelMatrix H;
    H.entries = Eigen::MatrixXcd::Zero(max_user + 1, max_elem + 1);
    std::vector<char> seen(static_cast<std::size_t>((max_user + 1) * (max_elem + 1)), 0);
    for (const auto& e : rows) {
        auto& flag = seen[static_cast<std::size_t>(e.user * (max_elem + 1) + e.element)];
        if (flag) throw InvalidArgument("channel csv: duplicate entry");
        flag = 1;
        H.entries(e.user, e.element) = {e.re, e.im};
    }
    for (char f : seen)
        if (!f) throw InvalidArgument("channel csv: missing entries");
    return H;
}

}  // namespace rhs
