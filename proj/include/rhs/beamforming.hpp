#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rhs/channel.hpp"
#include "rhs/errors.hpp"
#include "rhs/geometry.hpp"
#include "rhs/holography.hpp"

namespace rhs {

struct LinkBudget {
    double transmit_power = 0.5;  // W, applied to trace(V V^H)
    double noise_power = 1e-3;    // W

    void validate() const {
        if (!(transmit_power > 0.0)) throw InvalidArgument("transmit power must be positive");
        if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
    }
};

enum class PowerAllocation { equal, waterfilling };

/// K x L baseband precoder, one column per user stream.
struct DigitalBeamformer {
    Eigen::MatrixXcd matrix;

    double power() const { return matrix.squaredNorm(); }
};

/// (M*N) x K response of the surface: Q[e, k] = m_e * a_k(e) * exp(-j phi_k(e)).
struct HolographicResponse {
    Eigen::MatrixXcd matrix;
};

/// Amplitude-free part of the response, a_k(e) * exp(-j phi_k(e)).
inline Eigen::MatrixXcd feed_propagation(const RhsGeometry& g) {
    Eigen::MatrixXcd G(static_cast<Eigen::Index>(g.num_elements()), static_cast<Eigen::Index>(g.num_feeds()));
    for (std::size_t k = 0; k < g.num_feeds(); ++k)
        for (std::size_t m = 0; m < g.rows(); ++m)
            for (std::size_t n = 0; n < g.cols(); ++n)
                G(static_cast<Eigen::Index>(g.flat_index(m, n)), static_cast<Eigen::Index>(k)) =
                    std::polar(reference_amplitude(g, k, m, n), -reference_phase(g, k, m, n));
    return G;
}

inline HolographicResponse holographic_response(const RhsGeometry& g, const HolographicAmplitudes& amps) {
    if (amps.size() != g.num_elements())
        throw InvalidArgument("amplitude vector length " + std::to_string(amps.size()) + " does not match " +
                              std::to_string(g.num_elements()) + " elements");
    return {amps.values().asDiagonal() * feed_propagation(g)};
}

inline Eigen::MatrixXcd effective_channel(const Eigen::MatrixXcd& H, const HolographicResponse& Q) {
    if (H.cols() != Q.matrix.rows())
        throw InvalidArgument("channel has " + std::to_string(H.cols()) + " elements, response has " +
                              std::to_string(Q.matrix.rows()));
    return H * Q.matrix;
}

inline constexpr double kMaxConditionNumber = 1e12;

namespace detail {

/// mu solving sum_l max(0, mu - floor_l) = budget. Bisection brackets the
/// active set, then mu is solved exactly on it.
inline double waterlevel(std::span<const double> floors, double budget) {
    double lo = 0.0;
    double hi = budget + *std::max_element(floors.begin(), floors.end());
    auto spent = [&](double mu) {
        double s = 0.0;
        for (double f : floors) s += std::max(0.0, mu - f);
        return s;
    };
    for (int it = 0; it < 400 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        (spent(mid) < budget ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    double active_sum = 0.0;
    std::size_t active = 0;
    for (double f : floors)
        if (f < mu) active_sum += f, ++active;
    return active ? (budget + active_sum) / static_cast<double>(active) : mu;
}

}  // namespace detail

/// Zero-forcing precoder V = H^H (H H^H)^-1 with per-user power scaling so
/// that trace(V V^H) = P_T. The power spent on user l is q_l; equal gives
/// q_l = P_T / L, water-filling gives q_l = max(0, mu - sigma^2 ||v0_l||^2).
inline DigitalBeamformer zf_digital(const Eigen::MatrixXcd& H_eff, const LinkBudget& budget,
                                    PowerAllocation allocation = PowerAllocation::equal) {
    budget.validate();
    const Eigen::Index L = H_eff.rows(), K = H_eff.cols();
    if (L < 1 || L > K)
        throw InvalidArgument("zero forcing needs 1 <= users <= feeds (got " + std::to_string(L) + " users, " +
                              std::to_string(K) + " feeds)");
    if (!H_eff.allFinite()) throw SingularChannel("effective channel has non-finite entries", std::numeric_limits<double>::infinity());
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(H_eff).singularValues();
    const double cond = sv[L - 1] > 0.0 ? sv[0] / sv[L - 1] : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxConditionNumber))
        throw SingularChannel("effective channel is rank deficient (condition " + std::to_string(cond) + ")", cond);

    const Eigen::MatrixXcd gram = H_eff * H_eff.adjoint();
    const Eigen::MatrixXcd V0 = H_eff.adjoint() * gram.partialPivLu().inverse();

    std::vector<double> norms(static_cast<std::size_t>(L));
    for (Eigen::Index l = 0; l < L; ++l) norms[static_cast<std::size_t>(l)] = V0.col(l).squaredNorm();

    std::vector<double> spend(static_cast<std::size_t>(L), budget.transmit_power / static_cast<double>(L));
    if (allocation == PowerAllocation::waterfilling) {
        std::vector<double> floors(norms.size());
        for (std::size_t l = 0; l < norms.size(); ++l) floors[l] = budget.noise_power * norms[l];
        const double mu = detail::waterlevel(floors, budget.transmit_power);
        for (std::size_t l = 0; l < norms.size(); ++l) spend[l] = std::max(0.0, mu - floors[l]);
    }

    DigitalBeamformer V{Eigen::MatrixXcd(K, L)};
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto i = static_cast<std::size_t>(l);
        V.matrix.col(l) = std::sqrt(spend[i] / norms[i]) * V0.col(l);
    }
    return V;
}

/// SINR_l = |s_ll|^2 / (sum_{j != l} |s_lj|^2 + sigma^2) with S = H Q V.
inline Eigen::VectorXd user_sinr(const Eigen::MatrixXcd& H, const HolographicResponse& Q, const DigitalBeamformer& V,
                                 const LinkBudget& budget) {
    budget.validate();
    if (H.cols() != Q.matrix.rows() || Q.matrix.cols() != V.matrix.rows() || V.matrix.cols() != H.rows())
        throw InvalidArgument("dimension mismatch between channel, surface response and precoder");
    const Eigen::MatrixXcd S = H * Q.matrix * V.matrix;
    Eigen::VectorXd sinr(H.rows());
    for (Eigen::Index l = 0; l < H.rows(); ++l) {
        double interference = 0.0;
        for (Eigen::Index j = 0; j < S.cols(); ++j)
            if (j != l) interference += std::norm(S(l, j));
        sinr[l] = std::norm(S(l, l)) / (interference + budget.noise_power);
    }
    return sinr;
}

/// sum_l log2(1 + SINR_l), bits/s/Hz.
inline double sum_rate(const Eigen::Ref<const Eigen::VectorXd>& sinrs) {
    double r = 0.0;
    for (Eigen::Index l = 0; l < sinrs.size(); ++l) {
        if (!(sinrs[l] >= 0.0)) throw InvalidArgument("negative or NaN SINR " + std::to_string(sinrs[l]));
        r += std::log2(1.0 + sinrs[l]);
    }
    return r;
}

/// Power leaving the surface, ||Q V||_F^2 (diagnostic, not constrained).
inline double radiated_power(const HolographicResponse& Q, const DigitalBeamformer& V) {
    return (Q.matrix * V.matrix).squaredNorm();
}

}  // namespace rhs
