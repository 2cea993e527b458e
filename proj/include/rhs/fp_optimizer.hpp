#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rhs/beamforming.hpp"
#include "rhs/channel.hpp"
#include "rhs/errors.hpp"
#include "rhs/geometry.hpp"
#include "rhs/holography.hpp"

namespace rhs {

/// Everything that stays fixed while the beamformers move: surface, channel,
/// budget, and the amplitude-free feed propagation matrix.
class DownlinkModel {
public:
    DownlinkModel(RhsGeometry geometry, ChannelMatrix channel, LinkBudget budget)
        : geometry_(std::move(geometry)),
          channel_(std::move(channel)),
          budget_(budget),
          propagation_(feed_propagation(geometry_)) {
        budget_.validate();
        if (channel_.num_elements() != geometry_.num_elements())
            throw InvalidArgument("channel width does not match the surface element count");
        if (channel_.num_users() < 1) throw InvalidArgument("channel has no users");
        if (!channel_.entries.allFinite()) throw InvalidArgument("channel has non-finite entries");
    }

    const RhsGeometry& geometry() const noexcept { return geometry_; }
    const ChannelMatrix& channel() const noexcept { return channel_; }
    const Eigen::MatrixXcd& H() const noexcept { return channel_.entries; }
    const LinkBudget& budget() const noexcept { return budget_; }
    const Eigen::MatrixXcd& propagation() const noexcept { return propagation_; }
    std::size_t num_users() const noexcept { return channel_.num_users(); }
    std::size_t num_elements() const noexcept { return geometry_.num_elements(); }

    HolographicResponse response(const HolographicAmplitudes& amps) const {
        check(amps);
        return {amps.values().asDiagonal() * propagation_};
    }

    /// S = H Q(m) V, entry (l, j) is stream j as seen by user l.
    Eigen::MatrixXcd received(const HolographicAmplitudes& amps, const DigitalBeamformer& V) const {
        check(amps);
        check(V);
        return H() * (amps.values().asDiagonal() * (propagation_ * V.matrix));
    }

    DigitalBeamformer zero_forcing(const HolographicAmplitudes& amps, PowerAllocation alloc) const {
        return zf_digital(effective_channel(H(), response(amps)), budget_, alloc);
    }

    Eigen::VectorXd sinr(const HolographicAmplitudes& amps, const DigitalBeamformer& V) const {
        return user_sinr(H(), response(amps), V, budget_);
    }

    double rate(const HolographicAmplitudes& amps, const DigitalBeamformer& V) const {
        return sum_rate(sinr(amps, V));
    }

    void check(const HolographicAmplitudes& amps) const {
        if (amps.size() != num_elements()) throw InvalidArgument("amplitude vector length does not match the surface");
    }
    void check(const DigitalBeamformer& V) const {
        if (static_cast<std::size_t>(V.matrix.rows()) != geometry_.num_feeds() ||
            static_cast<std::size_t>(V.matrix.cols()) != num_users())
            throw InvalidArgument("precoder must be feeds x users");
    }

private:
    RhsGeometry geometry_;
    ChannelMatrix channel_;
    LinkBudget budget_;
    Eigen::MatrixXcd propagation_;
};

/// Fractional-programming auxiliaries: gamma (SINR surrogates of the
/// Lagrangian dual transform) and y (quadratic-transform variables).
struct FpAuxiliaries {
    Eigen::VectorXd gamma;
    Eigen::VectorXcd y;
};

namespace detail {

/// Per-element coefficients of the received matrix: S = sum_e m_e C_e with
/// C_e(l, j) = H(l, e) * (G V)(e, j). Stored as one L x L block per element.
struct ReceivedCoefficients {
    std::size_t users = 0;
    std::vector<Eigen::MatrixXcd> per_element;

    ReceivedCoefficients(const DownlinkModel& model, const DigitalBeamformer& V) : users(model.num_users()) {
        model.check(V);
        const Eigen::MatrixXcd B = model.propagation() * V.matrix;  // MN x L
        per_element.reserve(model.num_elements());
        for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(model.num_elements()); ++e)
            per_element.emplace_back(model.H().col(e) * B.row(e));
    }
};

inline Eigen::MatrixXcd assemble(const ReceivedCoefficients& c, const Eigen::VectorXd& m) {
    const auto L = static_cast<Eigen::Index>(c.users);
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(L, L);
    for (std::size_t e = 0; e < c.per_element.size(); ++e) S += m[static_cast<Eigen::Index>(e)] * c.per_element[e];
    return S;
}

/// Weights of the surrogate's amplitude-dependent part:
/// sum_l [ 2 w_l Re(conj(y_l) s_ll) - |y_l|^2 sum_j |s_lj|^2 ], w_l = sqrt(1 + gamma_l).
struct QuadraticWeights {
    Eigen::VectorXd lin;   // 2 sqrt(1 + gamma_l)
    Eigen::VectorXd quad;  // |y_l|^2
};

inline QuadraticWeights weights(const FpAuxiliaries& aux) {
    QuadraticWeights w;
    w.lin = 2.0 * (1.0 + aux.gamma.array()).sqrt();
    w.quad = aux.y.cwiseAbs2();
    return w;
}

/// Derivative of the surrogate (in nats) with respect to m_e at received matrix S.
inline double coordinate_slope(const Eigen::MatrixXcd& C, const Eigen::MatrixXcd& S, const FpAuxiliaries& aux,
                               const QuadraticWeights& w) {
    double slope = 0.0;
    for (Eigen::Index l = 0; l < C.rows(); ++l) {
        slope += w.lin[l] * std::real(std::conj(aux.y[l]) * C(l, l));
        double cross = 0.0;
        for (Eigen::Index j = 0; j < C.cols(); ++j) cross += std::real(std::conj(S(l, j)) * C(l, j));
        slope -= 2.0 * w.quad[l] * cross;
    }
    return slope;
}

/// Curvature coefficient a_e <= 0 of the surrogate along m_e: f = a x^2 + b x + const.
inline double coordinate_curvature(const Eigen::MatrixXcd& C, const QuadraticWeights& w) {
    double a = 0.0;
    for (Eigen::Index l = 0; l < C.rows(); ++l) a -= w.quad[l] * C.row(l).squaredNorm();
    return a;
}

}  // namespace detail

/// FP surrogate of the sum rate (bits/s/Hz):
///   (1/ln 2) sum_l [ ln(1+g_l) - g_l + 2 sqrt(1+g_l) Re(y_l^* s_ll) - |y_l|^2 (I_l + sigma^2) ],
/// I_l = sum_j |s_lj|^2. Equals the sum rate at the auxiliaries from update_auxiliaries.
inline double surrogate_value(const DownlinkModel& model, const HolographicAmplitudes& amps, const DigitalBeamformer& V,
                              const FpAuxiliaries& aux) {
    const Eigen::MatrixXcd S = model.received(amps, V);
    const auto L = S.rows();
    if (aux.gamma.size() != L || aux.y.size() != L) throw InvalidArgument("auxiliary vectors must have one entry per user");
    const double sigma2 = model.budget().noise_power;
    double nats = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) {
        const double g = aux.gamma[l];
        const double total = S.row(l).squaredNorm();
        nats += std::log1p(g) - g + 2.0 * std::sqrt(1.0 + g) * std::real(std::conj(aux.y[l]) * S(l, l)) -
                std::norm(aux.y[l]) * (total + sigma2);
    }
    return nats / std::numbers::ln2;
}

/// Closed-form maximizers: gamma_l = SINR_l, y_l = sqrt(1+gamma_l) s_ll / (I_l + sigma^2).
inline FpAuxiliaries update_auxiliaries(const DownlinkModel& model, const HolographicAmplitudes& amps,
                                        const DigitalBeamformer& V) {
    const Eigen::MatrixXcd S = model.received(amps, V);
    const auto L = S.rows();
    const double sigma2 = model.budget().noise_power;
    FpAuxiliaries aux{Eigen::VectorXd(L), Eigen::VectorXcd(L)};
    for (Eigen::Index l = 0; l < L; ++l) {
        const double signal = std::norm(S(l, l));
        double interference = 0.0;
        for (Eigen::Index j = 0; j < L; ++j)
            if (j != l) interference += std::norm(S(l, j));
        aux.gamma[l] = signal / (interference + sigma2);
        aux.y[l] = std::sqrt(1.0 + aux.gamma[l]) * S(l, l) / (signal + interference + sigma2);
    }
    return aux;
}

/// Analytic derivative of surrogate_value with respect to every amplitude.
inline Eigen::VectorXd surrogate_gradient(const DownlinkModel& model, const HolographicAmplitudes& amps,
                                          const DigitalBeamformer& V, const FpAuxiliaries& aux) {
    const detail::ReceivedCoefficients coeffs(model, V);
    const Eigen::MatrixXcd S = detail::assemble(coeffs, amps.values());
    const auto w = detail::weights(aux);
    Eigen::VectorXd grad(static_cast<Eigen::Index>(model.num_elements()));
    for (std::size_t e = 0; e < coeffs.per_element.size(); ++e)
        grad[static_cast<Eigen::Index>(e)] =
            detail::coordinate_slope(coeffs.per_element[e], S, aux, w) / std::numbers::ln2;
    return grad;
}

/// Exact maximizer of the concave quadratic a x^2 + b x over [0, 1] (a <= 0).
/// Flat directions keep the current value.
inline double box_quadratic_argmax(double a, double b, double current) {
    if (a < 0.0) return std::clamp(-b / (2.0 * a), 0.0, 1.0);
    if (b > 0.0) return 1.0;
    if (b < 0.0) return 0.0;
    return current;
}

/// Block-coordinate ascent on the surrogate over the amplitudes, `passes`
/// row-major sweeps. Each coordinate jumps to the clipped stationary point of
/// its Lagrangian, so the surrogate never decreases.
inline HolographicAmplitudes holographic_update(const DownlinkModel& model, const HolographicAmplitudes& amps,
                                                const DigitalBeamformer& V, const FpAuxiliaries& aux,
                                                std::size_t passes = 1) {
    model.check(amps);
    if (aux.gamma.size() != static_cast<Eigen::Index>(model.num_users())) throw InvalidArgument("auxiliary size mismatch");
    const detail::ReceivedCoefficients coeffs(model, V);
    Eigen::VectorXd m = amps.values();
    Eigen::MatrixXcd S = detail::assemble(coeffs, m);
    const auto w = detail::weights(aux);
    for (std::size_t pass = 0; pass < passes; ++pass) {
        for (std::size_t e = 0; e < coeffs.per_element.size(); ++e) {
            const auto& C = coeffs.per_element[e];
            const auto idx = static_cast<Eigen::Index>(e);
            const double a = detail::coordinate_curvature(C, w);
            // b is the slope at x = 0: slope(m_e) - 2 a m_e.
            const double b = detail::coordinate_slope(C, S, aux, w) - 2.0 * a * m[idx];
            const double next = box_quadratic_argmax(a, b, m[idx]);
            if (next != m[idx]) {
                S += (next - m[idx]) * C;
                m[idx] = next;
            }
        }
    }
    return HolographicAmplitudes(std::move(m));
}

// ---------------------------------------------------------------------------
// Alternating optimization

enum class InitMode { superposition, uniform_half, explicit_amplitudes };

struct OptimizerConfig {
    std::size_t max_outer_iterations = 100;
    double rate_tolerance = 1e-3;  // bits/s/Hz
    std::size_t coordinate_passes = 1;
    std::size_t fp_rounds = 1;  // auxiliary refresh + sweep rounds per outer iteration, V held fixed
    InitMode init_mode = InitMode::superposition;
    PowerAllocation allocation = PowerAllocation::equal;
    bool safeguard = true;
    bool line_search = true;  // step-size search along the FP update direction
    std::optional<HolographicAmplitudes> initial_amplitudes;  // used with explicit_amplitudes

    void validate() const {
        if (max_outer_iterations < 1) throw InvalidArgument("max_outer_iterations must be >= 1");
        if (coordinate_passes < 1) throw InvalidArgument("coordinate_passes must be >= 1");
        if (fp_rounds < 1) throw InvalidArgument("fp_rounds must be >= 1");
        if (!(rate_tolerance > 0.0)) throw InvalidArgument("rate tolerance must be positive");
        if (init_mode == InitMode::explicit_amplitudes && !initial_amplitudes)
            throw InvalidArgument("explicit init mode needs initial amplitudes");
    }
};

enum class Termination { tolerance, rolled_back, max_iterations, single_pass };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::tolerance: return "tolerance";
        case Termination::rolled_back: return "rolled_back";
        case Termination::max_iterations: return "max_iterations";
        case Termination::single_pass: return "single_pass";
    }
    return "?";
}

struct OptimizationReport {
    std::vector<double> rate_trajectory;  // entry 0 is the starting point
    HolographicAmplitudes final_amplitudes;
    DigitalBeamformer final_digital_beamformer;
    std::size_t iterations_used = 0;
    bool converged = false;
    Termination termination = Termination::max_iterations;
    Eigen::VectorXd user_sinr;
    double radiated_power = 0.0;

    double final_rate() const { return rate_trajectory.back(); }
};

namespace detail {

inline OptimizationReport finish(const DownlinkModel& model, OptimizationReport r) {
    r.user_sinr = model.sinr(r.final_amplitudes, r.final_digital_beamformer);
    r.radiated_power = radiated_power(model.response(r.final_amplitudes), r.final_digital_beamformer);
    r.iterations_used = r.rate_trajectory.size() - 1;
    return r;
}

/// Step-size search along the FP update direction d = m_fp - m over the
/// projected points clip(m + t d, 0, 1), scored by the zero-forcing sum rate.
/// t = 1 is the plain FP update (passed in as `best`). If it beats
/// `current_rate` t doubles while the rate keeps improving, otherwise t halves
/// down to 2^-12 until some step beats it.
inline void search_step(const DownlinkModel& model, PowerAllocation alloc, const HolographicAmplitudes& from,
                        double current_rate, HolographicAmplitudes& best, DigitalBeamformer& best_V,
                        double& best_rate) {
    const Eigen::VectorXd dir = best.values() - from.values();
    if (dir.cwiseAbs().maxCoeff() == 0.0) return;
    auto evaluate = [&](double t, HolographicAmplitudes& amps, DigitalBeamformer& V) {
        amps = HolographicAmplitudes((from.values() + t * dir).cwiseMax(0.0).cwiseMin(1.0));
        try {
            V = model.zero_forcing(amps, alloc);
            return model.rate(amps, V);
        } catch (const SingularChannel&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    HolographicAmplitudes trial;
    DigitalBeamformer trial_V;
    if (best_rate > current_rate) {
        for (double t = 2.0; t <= 1073741824.0; t *= 2.0) {
            const double r = evaluate(t, trial, trial_V);
            if (!(r > best_rate)) break;
            const bool saturated = trial == best;
            best = std::move(trial);
            best_V = std::move(trial_V);
            best_rate = r;
            if (saturated) break;
        }
        return;
    }
    for (double t = 0.5; t >= 1.0 / 4096.0; t *= 0.5) {
        const double r = evaluate(t, trial, trial_V);
        if (r > current_rate) {
            best = std::move(trial);
            best_V = std::move(trial_V);
            best_rate = r;
            return;
        }
    }
}

}  // namespace detail

/// Superposition hologram toward each user's strongest arrival direction.
inline HolographicAmplitudes superposition_amplitudes(const DownlinkModel& model) {
    const auto dirs = dominant_directions(model.geometry(), model.channel());
    return superposition_pattern(model.geometry(), dirs);
}

/// Benchmark: superposition hologram plus one zero-forcing pass.
inline OptimizationReport baseline_superposition(const DownlinkModel& model,
                                                 PowerAllocation alloc = PowerAllocation::equal) {
    OptimizationReport r;
    r.final_amplitudes = superposition_amplitudes(model);
    r.final_digital_beamformer = model.zero_forcing(r.final_amplitudes, alloc);
    r.rate_trajectory = {model.rate(r.final_amplitudes, r.final_digital_beamformer)};
    r.converged = true;
    r.termination = Termination::single_pass;
    return detail::finish(model, std::move(r));
}

/// Alternates zero forcing with FP holographic updates until the sum rate
/// changes by less than the tolerance. With the safeguard on, an outer step
/// that would lower the sum rate is discarded and the loop stops. A step that
/// makes the effective channel singular is always discarded.
inline OptimizationReport optimize(const DownlinkModel& model, const OptimizerConfig& cfg) {
    cfg.validate();
    HolographicAmplitudes m;
    switch (cfg.init_mode) {
        case InitMode::superposition: m = superposition_amplitudes(model); break;
        case InitMode::uniform_half: m = HolographicAmplitudes::constant(model.num_elements(), 0.5); break;
        case InitMode::explicit_amplitudes: m = *cfg.initial_amplitudes; break;
    }
    model.check(m);

    DigitalBeamformer V;
    try {
        V = model.zero_forcing(m, cfg.allocation);
    } catch (const SingularChannel&) {
        if (cfg.init_mode == InitMode::uniform_half) throw;
        m = HolographicAmplitudes::constant(model.num_elements(), 0.5);
        V = model.zero_forcing(m, cfg.allocation);
    }

    OptimizationReport r;
    double rate = model.rate(m, V);
    r.rate_trajectory.push_back(rate);
    r.termination = Termination::max_iterations;

    for (std::size_t it = 0; it < cfg.max_outer_iterations; ++it) {
        HolographicAmplitudes m_next = m;
        for (std::size_t round = 0; round < cfg.fp_rounds; ++round) {
            const FpAuxiliaries aux = update_auxiliaries(model, m_next, V);
            m_next = holographic_update(model, m_next, V, aux, cfg.coordinate_passes);
        }
        DigitalBeamformer V_next;
        double next_rate = 0.0;
        try {
            V_next = model.zero_forcing(m_next, cfg.allocation);
            next_rate = model.rate(m_next, V_next);
        } catch (const SingularChannel&) {
            next_rate = -std::numeric_limits<double>::infinity();
        }
        if (cfg.line_search) detail::search_step(model, cfg.allocation, m, rate, m_next, V_next, next_rate);
        if (!std::isfinite(next_rate) || (cfg.safeguard && next_rate < rate)) {
            r.termination = Termination::rolled_back;
            r.converged = true;
            break;
        }
        const double delta = next_rate - rate;
        m = std::move(m_next);
        V = std::move(V_next);
        rate = next_rate;
        r.rate_trajectory.push_back(rate);
        if (std::abs(delta) < cfg.rate_tolerance) {
            r.termination = Termination::tolerance;
            r.converged = true;
            break;
        }
    }
    r.final_amplitudes = std::move(m);
    r.final_digital_beamformer = std::move(V);
    return detail::finish(model, std::move(r));
}

/// Convergence CSV: iter,sum_rate.
inline void write_trajectory_csv(std::ostream& os, const OptimizationReport& r) {
    os << "iter,sum_rate\n";
    for (std::size_t i = 0; i < r.rate_trajectory.size(); ++i) os << i << ',' << format_fixed6(r.rate_trajectory[i]) << '\n';
}

/// Summary CSV: final_rate,iterations_used,converged.
inline void write_summary_csv(std::ostream& os, const OptimizationReport& r) {
    os << "final_rate,iterations_used,converged\n"
       << format_fixed6(r.final_rate()) << ',' << r.iterations_used << ',' << (r.converged ? 1 : 0) << '\n';
}

}  // namespace rhs
