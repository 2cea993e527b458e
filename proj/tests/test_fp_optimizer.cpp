#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rhs/fp_optimizer.hpp"

using namespace rhs;

namespace {

DownlinkModel make_model(std::size_t rows, std::size_t cols, std::size_t feeds, std::size_t users, std::uint64_t seed,
                         double noise = 1e-2) {
    const auto g = RhsGeometry::with_defaults(rows, cols, feeds, 12e9);
    ChannelConfig cfg;
    cfg.num_users = users;
    auto rng = trial_rng(seed, 0);
    return DownlinkModel(g, generate_channel(g, cfg, rng), {0.5, noise});
}

HolographicAmplitudes random_interior(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = u(rng);
    return HolographicAmplitudes(v);
}

// Term-by-term surrogate in nats, built from scalar sums over elements and feeds.
double surrogate_oracle_bits(const DownlinkModel& model, const HolographicAmplitudes& m, const DigitalBeamformer& V,
                             const FpAuxiliaries& aux) {
    const auto& g = model.geometry();
    const auto& H = model.H();
    const std::size_t L = model.num_users(), K = g.num_feeds();
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<cdouble> s(L);
        for (std::size_t j = 0; j < L; ++j) {
            cdouble acc = 0;
            for (std::size_t a = 0; a < g.rows(); ++a)
                for (std::size_t b = 0; b < g.cols(); ++b)
                    for (std::size_t k = 0; k < K; ++k) {
                        const std::size_t e = g.flat_index(a, b);
                        acc += H(l, e) * m[e] * reference_amplitude(g, k, a, b) *
                               std::polar(1.0, -reference_phase(g, k, a, b)) * V.matrix(k, j);
                    }
            s[j] = acc;
        }
        double I = 0.0;
        for (auto& x : s) I += std::norm(x);
        const double gm = aux.gamma[l];
        total += std::log(1 + gm) - gm + 2 * std::sqrt(1 + gm) * (std::conj(aux.y[l]) * s[l]).real() -
                 std::norm(aux.y[l]) * (I + model.budget().noise_power);
    }
    return total / std::log(2.0);
}

}  // namespace

TEST(Surrogate, TightAtClosedFormAuxiliaries) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 30; ++t) {
        const auto model = make_model(4, 4, 4, 3, 100 + t);
        const auto m = random_interior(16, rng);
        const auto V = model.zero_forcing(m, PowerAllocation::equal);
        const auto aux = update_auxiliaries(model, m, V);
        EXPECT_NEAR(surrogate_value(model, m, V, aux), model.rate(m, V), 1e-10);
        // Non-ZF precoders leave interference; tightness must still hold.
        const DigitalBeamformer W{V.matrix + 0.3 * Eigen::MatrixXcd::Ones(4, 3)};
        EXPECT_NEAR(surrogate_value(model, m, W, update_auxiliaries(model, m, W)), model.rate(m, W), 1e-10);
    }
}

TEST(Surrogate, ZeroAuxiliariesGiveZero) {
    const auto model = make_model(3, 3, 2, 2, 5);
    const auto m = HolographicAmplitudes::constant(9, 0.5);
    const auto V = model.zero_forcing(m, PowerAllocation::equal);
    EXPECT_EQ(surrogate_value(model, m, V, {Eigen::VectorXd::Zero(2), Eigen::VectorXcd::Zero(2)}), 0.0);
}

TEST(Surrogate, MatchesTermByTermExpansion) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> u(0, 3);
    for (int t = 0; t < 10; ++t) {
        const auto model = make_model(3, 2, 3, 2, 40 + t);
        const auto m = random_interior(6, rng);
        DigitalBeamformer V{Eigen::MatrixXcd(3, 2)};
        for (auto& x : V.matrix.reshaped()) x = {n(rng), n(rng)};
        FpAuxiliaries aux{Eigen::Vector2d(u(rng), u(rng)), Eigen::Vector2cd(cdouble(n(rng), n(rng)), cdouble(n(rng), n(rng)))};
        EXPECT_NEAR(surrogate_value(model, m, V, aux), surrogate_oracle_bits(model, m, V, aux), 1e-9);
    }
}

TEST(Auxiliaries, ZeroBeamformerGivesZero) {
    const auto model = make_model(2, 2, 2, 2, 3);
    const auto aux = update_auxiliaries(model, HolographicAmplitudes::constant(4, 0.5), {Eigen::MatrixXcd::Zero(2, 2)});
    EXPECT_EQ(aux.gamma.norm(), 0.0);
    EXPECT_EQ(aux.y.norm(), 0.0);
}

TEST(Auxiliaries, SingleUserScalarChain) {
    // One element, one feed at the element, one user: s = h * m * v.
    const RhsGeometry g(1, 1, 0.01, 0.01, {{0, 0}}, 12e9);
    ChannelMatrix H;
    H.entries = Eigen::MatrixXcd::Constant(1, 1, 0.8);
    const DownlinkModel model(g, H, {1.0, 0.2});
    const auto m = HolographicAmplitudes::constant(1, 0.5);
    const DigitalBeamformer V{Eigen::MatrixXcd::Constant(1, 1, 1.5)};
    const double s = 0.8 * 0.5 * 1.5;
    const double gamma = s * s / 0.2;
    const auto aux = update_auxiliaries(model, m, V);
    EXPECT_NEAR(aux.gamma[0], gamma, 1e-14);
    EXPECT_NEAR(std::abs(aux.y[0] - cdouble(std::sqrt(1 + gamma) * s / (s * s + 0.2), 0)), 0.0, 1e-14);
}

TEST(Auxiliaries, PerturbationStrictlyDecreasesSurrogate) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto model = make_model(4, 4, 4, 3, 200 + t);
        const auto m = random_interior(16, rng);
        const auto V = model.zero_forcing(m, PowerAllocation::equal);
        const auto aux = update_auxiliaries(model, m, V);
        const double best = surrogate_value(model, m, V, aux);
        for (int l = 0; l < 3; ++l)
            for (double d : {-0.3, -1e-3, 1e-3, 0.3}) {
                auto gp = aux;
                gp.gamma[l] = std::max(0.0, gp.gamma[l] * (1 + d));
                EXPECT_LT(surrogate_value(model, m, V, gp), best);
                auto yp = aux;
                yp.y[l] *= (1 + d);
                EXPECT_LT(surrogate_value(model, m, V, yp), best);
            }
    }
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 rng(4);
    int checked = 0;
    for (int t = 0; t < 50; ++t) {
        const auto model = make_model(3, 3, 3, 2, 300 + t);
        const auto m = random_interior(9, rng);
        const auto V = model.zero_forcing(m, PowerAllocation::equal);
        const auto aux = update_auxiliaries(model, m, V);
        const auto grad = surrogate_gradient(model, m, V, aux);
        const double h = 1e-6;
        for (Eigen::Index e = 0; e < 9; ++e) {
            Eigen::VectorXd up = m.values(), dn = m.values();
            up[e] += h;
            dn[e] -= h;
            const double fd = (surrogate_value(model, HolographicAmplitudes(up), V, aux) -
                               surrogate_value(model, HolographicAmplitudes(dn), V, aux)) /
                              (2 * h);
            EXPECT_LE(std::abs(grad[e] - fd), 1e-5 * std::max(1.0, std::abs(fd))) << t << ' ' << e;
            ++checked;
        }
    }
    EXPECT_EQ(checked, 450);
}

TEST(BoxQuadratic, Cases) {
    EXPECT_EQ(box_quadratic_argmax(-1.0, 5.0, 0.3), 1.0);   // slope positive across the box
    EXPECT_EQ(box_quadratic_argmax(-1.0, -0.5, 0.3), 0.0);  // vertex below zero
    EXPECT_DOUBLE_EQ(box_quadratic_argmax(-2.0, 1.0, 0.9), 0.25);
    EXPECT_EQ(box_quadratic_argmax(0.0, 1.0, 0.3), 1.0);
    EXPECT_EQ(box_quadratic_argmax(0.0, -1.0, 0.3), 0.0);
    EXPECT_EQ(box_quadratic_argmax(0.0, 0.0, 0.3), 0.3);
}

TEST(HolographicUpdate, FirstCoordinateMatchesGridSearch) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto model = make_model(2, 3, 3, 2, 400 + t);
        const auto m = random_interior(6, rng);
        const auto V = model.zero_forcing(m, PowerAllocation::equal);
        const auto aux = update_auxiliaries(model, m, V);
        const auto next = holographic_update(model, m, V, aux, 1);

        double best = -1e300, arg = 0;
        Eigen::VectorXd probe = m.values();
        for (int i = 0; i <= 10000; ++i) {
            probe[0] = i * 1e-4;
            const double v = surrogate_value(model, HolographicAmplitudes(probe), V, aux);
            if (v > best) best = v, arg = probe[0];
        }
        EXPECT_NEAR(next[0], arg, 1e-3) << t;
    }
}

TEST(HolographicUpdate, SurrogateNeverDecreasesPerCoordinate) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto model = make_model(3, 3, 4, 3, 500 + t);
        auto m = random_interior(9, rng);
        const auto V = model.zero_forcing(m, PowerAllocation::equal);
        const auto aux = update_auxiliaries(model, m, V);
        const auto final_m = holographic_update(model, m, V, aux, 1);
        // Replay the sweep one coordinate at a time.
        double prev = surrogate_value(model, m, V, aux);
        Eigen::VectorXd cur = m.values();
        for (Eigen::Index e = 0; e < 9; ++e) {
            cur[e] = final_m[static_cast<std::size_t>(e)];
            const double v = surrogate_value(model, HolographicAmplitudes(cur), V, aux);
            EXPECT_GE(v, prev - 1e-10) << e;
            prev = v;
        }
    }
}

TEST(HolographicUpdate, AmplitudesStayInBox) {
    std::mt19937_64 rng(7);
    const auto model = make_model(4, 4, 4, 3, 9);
    const auto m = random_interior(16, rng);
    const auto V = model.zero_forcing(m, PowerAllocation::equal);
    const auto next = holographic_update(model, m, V, update_auxiliaries(model, m, V), 5);
    EXPECT_GE(next.values().minCoeff(), 0.0);
    EXPECT_LE(next.values().maxCoeff(), 1.0);
}

TEST(Optimize, SingleUserNondecreasing) {
    const auto model = make_model(4, 4, 2, 1, 11);
    OptimizerConfig cfg;
    const auto r = optimize(model, cfg);
    const auto b = baseline_superposition(model);
    EXPECT_GE(r.final_rate(), r.rate_trajectory.front());
    EXPECT_GE(r.final_rate(), b.final_rate() - 1e-9);
    for (std::size_t i = 1; i < r.rate_trajectory.size(); ++i)
        EXPECT_GE(r.rate_trajectory[i], r.rate_trajectory[i - 1] - 1e-8);
}

TEST(Optimize, StartsAtBaselineAndDominatesIt) {
    for (int t = 0; t < 20; ++t) {
        const auto model = make_model(6, 6, 4, 3, 600 + t);
        const auto r = optimize(model, {});
        const auto b = baseline_superposition(model);
        EXPECT_NEAR(r.rate_trajectory.front(), b.final_rate(), 1e-12);
        EXPECT_GE(r.final_rate(), b.final_rate() - 1e-9);
        EXPECT_TRUE(r.converged);
        EXPECT_LE(r.iterations_used, 100u);
    }
}

TEST(Optimize, FeasibleIterates) {
    const auto model = make_model(5, 5, 4, 3, 21);
    const auto r = optimize(model, {});
    EXPECT_GE(r.final_amplitudes.values().minCoeff(), 0.0);
    EXPECT_LE(r.final_amplitudes.values().maxCoeff(), 1.0);
    EXPECT_NEAR(r.final_digital_beamformer.power(), 0.5, 0.5e-9);
    EXPECT_EQ(r.user_sinr.size(), 3);
    EXPECT_NEAR(sum_rate(r.user_sinr), r.final_rate(), 1e-12);
    EXPECT_GT(r.radiated_power, 0.0);
}

TEST(Optimize, Deterministic) {
    const auto a = optimize(make_model(5, 5, 4, 3, 22), {});
    const auto b = optimize(make_model(5, 5, 4, 3, 22), {});
    EXPECT_EQ(a.rate_trajectory, b.rate_trajectory);
    EXPECT_TRUE(a.final_amplitudes == b.final_amplitudes);
}

TEST(Optimize, PowerAndNoiseScaleTogether) {
    const auto g = RhsGeometry::with_defaults(4, 4, 4, 12e9);
    ChannelConfig cfg;
    auto r1 = trial_rng(30, 0), r2 = trial_rng(30, 0);
    const DownlinkModel a(g, generate_channel(g, cfg, r1), {0.5, 1e-2});
    const DownlinkModel b(g, generate_channel(g, cfg, r2), {0.5 * 7.0, 1e-2 * 7.0});
    const auto m = HolographicAmplitudes::constant(16, 0.4);
    const auto sa = a.sinr(m, a.zero_forcing(m, PowerAllocation::equal));
    const auto sb = b.sinr(m, b.zero_forcing(m, PowerAllocation::equal));
    for (int l = 0; l < 3; ++l) EXPECT_NEAR(sa[l], sb[l], 1e-9 * sa[l]);
    const auto ta = optimize(a, {}).rate_trajectory, tb = optimize(b, {}).rate_trajectory;
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_NEAR(ta[i], tb[i], 1e-9 * ta[i]);
}

TEST(Optimize, WarmStartAtGivenAmplitudes) {
    const auto model = make_model(2, 2, 2, 2, 31);
    OptimizerConfig cfg;
    cfg.init_mode = InitMode::explicit_amplitudes;
    cfg.initial_amplitudes = HolographicAmplitudes::constant(4, 0.75);
    const auto r = optimize(model, cfg);
    const auto m = *cfg.initial_amplitudes;
    EXPECT_NEAR(r.rate_trajectory.front(), model.rate(m, model.zero_forcing(m, PowerAllocation::equal)), 1e-12);
    EXPECT_GE(r.final_rate(), r.rate_trajectory.front());
}

TEST(Optimize, SingularStartFallsBackToUniformHalf) {
    // Two users with identical channels make every effective channel rank one.
    const auto g = RhsGeometry::with_defaults(2, 2, 2, 12e9);
    ChannelMatrix H;
    H.entries = Eigen::MatrixXcd::Ones(2, 4);
    const DownlinkModel model(g, H, {0.5, 1e-2});
    EXPECT_THROW(optimize(model, {}), SingularChannel);
    OptimizerConfig cfg;
    cfg.init_mode = InitMode::uniform_half;
    EXPECT_THROW(optimize(model, cfg), SingularChannel);
}

TEST(Optimize, ConfigValidation) {
    const auto model = make_model(2, 2, 2, 2, 1);
    OptimizerConfig c;
    c.rate_tolerance = 0;
    EXPECT_THROW(optimize(model, c), InvalidArgument);
    c = {};
    c.coordinate_passes = 0;
    EXPECT_THROW(optimize(model, c), InvalidArgument);
    c = {};
    c.init_mode = InitMode::explicit_amplitudes;
    EXPECT_THROW(optimize(model, c), InvalidArgument);
    c.initial_amplitudes = HolographicAmplitudes::constant(3, 0.5);
    EXPECT_THROW(optimize(model, c), InvalidArgument);
}

TEST(Baseline, SingleUserLosSteersAtUser) {
    const auto g = RhsGeometry::with_defaults(6, 6, 1, 12e9);
    ChannelConfig cfg;
    cfg.num_users = 1;
    cfg.rician_factor_db = std::numeric_limits<double>::infinity();
    auto rng = trial_rng(3, 0);
    const DownlinkModel model(g, generate_channel(g, cfg, rng), {0.5, 1e-2});
    const auto b = baseline_superposition(model);
    EXPECT_GT(b.final_rate(), 0.0);
    EXPECT_EQ(b.iterations_used, 0u);
    EXPECT_EQ(b.termination, Termination::single_pass);
}

TEST(Baseline, EndToEndChainOracle) {
    // Rebuild the full chain from scalars: superposition hologram, ZF, SINR.
    const auto model = make_model(3, 3, 2, 2, 77);
    const auto& g = model.geometry();
    const auto dirs = dominant_directions(g, model.channel());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(9);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
                double acc = 0.0;
                for (const auto& d : dirs)
                    acc += (std::cos(object_phase(g, a, b, d) - reference_phase(g, k, a, b)) + 1) / 2;
                m[g.flat_index(a, b)] += acc / dirs.size() / 2.0;
            }
    Eigen::MatrixXcd Q(9, 2);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b)
                Q(g.flat_index(a, b), k) = m[g.flat_index(a, b)] * std::polar(1.0, -reference_phase(g, k, a, b));
    const Eigen::MatrixXcd He = model.H() * Q;
    Eigen::MatrixXcd V0 = He.adjoint() * (He * He.adjoint()).inverse();
    for (int l = 0; l < 2; ++l) V0.col(l) *= std::sqrt(0.25) / V0.col(l).norm();
    const Eigen::MatrixXcd S = He * V0;
    double rate = 0;
    for (int l = 0; l < 2; ++l) rate += std::log2(1 + std::norm(S(l, l)) / (std::norm(S(l, 1 - l)) + 1e-2));
    EXPECT_NEAR(baseline_superposition(model).final_rate(), rate, 1e-9);
}

TEST(Report, CsvWriters) {
    OptimizationReport r;
    r.rate_trajectory = {1.0, 1.5, 1.5004};
    r.iterations_used = 2;
    r.converged = true;
    std::ostringstream a, b;
    write_trajectory_csv(a, r);
    write_summary_csv(b, r);
    EXPECT_EQ(a.str(), "iter,sum_rate\n0,1.000000\n1,1.500000\n2,1.500400\n");
    EXPECT_EQ(b.str(), "final_rate,iterations_used,converged\n1.500400,2,1\n");
}
