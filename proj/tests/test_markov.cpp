#include <gtest/gtest.h>

#include "fefkit/markov.hpp"
#include "fefkit/state_space.hpp"
#include "test_support.hpp"

using namespace fefkit;
using test::make_pipeline_fixture;
using test::scalar_predictor;

namespace {

// Exact MPs of the scalar example: H_0^u=0, H_i^u=0.5^{i-1};
// H_0^y=0, H_i^y=0.2*0.5^{i-1}.
std::pair<MarkovSequence, MarkovSequence> scalar_mps(Eigen::Index L) {
    return predictor_mps(scalar_predictor(), L);
}

}  // namespace

// ============================================================================
// Toeplitz / Hankel builders
// ============================================================================

TEST(Structured, ToeplitzDefinition) {
    MarkovSequence seq(1, 1);
    for (int i = 0; i < 3; ++i)
        seq.push_back(Eigen::MatrixXd::Constant(1, 1, static_cast<double>(i + 1)));
    const Eigen::MatrixXd T = block_toeplitz(seq, 3).dense();
    Eigen::MatrixXd expect(3, 3);
    expect << 1, 0, 0,
              2, 1, 0,
              3, 2, 1;
    EXPECT_LT((T - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Structured, HankelDefinition) {
    MarkovSequence seq(1, 1);
    for (int i = 0; i < 4; ++i)
        seq.push_back(Eigen::MatrixXd::Constant(1, 1, static_cast<double>(i)));
    const Eigen::MatrixXd H = block_hankel(seq, 2, 2).dense();
    Eigen::MatrixXd expect(2, 2);
    expect << 1, 2,
              2, 3;  // entries W_{i+j+1}; W_0 excluded
    EXPECT_LT((H - expect).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(block_hankel(seq, 3, 2), DimensionError);
}

TEST(Structured, RankOneHankelFromTruncatedSequence) {
    // R = [R0, R1, 0, 0, ...] gives a Hankel of rank one.
    MarkovSequence seq(1, 1);
    seq.push_back(Eigen::MatrixXd::Constant(1, 1, 3.0));
    seq.push_back(Eigen::MatrixXd::Constant(1, 1, -0.5));
    for (int i = 0; i < 8; ++i) seq.push_back(Eigen::MatrixXd::Zero(1, 1));
    const Eigen::MatrixXd H = block_hankel(seq, 4, 4).dense();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(H);
    EXPECT_GT(svd.singularValues()(0), 0.0);
    EXPECT_LT(svd.singularValues()(1), 1e-14);
}

// ============================================================================
// fault_mps
// ============================================================================

TEST(FaultMps, ScalarActuatorClosedForm) {
    auto [Hu, Hy] = scalar_mps(6);
    const MarkovSequence Hf = fault_mps(Hu, Hy, {{FaultKind::Actuator, 0}});
    // H_i^f = C Phi^{i-1} Btilde = 0.5^{i-1}, H_0^f = D = 0
    EXPECT_NEAR(Hf[0](0, 0), 0.0, 1e-15);
    for (Eigen::Index i = 1; i < 6; ++i)
        EXPECT_NEAR(Hf[i](0, 0), std::pow(0.5, double(i - 1)), 1e-15);
}

TEST(FaultMps, ScalarSensorClosedForm) {
    auto [Hu, Hy] = scalar_mps(6);
    const MarkovSequence Hf = fault_mps(Hu, Hy, {{FaultKind::Sensor, 0}});
    // H_0^f = 1, H_i^f = -C Phi^{i-1} K = -0.2 * 0.5^{i-1}
    EXPECT_NEAR(Hf[0](0, 0), 1.0, 1e-15);
    for (Eigen::Index i = 1; i < 6; ++i)
        EXPECT_NEAR(Hf[i](0, 0), -0.2 * std::pow(0.5, double(i - 1)), 1e-15);
}

TEST(FaultMps, MultiFaultStacksColumns) {
    GaussianSampler rng(3);
    const PredictorModel m = test::random_predictor(rng, 3, 2, 3);
    auto [Hu, Hy] = predictor_mps(m, 5);
    const std::vector<FaultChannel> both = {{FaultKind::Actuator, 0},
                                            {FaultKind::Sensor, 1}};
    const MarkovSequence Hf = fault_mps(Hu, Hy, both);
    const MarkovSequence Ha = fault_mps(Hu, Hy, {{FaultKind::Actuator, 0}});
    const MarkovSequence Hs = fault_mps(Hu, Hy, {{FaultKind::Sensor, 1}});
    for (Eigen::Index i = 0; i < 5; ++i) {
        EXPECT_LT((Hf[i].col(0) - Ha[i].col(0)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((Hf[i].col(1) - Hs[i].col(0)).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_THROW(fault_mps(Hu, Hy, {{FaultKind::Actuator, 5}}), DimensionError);
}

// ============================================================================
// relative_degree / select_pi
// ============================================================================

TEST(RelativeDegree, KnownCases) {
    auto [Hu, Hy] = scalar_mps(8);
    EXPECT_EQ(relative_degree(fault_mps(Hu, Hy, {{FaultKind::Sensor, 0}})), 0);
    EXPECT_EQ(relative_degree(fault_mps(Hu, Hy, {{FaultKind::Actuator, 0}})), 1);

    MarkovSequence seq(2, 2);
    seq.push_back(Eigen::MatrixXd::Zero(2, 2));
    seq.push_back(Eigen::MatrixXd::Zero(2, 2));
    seq.push_back(Eigen::MatrixXd::Identity(2, 2));
    EXPECT_EQ(relative_degree(seq), 2);
}

TEST(RelativeDegree, InvariantUnderPositiveScaling) {
    auto [Hu, Hy] = scalar_mps(8);
    MarkovSequence Hf = fault_mps(Hu, Hy, {{FaultKind::Actuator, 0}});
    MarkovSequence scaled(Hf.rows(), Hf.cols());
    for (Eigen::Index i = 0; i < Hf.size(); ++i) scaled.push_back(1e-7 * Hf[i]);
    EXPECT_EQ(relative_degree(scaled), relative_degree(Hf));
}

TEST(RelativeDegree, Errors) {
    MarkovSequence zeros(2, 1);
    for (int i = 0; i < 4; ++i) zeros.push_back(Eigen::MatrixXd::Zero(2, 1));
    EXPECT_THROW(relative_degree(zeros), ZeroFaultSubsystem);

    // Two collinear fault directions violate the full-column-rank assumption.
    MarkovSequence collinear(2, 2);
    Eigen::MatrixXd b(2, 2);
    b << 1, 2,
         2, 4;
    collinear.push_back(b);
    EXPECT_THROW(relative_degree(collinear), AssumptionViolated);
}

TEST(SelectPi, LeftInverseCases) {
    EXPECT_NEAR(select_pi(Eigen::MatrixXd::Constant(1, 1, 1.0))(0, 0), 1.0, 1e-15);

    Eigen::MatrixXd h(2, 1);
    h << 1, 1;
    const Eigen::MatrixXd pi = select_pi(h);
    EXPECT_NEAR(pi(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(pi(0, 1), 0.5, 1e-12);

    const Eigen::MatrixXd id = select_pi(Eigen::MatrixXd::Identity(2, 2));
    EXPECT_LT((id - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);

    Eigen::MatrixXd rank_def(2, 2);
    rank_def << 1, 2,
                2, 4;
    EXPECT_THROW(select_pi(rank_def), AssumptionViolated);
}

TEST(SelectPi, ProductIsIdentityOnRandomDraws) {
    GaussianSampler rng(11);
    for (int t = 0; t < 20; ++t) {
        const Eigen::MatrixXd h = test::random_matrix(rng, 4, 2);
        const Eigen::MatrixXd pi = select_pi(h);
        EXPECT_LT((pi * h - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(),
                  1e-10);
    }
}

// ============================================================================
// build_scrH — hand-substituted scalar values
// ============================================================================

TEST(BuildScr, ScalarActuatorWindow) {
    auto [Hu, Hy] = scalar_mps(12);
    const MarkovSequence Hf = fault_mps(Hu, Hy, {{FaultKind::Actuator, 0}});
    const ScrSequences scr = build_scrH(Hu, Hy, Hf, 1, 10);

    Eigen::MatrixXd z0(1, 4);
    z0 << -1, 0, -0.2, 1;  // [-H1u, -H0u, -H1y, I]
    EXPECT_LT((scr.scrHz[0] - z0).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::MatrixXd z1(1, 4);
    z1 << -0.5, 0, -0.1, 0;  // -[H2u, 0, H2y, 0]
    EXPECT_LT((scr.scrHz[1] - z1).cwiseAbs().maxCoeff(), 1e-15);

    EXPECT_NEAR(scr.scrHf[0](0, 0), 1.0, 1e-15);   // H_1^f
    EXPECT_NEAR(scr.scrHf[1](0, 0), 0.5, 1e-15);   // H_2^f
}

TEST(BuildScr, SensorWindowIsLengthOne) {
    auto [Hu, Hy] = scalar_mps(12);
    const MarkovSequence Hf = fault_mps(Hu, Hy, {{FaultKind::Sensor, 0}});
    const ScrSequences scr = build_scrH(Hu, Hy, Hf, 0, 6);
    ASSERT_EQ(scr.scrHz.cols(), 2);  // (tau+1)(nu+ny) = 2
    EXPECT_NEAR(scr.scrHz[0](0, 0), -0.0, 1e-15);  // -H_0^u
    EXPECT_NEAR(scr.scrHz[0](0, 1), 1.0, 1e-15);   // identity column
}

// ============================================================================
// G / J / R / Q recursions
// ============================================================================

TEST(Inverse, ScalarHandRecursion) {
    auto fx = make_pipeline_fixture(0, 1, 1, 1, {{FaultKind::Actuator, 0}}, 10);
    // overwrite with the deterministic scalar example
    auto [Hu, Hy] = scalar_mps(14);
    const auto sig = make_fault_signature(Hu, Hy, {{FaultKind::Actuator, 0}});
    const auto scr = build_scrH(Hu, Hy, sig.Hf, sig.tau, 10);
    const MarkovSequence G = invert_toeplitz_G(scr.scrHf, sig.Pi, 10);
    EXPECT_NEAR(G[0](0, 0), 1.0, 1e-15);
    EXPECT_NEAR(G[1](0, 0), -0.5, 1e-15);
    for (Eigen::Index i = 2; i < 10; ++i) EXPECT_NEAR(G[i](0, 0), 0.0, 1e-14);

    const MarkovSequence J = convolve_J(scr.scrHf, G, 10);
    for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(J[i](0, 0), 0.0, 1e-14);

    const RQSequences rq = convolve_RQ(G, J, scr.scrHz, 10);
    Eigen::MatrixXd r0(1, 4), r1(1, 4);
    r0 << -1, 0, -0.2, 1;
    r1 << 0, 0, 0, -0.5;  // G1 scrHz0 + G0 scrHz1
    EXPECT_LT((rq.R[0] - r0).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((rq.R[1] - r1).cwiseAbs().maxCoeff(), 1e-14);
    for (Eigen::Index i = 0; i < 10; ++i)
        EXPECT_NEAR(rq.Q[i].cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Inverse, IdentityFaultSystem) {
    MarkovSequence scrHf(2, 2);
    scrHf.push_back(Eigen::MatrixXd::Identity(2, 2));
    for (int i = 0; i < 7; ++i) scrHf.push_back(Eigen::MatrixXd::Zero(2, 2));
    const MarkovSequence G =
        invert_toeplitz_G(scrHf, Eigen::MatrixXd::Identity(2, 2), 8);
    EXPECT_LT((G[0] - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    for (Eigen::Index i = 1; i < 8; ++i)
        EXPECT_NEAR(G[i].cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Inverse, ToeplitzProductIdentityRandomSystem) {
    // Direct matrix-product oracle: T_L({G}) T_L({scrHf}) must be identity.
    const Eigen::Index L = 30;
    auto fx = make_pipeline_fixture(42, 3, 1, 2, {{FaultKind::Actuator, 0}}, L);
    const Eigen::MatrixXd TG = block_toeplitz(fx.G, L).dense();
    const Eigen::MatrixXd TF = block_toeplitz(fx.scr.scrHf, L).dense();
    const Eigen::Index nf = fx.G.rows();
    const Eigen::MatrixXd prod = TG * TF;
    EXPECT_LT((prod - Eigen::MatrixXd::Identity(L * nf, L * nf)).cwiseAbs().maxCoeff(),
              1e-8);
}

TEST(Inverse, ToeplitzProductIdentityAtWindowHundred) {
    // The identity holds at the largest windows the toolkit uses.
    const Eigen::Index L = 100;
    auto fx = make_pipeline_fixture(27, 4, 2, 2, {{FaultKind::Actuator, 1}}, L);
    const Eigen::MatrixXd prod = block_toeplitz(fx.G, L).dense() *
                                 block_toeplitz(fx.scr.scrHf, L).dense();
    EXPECT_LT((prod - Eigen::MatrixXd::Identity(L, L)).cwiseAbs().maxCoeff(),
              1e-8);
}

TEST(Inverse, JEqualsIdentityMinusToeplitzProduct) {
    const Eigen::Index L = 20;
    auto fx = make_pipeline_fixture(7, 3, 2, 3,
                                    {{FaultKind::Sensor, 0}, {FaultKind::Sensor, 2}},
                                    L);
    const Eigen::MatrixXd TF = block_toeplitz(fx.scr.scrHf, L).dense();
    const Eigen::MatrixXd TG = block_toeplitz(fx.G, L).dense();
    const Eigen::MatrixXd TJ = block_toeplitz(fx.J, L).dense();
    const Eigen::Index ny = fx.J.rows();
    const Eigen::MatrixXd expect =
        Eigen::MatrixXd::Identity(L * ny, L * ny) - TF * TG;
    EXPECT_LT((TJ - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Inverse, ResidualDirectionOrthogonalToFault) {
    // 2 outputs, 1 fault, H_tau^f = [1;0]: J_0 = diag(0, 1).
    MarkovSequence scrHf(2, 1);
    Eigen::MatrixXd h(2, 1);
    h << 1, 0;
    scrHf.push_back(h);
    for (int i = 0; i < 5; ++i) scrHf.push_back(Eigen::MatrixXd::Zero(2, 1));
    const Eigen::MatrixXd Pi = select_pi(h);
    const MarkovSequence G = invert_toeplitz_G(scrHf, Pi, 6);
    const MarkovSequence J = convolve_J(scrHf, G, 6);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 2);
    expect(1, 1) = 1.0;
    EXPECT_LT((J[0] - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Convolve, IdentityKernelPassesThrough) {
    const Eigen::Index L = 6;
    GaussianSampler rng(5);
    MarkovSequence scrHz(2, 4);
    for (Eigen::Index i = 0; i < L; ++i)
        scrHz.push_back(test::random_matrix(rng, 2, 4));
    MarkovSequence G(2, 2);
    G.push_back(Eigen::MatrixXd::Identity(2, 2));
    for (Eigen::Index i = 1; i < L; ++i) G.push_back(Eigen::MatrixXd::Zero(2, 2));
    MarkovSequence J(2, 2);
    for (Eigen::Index i = 0; i < L; ++i) J.push_back(Eigen::MatrixXd::Zero(2, 2));
    const RQSequences rq = convolve_RQ(G, J, scrHz, L);
    for (Eigen::Index i = 0; i < L; ++i)
        EXPECT_LT((rq.R[i] - scrHz[i]).cwiseAbs().maxCoeff(), 1e-15);
}

// ============================================================================
// Pi annihilation (used by the realization's C2 property)
// ============================================================================

TEST(Invariants, PiAnnihilatesJAndQ) {
    const Eigen::Index L = 25;
    auto fx = make_pipeline_fixture(13, 4, 2, 3,
                                    {{FaultKind::Sensor, 0}, {FaultKind::Sensor, 2}},
                                    L);
    for (Eigen::Index i = 0; i < L; ++i) {
        EXPECT_LT((fx.sig.Pi * fx.J[i]).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((fx.sig.Pi * fx.rq.Q[i]).cwiseAbs().maxCoeff(), 1e-10);
    }
}

// ============================================================================
// closed_loop_mps and the K = G + M*J identity
// ============================================================================

TEST(ClosedLoop, ZeroGainReducesToOpenLoop) {
    const Eigen::Index L = 15;
    auto fx = make_pipeline_fixture(19, 3, 2, 2, {{FaultKind::Actuator, 1}}, L);
    const auto& t = fx.truth;
    const Eigen::MatrixXd Kr = Eigen::MatrixXd::Zero(3, 2);
    const ClosedLoopMps cl =
        closed_loop_mps(t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2, Kr, L);
    for (Eigen::Index i = 0; i < L; ++i) {
        EXPECT_LT((cl.K[i] - fx.G[i]).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(cl.M[i].cwiseAbs().maxCoeff(), 0.0, 1e-15);
    }
}

TEST(ClosedLoop, AppendixIdentityOnStabilizedInstances) {
    const Eigen::Index L = 25;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto fx = make_pipeline_fixture(100 + seed, 3, 2, 3,
                                        {{FaultKind::Sensor, 1}}, L);
        const auto& t = fx.truth;
        // small random gain, redrawn until the loop is stable
        GaussianSampler rng(seed + 1);
        Eigen::MatrixXd Kr;
        do {
            Kr = test::random_matrix(rng, 3, 3, 0.1);
        } while (spectral_radius(t.Phi1 - Kr * t.C2) >= 0.95);
        const ClosedLoopMps cl =
            closed_loop_mps(t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2, Kr, L);
        for (Eigen::Index i = 0; i < L; ++i) {
            Eigen::MatrixXd rhs = fx.G[i];
            for (Eigen::Index j = 0; j <= i; ++j)
                rhs += cl.M.at_or_zero(i - j) * fx.J[j];
            EXPECT_LT((cl.K[i] - rhs).cwiseAbs().maxCoeff(), 1e-9)
                << "seed " << seed << " index " << i;
        }
    }
}

TEST(ClosedLoop, ScalarCaseGainIrrelevantWhenC2Zero) {
    const Eigen::Index L = 12;
    auto [Hu, Hy] = scalar_mps(16);
    const auto sig = make_fault_signature(Hu, Hy, {{FaultKind::Actuator, 0}});
    const auto scr = build_scrH(Hu, Hy, sig.Hf, sig.tau, L);
    const MarkovSequence G = invert_toeplitz_G(scr.scrHf, sig.Pi, L);
    const auto t = test::true_sifef(scalar_predictor(), {{FaultKind::Actuator, 0}});
    ASSERT_NEAR(t.C2.cwiseAbs().maxCoeff(), 0.0, 1e-15);
    const Eigen::MatrixXd Kr = Eigen::MatrixXd::Constant(1, 1, 0.7);
    const ClosedLoopMps cl =
        closed_loop_mps(t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2, Kr, L);
    for (Eigen::Index i = 0; i < L; ++i)
        EXPECT_LT((cl.K[i] - G[i]).cwiseAbs().maxCoeff(), 1e-12);
}

// ============================================================================
// batch_estimate
// ============================================================================

TEST(Batch, ZeroDataGivesZeroEstimates) {
    const Eigen::Index L = 10;
    auto fx = make_pipeline_fixture(23, 2, 1, 2, {{FaultKind::Actuator, 0}}, L);
    const auto& t = fx.truth;
    const ClosedLoopMps cl =
        closed_loop_mps(t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2,
                        Eigen::MatrixXd::Zero(2, 2), L);
    const Eigen::Index nz = fx.rq.R.cols();
    const Eigen::VectorXd fhat =
        batch_estimate(fx.rq.R, fx.rq.Q, cl.M, t.Phi1, t.C1,
                       Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(L * nz));
    EXPECT_NEAR(fhat.cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Batch, ScalarConstantFaultRecovered) {
    // Exact inversion of the scalar system over a 40-step window.
    const Eigen::Index L = 40;
    const PredictorModel pm = scalar_predictor();
    auto [Hu, Hy] = predictor_mps(pm, L + 4);
    const auto sig = make_fault_signature(Hu, Hy, {{FaultKind::Actuator, 0}});
    const auto scr = build_scrH(Hu, Hy, sig.Hf, sig.tau, L);
    const MarkovSequence G = invert_toeplitz_G(scr.scrHf, sig.Pi, L);
    const MarkovSequence J = convolve_J(scr.scrHf, G, L);
    const RQSequences rq = convolve_RQ(G, J, scr.scrHz, L);
    const auto t = test::true_sifef(pm, {{FaultKind::Actuator, 0}});
    const ClosedLoopMps cl = closed_loop_mps(
        t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2, Eigen::MatrixXd::Zero(1, 1), L);

    // noise-free simulation of the process form with constant fault 1
    StateSpaceModel m;
    m.A = pm.Phi + pm.K * pm.C;  // = A since Phi = A - KC
    m.B = pm.Btilde;             // D = 0
    m.C = pm.C;
    m.D = pm.D;
    m.E = m.B;
    m.G = Eigen::MatrixXd::Zero(1, 1);
    m.Q1 = Eigen::MatrixXd::Zero(1, 1);
    m.Q2 = 1e-300 * Eigen::MatrixXd::Identity(1, 1);
    const Eigen::Index N = L + 8;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(N, 1);
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(N, 1);
    const TimeSeries ts = simulate(m, InputSpec::open_loop(u), f, 1);

    const Eigen::VectorXd zbar = test::stack_zbar(ts, 0, L, sig.tau);
    const Eigen::VectorXd fhat = batch_estimate(
        rq.R, rq.Q, cl.M, t.Phi1, t.C1, Eigen::VectorXd::Zero(1), zbar);
    EXPECT_NEAR(fhat(L - 1), 1.0, 1e-6);
}

TEST(Batch, WindowLengthChecked) {
    const Eigen::Index L = 8;
    auto fx = make_pipeline_fixture(29, 2, 1, 2, {{FaultKind::Sensor, 0}}, L);
    const auto& t = fx.truth;
    const ClosedLoopMps cl =
        closed_loop_mps(t.Phi1, t.B1, t.C1, t.D1, t.C2, t.D2,
                        Eigen::MatrixXd::Zero(2, 2), L);
    EXPECT_THROW(batch_estimate(fx.rq.R, fx.rq.Q, cl.M, t.Phi1, t.C1,
                                Eigen::VectorXd::Zero(2),
                                Eigen::VectorXd::Zero(3)),
                 DimensionError);
}
