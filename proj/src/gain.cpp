#include "fefkit/gain.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <sstream>

namespace fefkit {

double spectral_radius(const Eigen::MatrixXd& A) {
    if (A.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd select_alpha(const Eigen::MatrixXd& Htauf) {
    const Eigen::Index ny = Htauf.rows();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Htauf, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-12 * sv(0)) ++rank;
    // alpha = U2^T spans the left null space; s = ny - rank.
    return svd.matrixU().rightCols(ny - rank).transpose();
}

namespace {

double are_residual_norm(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Phi,
                         const Eigen::MatrixXd& Qm, const Eigen::MatrixXd& C,
                         const Eigen::MatrixXd& Rm, const Eigen::MatrixXd& Sm) {
    Eigen::MatrixXd rhs = Phi * P * Phi.transpose() + Qm;
    if (C.rows() > 0) {
        const Eigen::MatrixXd Xi = C * P * C.transpose() + Rm;
        const Eigen::MatrixXd U = Phi * P * C.transpose() + Sm;
        rhs -= U * Xi.ldlt().solve(U.transpose());
    }
    const double denom = 1.0 + P.cwiseAbs().maxCoeff();
    return (rhs - P).cwiseAbs().maxCoeff() / denom;
}

}  // namespace

DareSolution solve_dare(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& Bw,
                        const Eigen::MatrixXd& C, const Eigen::MatrixXd& Dw,
                        const DareOptions& opts) {
    const Eigen::Index n = Phi.rows();
    const Eigen::Index s = C.rows();
    if (Bw.rows() != n || (s > 0 && Dw.rows() != s) || Bw.cols() != Dw.cols())
        throw DimensionError("solve_dare: inconsistent dimensions");

    const Eigen::MatrixXd Qm = Bw * Bw.transpose();
    const Eigen::MatrixXd Rm = Dw * Dw.transpose();
    const Eigen::MatrixXd Sm = Bw * Dw.transpose();

    if (s > 0) {
        // Xi at P = 0 must be positive definite for the iteration to start.
        Eigen::LLT<Eigen::MatrixXd> llt(Rm);
        if (llt.info() != Eigen::Success)
            throw NumericError("solve_dare: Dw Dw^T is not positive definite");
    }

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    DareSolution sol;
    sol.converged = false;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        Eigen::MatrixXd Pn = Phi * P * Phi.transpose() + Qm;
        if (s > 0) {
            const Eigen::MatrixXd Xi = C * P * C.transpose() + Rm;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Xi);
            if (ldlt.info() != Eigen::Success || !Xi.allFinite())
                throw NumericError("solve_dare: Xi lost positive definiteness at iteration " +
                                   std::to_string(it));
            const Eigen::MatrixXd U = Phi * P * C.transpose() + Sm;
            Pn -= U * ldlt.solve(U.transpose());
        }
        Pn = 0.5 * (Pn + Pn.transpose());
        if (!Pn.allFinite())
            throw NoStabilizingSolution(
                "solve_dare: iteration diverged at step " + std::to_string(it));
        const double delta = (Pn - P).cwiseAbs().maxCoeff();
        if (opts.check_monotone) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Pn - P, Eigen::EigenvaluesOnly);
            const double floor = -1e-10 * (1.0 + Pn.cwiseAbs().maxCoeff());
            if (es.eigenvalues().minCoeff() < floor)
                throw NumericError("solve_dare: iterate lost monotonicity at step " +
                                   std::to_string(it));
        }
        P = Pn;
        if (delta <= opts.tol) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    if (!sol.converged)
        throw NoStabilizingSolution(
            "solve_dare: no convergence within " + std::to_string(opts.max_iterations) +
            " iterations (existence conditions likely violated)");
    sol.P = P;
    sol.iterations = it;
    sol.residual = are_residual_norm(P, Phi, Qm, C, Rm, Sm);
    // The iteration can settle on a non-stabilizing root (or a marginal one);
    // report the implied closed loop instead of hiding it.
    Eigen::MatrixXd closed = Phi;
    if (s > 0) {
        const Eigen::MatrixXd Xi = C * P * C.transpose() + Rm;
        const Eigen::MatrixXd K =
            (Phi * P * C.transpose() + Sm) *
            Xi.ldlt().solve(Eigen::MatrixXd::Identity(s, s));
        closed -= K * C;
    }
    sol.closed_loop_radius = spectral_radius(closed);
    sol.stabilizing = sol.closed_loop_radius < 1.0;
    return sol;
}

Eigen::MatrixXd compute_gain(const FefRealization& real,
                             const Eigen::MatrixXd& SigmaE,
                             const Eigen::MatrixXd& alpha,
                             const Eigen::MatrixXd& P) {
    const Eigen::Index n = real.order();
    const Eigen::Index ny = real.ny;
    if (alpha.rows() == 0) return Eigen::MatrixXd::Zero(n, ny);

    const Eigen::MatrixXd C2b = alpha * real.C2;
    const Eigen::MatrixXd D2b = alpha * real.D2;
    const Eigen::MatrixXd Xi = C2b * P * C2b.transpose() + D2b * SigmaE * D2b.transpose();
    const Eigen::MatrixXd Kbar =
        (real.Phi1 * P * C2b.transpose() + real.B1 * SigmaE * D2b.transpose()) *
        Xi.ldlt().solve(Eigen::MatrixXd::Identity(Xi.rows(), Xi.cols()));
    const Eigen::MatrixXd Kr = Kbar * alpha;

    const double rho = spectral_radius(real.Phi1 - Kr * real.C2);
    if (rho >= 1.0) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(real.Phi1 - Kr * real.C2, false);
        std::ostringstream msg;
        msg << "compute_gain: closed loop unstable (radius " << rho << "; spectrum";
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            msg << " " << es.eigenvalues()(i);
        msg << ")";
        throw DesignFailed(msg.str());
    }
    return Kr;
}

GainDesign design_gain(const FefRealization& real, const Eigen::MatrixXd& SigmaE,
                       const Eigen::MatrixXd& Htauf, const DareOptions& opts) {
    const Eigen::Index n = real.order();
    GainDesign g;
    g.alpha = select_alpha(Htauf);

    if (g.alpha.rows() == 0) {
        g.P = Eigen::MatrixXd::Zero(n, n);
        g.Kbar = Eigen::MatrixXd::Zero(n, 0);
        g.Kr = Eigen::MatrixXd::Zero(n, real.ny);
        g.XiE = Eigen::MatrixXd::Zero(0, 0);
        g.closed_loop_radius = spectral_radius(real.Phi1);
        g.degenerate = true;
        return g;
    }

    const Eigen::MatrixXd SigE_half = psd_sqrt(SigmaE);
    const Eigen::MatrixXd C2b = g.alpha * real.C2;
    const Eigen::MatrixXd D2b = g.alpha * real.D2;
    DareSolution sol = solve_dare(real.Phi1, real.B1 * SigE_half, C2b,
                                  D2b * SigE_half, opts);
    g.P = sol.P;
    g.are_residual = sol.residual;
    g.iterations = sol.iterations;
    g.XiE = C2b * g.P * C2b.transpose() + D2b * SigmaE * D2b.transpose();
    g.Kr = compute_gain(real, SigmaE, g.alpha, g.P);
    g.Kbar = (real.Phi1 * g.P * C2b.transpose() + real.B1 * SigmaE * D2b.transpose()) *
             g.XiE.ldlt().solve(Eigen::MatrixXd::Identity(g.XiE.rows(), g.XiE.cols()));
    g.closed_loop_radius = spectral_radius(real.Phi1 - g.Kr * real.C2);
    return g;
}

FefDesign design_pipeline(const MarkovSequence& Hu, const MarkovSequence& Hy,
                          const std::vector<FaultChannel>& faults,
                          const Eigen::MatrixXd& SigmaE,
                          const PipelineOptions& opts) {
    const Eigen::Index nu = Hu.cols();
    const Eigen::Index ny = Hu.rows();
    FaultSignature sig = make_fault_signature(Hu, Hy, faults, opts.reldeg);
    ScrSequences scr = build_scrH(Hu, Hy, sig.Hf, sig.tau, opts.L);
    MarkovSequence G = invert_toeplitz_G(scr.scrHf, sig.Pi, opts.L);
    MarkovSequence J = convolve_J(scr.scrHf, G, opts.L);
    RQSequences rq = convolve_RQ(G, J, scr.scrHz, opts.L);
    RealizeResult rr = realize_pipeline(rq.R, rq.Q, J, opts.l, opts.m, opts.nhat,
                                        sig.tau, sig.Pi, nu, ny);

    FefDesign d;
    d.realization = std::move(rr.realization);
    d.diagnostics = std::move(rr.diagnostics);
    d.SigmaE = SigmaE;
    const Eigen::MatrixXd Htauf = sig.Hf[sig.tau];
    d.existence = check_existence(d.realization, SigmaE, select_alpha(Htauf));
    if (opts.with_gain) {
        d.gain = design_gain(d.realization, SigmaE, Htauf, opts.dare);
    } else {
        d.gain.alpha = select_alpha(Htauf);
        d.gain.P = Eigen::MatrixXd::Zero(opts.nhat, opts.nhat);
        d.gain.Kbar = Eigen::MatrixXd::Zero(opts.nhat, d.gain.alpha.rows());
        d.gain.Kr = Eigen::MatrixXd::Zero(opts.nhat, ny);
        d.gain.XiE = Eigen::MatrixXd::Zero(d.gain.alpha.rows(), d.gain.alpha.rows());
        d.gain.closed_loop_radius = spectral_radius(d.realization.Phi1);
        d.gain.open_loop = true;
    }
    return d;
}

ExistenceReport check_existence(const FefRealization& real,
                                const Eigen::MatrixXd& SigmaE,
                                const Eigen::MatrixXd& alpha,
                                int grid_points) {
    const Eigen::Index n = real.order();
    const Eigen::Index s = alpha.rows();
    ExistenceReport rep;
    rep.detectability_margin = 1.0;
    rep.no_unstable_modes = true;
    rep.controllability_margin = 1.0;
    rep.worst_omega = 0.0;

    Eigen::EigenSolver<Eigen::MatrixXd> es(real.Phi1);
    const auto eigs = es.eigenvalues();

    // Detectability: PBH test on [Phi1 - lambda I; C2] at every eigenvalue on
    // or outside the unit circle.
    for (Eigen::Index i = 0; i < eigs.size(); ++i) {
        const std::complex<double> lam = eigs(i);
        if (std::abs(lam) < 1.0 - 1e-9) continue;
        rep.no_unstable_modes = false;
        Eigen::MatrixXcd pbh(n + real.C2.rows(), n);
        pbh.topRows(n) = real.Phi1.cast<std::complex<double>>();
        pbh.topRows(n).diagonal().array() -= lam;
        pbh.bottomRows(real.C2.rows()) = real.C2.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
        const auto& sv = svd.singularValues();
        PbhSample sample;
        sample.lambda = lam;
        sample.sigma_min = sv(sv.size() - 1);
        sample.normalized = sv(sv.size() - 1) / sv(0);
        rep.detectability.push_back(sample);
        rep.detectability_margin = std::min(rep.detectability_margin, sample.normalized);
    }

    // Unit-circle controllability of (F_s, Q_s^{1/2}).
    Eigen::MatrixXd Fs = real.Phi1;
    Eigen::MatrixXd Qs = real.B1 * psd_sqrt(SigmaE);
    if (s > 0) {
        const Eigen::MatrixXd C2b = alpha * real.C2;
        const Eigen::MatrixXd D2b = alpha * real.D2;
        const Eigen::MatrixXd Rb = D2b * SigmaE * D2b.transpose();
        const Eigen::MatrixXd W =
            real.B1 * SigmaE * D2b.transpose() *
            Rb.ldlt().solve(Eigen::MatrixXd::Identity(s, s));
        Fs -= W * C2b;
        Qs -= W * D2b * psd_sqrt(SigmaE);
    }

    std::vector<double> omegas;
    omegas.reserve(grid_points + 2 * n);
    for (int k = 0; k < grid_points; ++k)
        omegas.push_back(2.0 * M_PI * k / grid_points);
    // Critical points: the arguments of near-unit-circle eigenvalues of both
    // Phi1 and F_s; the grid alone can straddle an exact rank drop.
    auto add_args = [&omegas](const Eigen::VectorXcd& ev) {
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (std::abs(std::abs(ev(i)) - 1.0) < 1e-6)
                omegas.push_back(std::arg(ev(i)));
    };
    add_args(eigs);
    Eigen::EigenSolver<Eigen::MatrixXd> esF(Fs, false);
    add_args(esF.eigenvalues());

    Eigen::MatrixXcd pencil(n, n + Qs.cols());
    for (double w : omegas) {
        pencil.leftCols(n) = Fs.cast<std::complex<double>>();
        pencil.leftCols(n).diagonal().array() -=
            std::complex<double>(std::cos(w), std::sin(w));
        pencil.rightCols(Qs.cols()) = Qs.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
        const auto& sv = svd.singularValues();
        const double normalized = sv(sv.size() - 1) / std::max(sv(0), 1e-300);
        if (normalized < rep.controllability_margin) {
            rep.controllability_margin = normalized;
            rep.worst_omega = w;
        }
    }
    return rep;
}

}  // namespace fefkit
