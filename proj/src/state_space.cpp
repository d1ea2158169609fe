#include "fefkit/state_space.hpp"

#include <Eigen/Eigenvalues>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "fefkit/gain.hpp"
#include "fefkit/random.hpp"

namespace fefkit {

namespace {

bool symmetric_psd(const Eigen::MatrixXd& M, double tol = 1e-9) {
    if (M.rows() != M.cols()) return false;
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + M.cwiseAbs().maxCoeff()))
        return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * (1.0 + M.cwiseAbs().maxCoeff());
}

}  // namespace

void StateSpaceModel::validate() const {
    const Eigen::Index nx = n();
    if (A.cols() != nx || B.rows() != nx || C.cols() != nx || D.rows() != ny() ||
        D.cols() != nu())
        throw DimensionError("StateSpaceModel: inconsistent A/B/C/D dimensions");
    if (E.rows() != nx && E.size() > 0)
        throw DimensionError("StateSpaceModel: E row count");
    if (G.rows() != ny() && G.size() > 0)
        throw DimensionError("StateSpaceModel: G row count");
    if (E.cols() != G.cols())
        throw DimensionError("StateSpaceModel: E and G fault widths differ");
    if (Q1.rows() != nx || Q1.cols() != nx)
        throw DimensionError("StateSpaceModel: Q1 must be n x n");
    if (Q2.rows() != ny() || Q2.cols() != ny())
        throw DimensionError("StateSpaceModel: Q2 must be ny x ny");
    if (!symmetric_psd(Q1))
        throw NumericError("StateSpaceModel: Q1 is not symmetric PSD");
    Eigen::LLT<Eigen::MatrixXd> llt(Q2);
    if (llt.info() != Eigen::Success)
        throw NumericError("StateSpaceModel: Q2 is not positive definite");
    if (dt <= 0.0) throw DimensionError("StateSpaceModel: dt must be positive");
}

StateSpaceModel zoh_discretize(const ContinuousModel& m, double dt) {
    if (dt <= 0.0) throw DimensionError("zoh_discretize: dt must be positive");
    const Eigen::Index n = m.A.rows();
    const Eigen::Index nu = m.B.cols();
    if (m.A.cols() != n || m.B.rows() != n)
        throw DimensionError("zoh_discretize: A/B dimensions");

    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + nu, n + nu);
    aug.topLeftCorner(n, n) = m.A * dt;
    aug.topRightCorner(n, nu) = m.B * dt;
    const Eigen::MatrixXd expAug = aug.exp();
    if (!expAug.allFinite())
        throw NumericError("zoh_discretize: matrix exponential is not finite");

    StateSpaceModel d;
    d.A = expAug.topLeftCorner(n, n);
    d.B = expAug.topRightCorner(n, nu);
    d.C = m.C;
    d.D = m.D;
    d.E = Eigen::MatrixXd::Zero(n, 0);
    d.G = Eigen::MatrixXd::Zero(m.C.rows(), 0);
    d.Q1 = Eigen::MatrixXd::Zero(n, n);
    d.Q2 = Eigen::MatrixXd::Identity(m.C.rows(), m.C.rows());
    d.dt = dt;
    return d;
}

namespace {

// Series composition on plain quadruples: stage1 output feeds stage2 input.
void series_pair(Eigen::MatrixXd& A, Eigen::MatrixXd& B, Eigen::MatrixXd& C,
                 Eigen::MatrixXd& D, const Eigen::MatrixXd& A2,
                 const Eigen::MatrixXd& B2, const Eigen::MatrixXd& C2,
                 const Eigen::MatrixXd& D2) {
    if (B2.cols() != C.rows())
        throw DimensionError("series_connect: channel dimensions do not chain");
    const Eigen::Index n1 = A.rows();
    const Eigen::Index n2 = A2.rows();
    Eigen::MatrixXd An = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    An.topLeftCorner(n1, n1) = A;
    An.bottomLeftCorner(n2, n1) = B2 * C;
    An.bottomRightCorner(n2, n2) = A2;
    Eigen::MatrixXd Bn(n1 + n2, B.cols());
    Bn.topRows(n1) = B;
    Bn.bottomRows(n2) = B2 * D;
    Eigen::MatrixXd Cn(C2.rows(), n1 + n2);
    Cn.leftCols(n1) = D2 * C;
    Cn.rightCols(n2) = C2;
    A = std::move(An);
    B = std::move(Bn);
    C = std::move(Cn);
    D = D2 * D;
}

}  // namespace

ContinuousModel series_connect(std::span<const ContinuousModel> stages) {
    if (stages.empty()) throw DimensionError("series_connect: no stages");
    ContinuousModel out = stages.front();
    for (std::size_t i = 1; i < stages.size(); ++i)
        series_pair(out.A, out.B, out.C, out.D, stages[i].A, stages[i].B,
                    stages[i].C, stages[i].D);
    return out;
}

StateSpaceModel series_connect(std::span<const StateSpaceModel> stages) {
    if (stages.empty()) throw DimensionError("series_connect: no stages");
    StateSpaceModel out = stages.front();
    for (std::size_t i = 1; i < stages.size(); ++i) {
        if (stages[i].dt != out.dt)
            throw DimensionError("series_connect: sample intervals differ");
        series_pair(out.A, out.B, out.C, out.D, stages[i].A, stages[i].B,
                    stages[i].C, stages[i].D);
    }
    out.E = Eigen::MatrixXd::Zero(out.n(), 0);
    out.G = Eigen::MatrixXd::Zero(out.ny(), 0);
    out.Q1 = Eigen::MatrixXd::Zero(out.n(), out.n());
    out.Q2 = Eigen::MatrixXd::Identity(out.ny(), out.ny());
    return out;
}

PredictorModel to_predictor(const StateSpaceModel& m) {
    m.validate();
    const Eigen::Index n = m.n();
    const Eigen::Index ny = m.ny();

    // Filtering Riccati equation for (A, C, Q1, Q2); the noise inputs are
    // stacked so the cross term Bw Dw^T vanishes.
    Eigen::MatrixXd Bw(n, n + ny);
    Bw << psd_sqrt(m.Q1), Eigen::MatrixXd::Zero(n, ny);
    Eigen::MatrixXd Dw(ny, n + ny);
    Dw << Eigen::MatrixXd::Zero(ny, n), psd_sqrt(m.Q2);
    DareSolution sol = solve_dare(m.A, Bw, m.C, Dw);

    const Eigen::MatrixXd S = m.C * sol.P * m.C.transpose() + m.Q2;
    const Eigen::MatrixXd K =
        (m.A * sol.P * m.C.transpose()) *
        S.ldlt().solve(Eigen::MatrixXd::Identity(ny, ny));

    PredictorModel p;
    p.Phi = m.A - K * m.C;
    p.Btilde = m.B - K * m.D;
    p.Etilde = m.E - K * m.G;
    p.K = K;
    p.C = m.C;
    p.D = m.D;
    p.G = m.G;
    p.SigmaE = S;

    const double rho = spectral_radius(p.Phi);
    if (rho >= 1.0)
        throw NoStabilizingSolution(
            "to_predictor: predictor is not stable (radius " + std::to_string(rho) +
            "); (A, C) is likely undetectable");
    return p;
}

InputSpec InputSpec::open_loop(Eigen::MatrixXd u_series) {
    InputSpec s;
    s.u = std::move(u_series);
    return s;
}

InputSpec InputSpec::feedback(Eigen::MatrixXd F, Eigen::MatrixXd eta_series) {
    InputSpec s;
    s.feedback_gain = std::move(F);
    s.eta = std::move(eta_series);
    return s;
}

TimeSeries simulate(const StateSpaceModel& m, const InputSpec& input,
                    const Eigen::MatrixXd& fault, std::uint64_t seed,
                    const SimulateOptions& opts) {
    m.validate();
    const Eigen::Index N = input.horizon();
    if (N < 1) throw DimensionError("simulate: horizon must be at least 1");
    const Eigen::Index n = m.n();
    const Eigen::Index nu = m.nu();
    const Eigen::Index ny = m.ny();
    const Eigen::Index nf = m.nf();
    if (fault.rows() > 0 && (fault.rows() < N || fault.cols() != nf))
        throw DimensionError("simulate: fault series must be N x nf");
    if (!input.is_feedback() && input.u.cols() != nu)
        throw DimensionError("simulate: input series width");
    if (input.is_feedback() &&
        (input.feedback_gain.rows() != nu || input.feedback_gain.cols() != ny ||
         input.eta.cols() != nu))
        throw DimensionError("simulate: feedback law dimensions");

    const Eigen::MatrixXd L1 = psd_sqrt(m.Q1);
    const Eigen::MatrixXd L2 = psd_sqrt(m.Q2);
    GaussianSampler rng(seed);

    // In feedback the measurement closes an algebraic loop through D:
    // (I + D F) y = C x + D eta + G f + w2.
    Eigen::PartialPivLU<Eigen::MatrixXd> loop;
    bool need_loop_solve = false;
    if (input.is_feedback() && m.D.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::MatrixXd IDF =
            Eigen::MatrixXd::Identity(ny, ny) + m.D * input.feedback_gain;
        loop.compute(IDF);
        need_loop_solve = true;
    }

    TimeSeries ts;
    ts.u.resize(N, nu);
    ts.y.resize(N, ny);
    ts.f.resize(fault.rows() > 0 ? N : 0, nf);
    ts.x.resize(opts.record_state ? N : 0, n);

    Eigen::VectorXd x = opts.x0.value_or(Eigen::VectorXd::Zero(n));
    if (x.size() != n) throw DimensionError("simulate: x0 dimension");

    for (Eigen::Index k = 0; k < N; ++k) {
        const Eigen::VectorXd f = fault.rows() > 0
                                      ? Eigen::VectorXd(fault.row(k).transpose())
                                      : Eigen::VectorXd::Zero(nf);
        const Eigen::VectorXd w2 = L2 * rng.vector(ny);
        Eigen::VectorXd u(nu);
        Eigen::VectorXd y(ny);
        if (input.is_feedback()) {
            const Eigen::VectorXd eta = input.eta.row(k).transpose();
            Eigen::VectorXd rhs = m.C * x + m.D * eta + w2;
            if (nf > 0) rhs += m.G * f;
            y = need_loop_solve ? loop.solve(rhs) : rhs;
            u = -input.feedback_gain * y + eta;
        } else {
            u = input.u.row(k).transpose();
            y = m.C * x + m.D * u + w2;
            if (nf > 0) y += m.G * f;
        }
        const Eigen::VectorXd w1 = L1 * rng.vector(n);
        Eigen::VectorXd xn = m.A * x + m.B * u + w1;
        if (nf > 0) xn += m.E * f;

        if (!y.allFinite() || !xn.allFinite())
            throw DivergenceError(
                "simulate: non-finite values at sample " + std::to_string(k), k);

        ts.u.row(k) = u.transpose();
        ts.y.row(k) = y.transpose();
        if (ts.f.rows() > 0) ts.f.row(k) = f.transpose();
        if (ts.x.rows() > 0) ts.x.row(k) = x.transpose();
        x = std::move(xn);
    }
    return ts;
}

std::pair<MarkovSequence, MarkovSequence> predictor_mps(const PredictorModel& m,
                                                        Eigen::Index L) {
    const Eigen::Index ny = m.ny();
    MarkovSequence Hu(ny, m.nu());
    MarkovSequence Hy(ny, ny);
    Hu.push_back(m.D);
    Hy.push_back(Eigen::MatrixXd::Zero(ny, ny));
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m.n(), m.n());
    for (Eigen::Index i = 1; i < L; ++i) {
        Hu.push_back(m.C * power * m.Btilde);
        Hy.push_back(m.C * power * m.K);
        power = m.Phi * power;
    }
    return {std::move(Hu), std::move(Hy)};
}

void set_fault_channels(StateSpaceModel& m, std::span<const FaultChannel> faults) {
    const Eigen::Index nf = static_cast<Eigen::Index>(faults.size());
    m.E.resize(m.n(), nf);
    m.G.resize(m.ny(), nf);
    for (Eigen::Index c = 0; c < nf; ++c) {
        const auto& fc = faults[c];
        if (fc.kind == FaultKind::Actuator) {
            if (fc.channel < 0 || fc.channel >= m.nu())
                throw DimensionError("set_fault_channels: actuator channel out of range");
            m.E.col(c) = m.B.col(fc.channel);
            m.G.col(c) = m.D.col(fc.channel);
        } else {
            if (fc.channel < 0 || fc.channel >= m.ny())
                throw DimensionError("set_fault_channels: sensor channel out of range");
            m.E.col(c).setZero();
            m.G.col(c) = Eigen::VectorXd::Unit(m.ny(), fc.channel);
        }
    }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predictor_fault_terms(
    const PredictorModel& m, std::span<const FaultChannel> faults) {
    const Eigen::Index nf = static_cast<Eigen::Index>(faults.size());
    Eigen::MatrixXd Etilde(m.n(), nf);
    Eigen::MatrixXd G(m.ny(), nf);
    for (Eigen::Index c = 0; c < nf; ++c) {
        const auto& fc = faults[c];
        if (fc.kind == FaultKind::Actuator) {
            // E = B^{[j]}, G = D^{[j]}; Etilde = E - K G = Btilde^{[j]}.
            Etilde.col(c) = m.Btilde.col(fc.channel);
            G.col(c) = m.D.col(fc.channel);
        } else {
            G.col(c) = Eigen::VectorXd::Unit(m.ny(), fc.channel);
            Etilde.col(c) = -m.K * G.col(c);
        }
    }
    return {std::move(Etilde), std::move(G)};
}

}  // namespace fefkit
