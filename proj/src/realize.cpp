#include "fefkit/realize.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

namespace fefkit {

namespace {

// Least-squares solve X * A = B for X, via SVD pseudo-inverse of A with a
// relative rank cutoff. Returns B * pinv(A).
Eigen::MatrixXd solve_right_pinv(const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& A,
                                 double rtol = 1e-13) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0)
        return Eigen::MatrixXd::Zero(B.rows(), A.rows());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rtol * sv(0)) inv(i) = 1.0 / sv(i);
    return B * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::MatrixXd solve_left_pinv(const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B,
                                double rtol = 1e-13) {
    // pinv(A) * B
    return solve_right_pinv(B.transpose(), A.transpose(), rtol).transpose();
}

}  // namespace

HankelFactorization truncated_svd(const Eigen::MatrixXd& H, Eigen::Index nhat) {
    const Eigen::Index bound = std::min(H.rows(), H.cols());
    if (nhat < 1 || nhat > bound)
        throw DimensionError("truncated_svd: order " + std::to_string(nhat) +
                             " exceeds the rank bound " + std::to_string(bound));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    HankelFactorization f;
    f.full_sigma = svd.singularValues();
    f.nhat = nhat;
    f.U = svd.matrixU().leftCols(nhat);
    f.V = svd.matrixV().leftCols(nhat);
    f.sigma = f.full_sigma.head(nhat);
    const Eigen::VectorXd root = f.sigma.cwiseSqrt();
    f.Chat = root.asDiagonal() * f.V.transpose();
    f.Ohat = f.U * root.asDiagonal();
    f.retained_energy = f.sigma.squaredNorm();
    f.discarded_energy = f.full_sigma.squaredNorm() - f.retained_energy;
    return f;
}

OrderSuggestion suggest_order(const Eigen::VectorXd& sigma, Eigen::Index window) {
    if (sigma.size() < 2)
        throw DimensionError("suggest_order: need at least two singular values");
    Eigen::Index last = sigma.size() - 1;
    if (window > 0) last = std::min(last, window);

    OrderSuggestion s;
    s.order = 1;
    s.gap_ratio = 0.0;
    for (Eigen::Index i = 0; i < last; ++i) {
        const double denom = std::max(sigma(i + 1), 1e-300);
        const double ratio = sigma(i) / denom;
        if (ratio > s.gap_ratio) {
            s.gap_ratio = ratio;
            s.order = i + 1;
        }
    }
    s.low_confidence = s.gap_ratio < 10.0;
    s.spectrum.assign(sigma.data(), sigma.data() + sigma.size());
    return s;
}

RealizeResult realize_pipeline(const MarkovSequence& R, const MarkovSequence& Q,
                               const MarkovSequence& J, Eigen::Index l,
                               Eigen::Index m, Eigen::Index nhat,
                               Eigen::Index tau, const Eigen::MatrixXd& Pi,
                               Eigen::Index nu, Eigen::Index ny) {
    const Eigen::Index nz = (tau + 1) * (nu + ny);
    const Eigen::Index nf = R.rows();
    if (R.cols() != nz || Q.cols() != nz)
        throw DimensionError("realize_pipeline: R/Q block width must be (tau+1)(nu+ny)");
    if (Q.size() != R.size() || J.size() != R.size())
        throw DimensionError("realize_pipeline: R, Q, J lengths differ");
    if (nhat > std::min(l * nf, m * nz))
        throw DimensionError("realize_pipeline: order exceeds Hankel rank bound");

    const Eigen::MatrixXd HR = block_hankel(R, l, m).dense();
    const Eigen::MatrixXd HQ = block_hankel(Q, l, m).dense();
    const Eigen::MatrixXd HJ = block_hankel(J, l, m).dense();

    HankelFactorization fR = truncated_svd(HR, nhat);
    HankelFactorization fQ = truncated_svd(HQ, std::min(nhat, std::min(HQ.rows(), HQ.cols())));
    HankelFactorization fJ = truncated_svd(HJ, std::min(nhat, std::min(HJ.rows(), HJ.cols())));
    const Eigen::MatrixXd HQ_hat = fQ.Ohat * fQ.Chat;
    const Eigen::MatrixXd HJ_hat = fJ.Ohat * fJ.Chat;

    FefRealization real;
    real.tau = tau;
    real.Pi = Pi;
    real.nu = nu;
    real.ny = ny;
    real.BfKf = fR.Chat.leftCols(nz);
    real.C1 = fR.Ohat.topRows(nf);

    // Shift-invariance least squares on the controllability factor. A small
    // relative ridge keeps the normal matrix invertible when truncation leaves
    // nearly flat directions.
    const Eigen::MatrixXd CR1 = fR.Chat.leftCols((m - 1) * nz);
    const Eigen::MatrixXd CR2 = fR.Chat.rightCols((m - 1) * nz);
    Eigen::MatrixXd gram = CR1 * CR1.transpose();
    const double scale = gram.trace() / static_cast<double>(std::max<Eigen::Index>(nhat, 1));
    gram.diagonal().array() += 1e-12 * std::max(scale, 1e-300);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    real.Phi1 = ldlt.solve((CR2 * CR1.transpose()).transpose()).transpose();
    const double shift_cond =
        gram.diagonal().maxCoeff() / std::max(gram.diagonal().minCoeff(), 1e-300);
    if (!real.Phi1.allFinite())
        throw RealizationDegenerate("realize_pipeline: shift equation is singular",
                                    shift_cond);

    // Shared controllability factor: H_Q = O_Q * C_R, H_J = O_Q * C_J.
    const Eigen::MatrixXd OQ = solve_right_pinv(HQ_hat, fR.Chat);
    real.C2 = -OQ.topRows(ny);
    const Eigen::MatrixXd CJ = solve_left_pinv(OQ, HJ_hat);
    real.B1 = CJ.leftCols(ny);
    real.D2 = J[0];
    real.Df1Gf1 = R[0];
    real.Df2Gf2 = Q[0];

    if (!real.C2.allFinite() || !real.B1.allFinite())
        throw RealizationDegenerate("realize_pipeline: observability transfer failed",
                                    shift_cond);

    RealizationDiagnostics diag;
    diag.sigma_R = fR.full_sigma;
    diag.sigma_Q = fQ.full_sigma;
    diag.sigma_J = fJ.full_sigma;
    diag.pi_c2_residual = (Pi * real.C2).cwiseAbs().maxCoeff();
    diag.pi_d2_residual = (Pi * real.D2).cwiseAbs().maxCoeff();
    diag.shift_condition = shift_cond;
    return RealizeResult{std::move(real), std::move(diag)};
}

HoKalmanResult ho_kalman(const MarkovSequence& W, Eigen::Index l,
                         Eigen::Index m, Eigen::Index nhat) {
    const Eigen::Index r = W.rows();
    const Eigen::Index c = W.cols();
    const Eigen::MatrixXd H = block_hankel(W, l, m).dense();
    HankelFactorization f = truncated_svd(H, nhat);

    const Eigen::MatrixXd C1 = f.Chat.leftCols((m - 1) * c);
    const Eigen::MatrixXd C2 = f.Chat.rightCols((m - 1) * c);
    Eigen::MatrixXd gram = C1 * C1.transpose();
    const double scale = gram.trace() / static_cast<double>(std::max<Eigen::Index>(nhat, 1));
    gram.diagonal().array() += 1e-12 * std::max(scale, 1e-300);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);

    HoKalmanResult res;
    res.A = ldlt.solve((C2 * C1.transpose()).transpose()).transpose();
    res.B = f.Chat.leftCols(c);
    res.C = f.Ohat.topRows(r);
    res.sigma = f.full_sigma;
    if (!res.A.allFinite())
        throw RealizationDegenerate("ho_kalman: shift equation is singular",
                                    gram.diagonal().maxCoeff() /
                                        std::max(gram.diagonal().minCoeff(), 1e-300));
    return res;
}

}  // namespace fefkit
