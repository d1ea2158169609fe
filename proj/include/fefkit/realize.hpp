#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fefkit/markov.hpp"

namespace fefkit {

/// Rank-truncated SVD of a block-Hankel matrix with the balanced
/// controllability/observability split Chat = S^{1/2} V^T, Ohat = U S^{1/2}.
struct HankelFactorization {
    Eigen::MatrixXd U;          ///< left singular vectors, first nhat columns
    Eigen::VectorXd sigma;      ///< kept singular values, descending
    Eigen::MatrixXd V;          ///< right singular vectors, first nhat columns
    Eigen::Index nhat;
    Eigen::MatrixXd Chat;       ///< nhat x cols controllability factor
    Eigen::MatrixXd Ohat;       ///< rows x nhat observability factor
    double retained_energy;     ///< sum of kept sigma^2
    double discarded_energy;    ///< sum of dropped sigma^2
    Eigen::VectorXd full_sigma; ///< full spectrum, for order diagnostics
};

HankelFactorization truncated_svd(const Eigen::MatrixXd& H, Eigen::Index nhat);

/// Order suggestion from the singular value spectrum: the index with the
/// largest gap ratio sigma_i / sigma_{i+1} inside the search window. Advisory
/// only; the chosen order stays explicit in every design.
struct OrderSuggestion {
    Eigen::Index order;
    double gap_ratio;
    bool low_confidence;  ///< no pronounced gap (best ratio below 10)
    std::vector<double> spectrum;
};

OrderSuggestion suggest_order(const Eigen::VectorXd& sigma,
                              Eigen::Index window = 0);

/// State-space pieces of the realized fault estimation filter.
///
/// Df1Gf1 holds R_0 = [D_f1, G_f1]; Df2Gf2 holds Q_0 = [-D_f2, G_f2]. Both act
/// on the stacked window z = [u(k..k+tau); y(k..k+tau)], as does BfKf.
struct FefRealization {
    Eigen::MatrixXd Phi1;    ///< nhat x nhat
    Eigen::MatrixXd BfKf;    ///< nhat x (tau+1)(nu+ny)
    Eigen::MatrixXd C1;      ///< nf x nhat
    Eigen::MatrixXd C2;      ///< ny x nhat
    Eigen::MatrixXd B1;      ///< nhat x ny
    Eigen::MatrixXd D2;      ///< ny x ny, equals J_0
    Eigen::MatrixXd Df1Gf1;  ///< nf x (tau+1)(nu+ny), equals R_0
    Eigen::MatrixXd Df2Gf2;  ///< ny x (tau+1)(nu+ny), equals Q_0
    Eigen::Index tau = 0;
    Eigen::MatrixXd Pi;      ///< nf x ny
    Eigen::Index nu = 0;
    Eigen::Index ny = 0;

    Eigen::Index order() const { return Phi1.rows(); }
    Eigen::Index nf() const { return C1.rows(); }
    Eigen::Index window_width() const { return BfKf.cols(); }
};

struct RealizationDiagnostics {
    Eigen::VectorXd sigma_R;
    Eigen::VectorXd sigma_Q;
    Eigen::VectorXd sigma_J;
    double pi_c2_residual;  ///< max |Pi C2hat|
    double pi_d2_residual;  ///< max |Pi D2hat|
    double shift_condition; ///< condition estimate of the shift normal matrix
};

struct RealizeResult {
    FefRealization realization;
    RealizationDiagnostics diagnostics;
};

/// Hankel-SVD realization of the filter from the {R_i}, {Q_i}, {J_i}
/// sequences: SVD of H_R gives (Phi1, [Bf Kf], C1); the shared controllability
/// factor transfers H_Q into C2 and H_J into B1; D2 = J_0 and the
/// feed-through blocks come from R_0 and Q_0.
RealizeResult realize_pipeline(const MarkovSequence& R, const MarkovSequence& Q,
                               const MarkovSequence& J, Eigen::Index l,
                               Eigen::Index m, Eigen::Index nhat,
                               Eigen::Index tau, const Eigen::MatrixXd& Pi,
                               Eigen::Index nu, Eigen::Index ny);

/// Plain Ho-Kalman realization of one Markov sequence: order-nhat (A, B, C)
/// with C A^{i-1} B approximating W_i. Used for identifying a predictor model
/// from its combined input/output MPs.
struct HoKalmanResult {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::VectorXd sigma;
};

HoKalmanResult ho_kalman(const MarkovSequence& W, Eigen::Index l,
                         Eigen::Index m, Eigen::Index nhat);

}  // namespace fefkit
