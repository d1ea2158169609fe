#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fefkit/realize.hpp"

namespace fefkit {

/// Rows spanning the left null space of H_tau^f (U2^T from its SVD).
/// Empty (0 x ny) when H_tau^f is square and full rank; the gain design then
/// degenerates to Kr = 0.
Eigen::MatrixXd select_alpha(const Eigen::MatrixXd& Htauf);

struct DareOptions {
    double tol = 1e-12;       ///< max-entry change convergence threshold
    int max_iterations = 100000;
    bool check_monotone = false;  ///< verify P_{k+1} >= P_k each step
};

struct DareSolution {
    Eigen::MatrixXd P;
    double residual;     ///< max-entry ARE residual, relative
    int iterations;
    bool converged;
    double closed_loop_radius;  ///< rho(Phi - Kbar C) at the returned P
    bool stabilizing;           ///< closed loop strictly inside the unit circle
};

/// Stabilizing solution of
///   P = Phi P Phi^T + Bw Bw^T
///       - (Phi P C^T + Bw Dw^T) (C P C^T + Dw Dw^T)^{-1} (...)^T
/// by fixed-point iteration from P = 0. With zero-row C the update term
/// drops and the iteration reduces to the Lyapunov sum.
DareSolution solve_dare(const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& Bw,
                        const Eigen::MatrixXd& C, const Eigen::MatrixXd& Dw,
                        const DareOptions& opts = {});

struct GainDesign {
    Eigen::MatrixXd alpha;  ///< s x ny, s = ny - rank(H_tau^f)
    Eigen::MatrixXd P;      ///< ARE solution
    Eigen::MatrixXd Kbar;   ///< nhat x s
    Eigen::MatrixXd Kr;     ///< nhat x ny
    Eigen::MatrixXd XiE;    ///< s x s innovation-like covariance
    double are_residual = 0.0;
    double closed_loop_radius = 0.0;
    int iterations = 0;
    bool degenerate = false;  ///< s == 0, Kr fixed at zero
    bool open_loop = false;   ///< Kr forced to zero by request
};

/// Kbar = (Phi1 P C2bar^T + B1 SigmaE D2bar^T) XiE^{-1}, Kr = Kbar alpha.
/// Throws DesignFailed when the closed loop Phi1 - Kr C2 is not stable.
Eigen::MatrixXd compute_gain(const FefRealization& real,
                             const Eigen::MatrixXd& SigmaE,
                             const Eigen::MatrixXd& alpha,
                             const Eigen::MatrixXd& P);

/// Full gain design: alpha selection from H_tau^f, ARE solve on
/// (Phi1, B1 SigmaE^{1/2}, alpha C2, alpha D2 SigmaE^{1/2}), gain formation,
/// diagnostics. With square full-rank H_tau^f the design degenerates to
/// Kr = 0 and is marked as such rather than erroring.
GainDesign design_gain(const FefRealization& real, const Eigen::MatrixXd& SigmaE,
                       const Eigen::MatrixXd& Htauf, const DareOptions& opts = {});

/// Numeric test of the stabilizing-solution existence conditions.
struct PbhSample {
    std::complex<double> lambda;
    double sigma_min;   ///< smallest singular value of the PBH matrix
    double normalized;  ///< sigma_min / sigma_max of the same matrix
};

struct ExistenceReport {
    std::vector<PbhSample> detectability;  ///< eigenvalues with |lambda| >= 1-1e-9
    double detectability_margin;           ///< min normalized value, 1 if vacuous
    bool no_unstable_modes;
    double controllability_margin;  ///< min over the unit-circle grid
    double worst_omega;             ///< argument where the minimum occurs
};

ExistenceReport check_existence(const FefRealization& real,
                                const Eigen::MatrixXd& SigmaE,
                                const Eigen::MatrixXd& alpha,
                                int grid_points = 720);

/// Spectral radius helper used across modules.
double spectral_radius(const Eigen::MatrixXd& A);

/// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M);

struct PipelineOptions {
    Eigen::Index L = 90;
    Eigen::Index l = 45;
    Eigen::Index m = 45;
    Eigen::Index nhat = 8;
    RelativeDegreeOptions reldeg{};
    bool with_gain = true;  ///< false leaves the open-loop filter (Kr = 0)
    DareOptions dare{};
};

/// Complete filter design: realization, gain, existence test, diagnostics.
struct FefDesign {
    FefRealization realization;
    GainDesign gain;
    ExistenceReport existence;
    Eigen::MatrixXd SigmaE;
    RealizationDiagnostics diagnostics;
};

/// End-to-end design from predictor Markov parameters: fault MPs and relative
/// degree, the extended-form sequences, the {G, J, R, Q} recursions, the
/// Hankel realization, and the stabilizing gain.
FefDesign design_pipeline(const MarkovSequence& Hu, const MarkovSequence& Hy,
                          const std::vector<FaultChannel>& faults,
                          const Eigen::MatrixXd& SigmaE,
                          const PipelineOptions& opts);

}  // namespace fefkit
