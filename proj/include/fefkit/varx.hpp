#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fefkit/markov.hpp"
#include "fefkit/state_space.hpp"

namespace fefkit {

/// High-order VARX model of the predictor form:
/// y(k) = sum_{i=1..p} My_i y(k-i) + sum_{i=0..p} Mu_i u(k-i) + v(k).
/// The coefficients estimate the predictor Markov parameters, and the
/// residual covariance estimates the innovation covariance.
struct VarxModel {
    int p = 0;
    std::vector<Eigen::MatrixXd> My;  ///< M_1^y .. M_p^y, each ny x ny
    std::vector<Eigen::MatrixXd> Mu;  ///< M_0^u .. M_p^u, each ny x nu
    Eigen::MatrixXd SigmaE;           ///< residual covariance

    Eigen::Index ny() const { return SigmaE.rows(); }
    Eigen::Index nu() const { return Mu.empty() ? 0 : Mu.front().cols(); }
};

struct VarxFitOptions {
    double ridge = 0.0;
};

/// Least-squares VARX fit over k = p..N-1 (the first p samples only provide
/// history). Solved by column-pivoted QR; a rank-deficient regressor with
/// zero ridge raises IllConditionedRegression with the condition number.
VarxModel fit_varx(const TimeSeries& data, int p,
                   const VarxFitOptions& opts = {});

struct ExtractedMps {
    MarkovSequence Hu;
    MarkovSequence Hy;
    bool truncated;  ///< L < p+1 dropped identified coefficients
};

/// Markov parameter estimates from the VARX coefficients, zero-extended past
/// the model order. Hy[0] is pinned to zero.
ExtractedMps extract_mps(const VarxModel& v, Eigen::Index L);

struct OrderCandidate {
    int p;
    double aic;
    double sigma_trace;
};

struct OrderSuggestionVarx {
    int order;
    std::vector<OrderCandidate> candidates;
};

/// Fits every candidate order and reports AIC on the Gaussian likelihood plus
/// the residual covariance trace. Returns the smallest order whose AIC is
/// within 1% of the best. The criterion is reported, never silently applied.
OrderSuggestionVarx suggest_varx_order(const TimeSeries& data,
                                       const std::vector<int>& candidates);

}  // namespace fefkit
