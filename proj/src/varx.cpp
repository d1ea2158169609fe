#include "fefkit/varx.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <string>

namespace fefkit {

VarxModel fit_varx(const TimeSeries& data, int p, const VarxFitOptions& opts) {
    if (p < 1) throw DimensionError("fit_varx: order must be at least 1");
    if (opts.ridge < 0.0) throw DimensionError("fit_varx: ridge must be nonnegative");
    const Eigen::Index N = data.samples();
    const Eigen::Index ny = data.y.cols();
    const Eigen::Index nu = data.u.cols();
    const Eigen::Index d = p * ny + (p + 1) * nu;
    if (N - p <= d)
        throw DimensionError("fit_varx: " + std::to_string(N) +
                             " samples are too few for " + std::to_string(d) +
                             " regressor columns at order " + std::to_string(p));

    const Eigen::Index rows = N - p;
    Eigen::MatrixXd X(rows + (opts.ridge > 0.0 ? d : 0), d);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(X.rows(), ny);
    Y.topRows(rows) = data.y.bottomRows(rows);
    for (Eigen::Index t = p; t < N; ++t) {
        const Eigen::Index r = t - p;
        for (int i = 1; i <= p; ++i)
            X.block(r, (i - 1) * ny, 1, ny) = data.y.row(t - i);
        const Eigen::Index off = p * ny;
        for (int i = 0; i <= p; ++i)
            X.block(r, off + i * nu, 1, nu) = data.u.row(t - i);
    }
    if (opts.ridge > 0.0)
        X.bottomRows(d) = std::sqrt(opts.ridge) * Eigen::MatrixXd::Identity(d, d);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (opts.ridge == 0.0) {
        const Eigen::VectorXd rdiag = qr.matrixR().diagonal().cwiseAbs().head(d);
        const double cond = rdiag.maxCoeff() / std::max(rdiag.minCoeff(), 1e-300);
        if (qr.rank() < d)
            throw IllConditionedRegression(
                "fit_varx: regressor is rank deficient (condition ~" +
                    std::to_string(cond) + "); excite the system or add ridge",
                cond);
    }
    const Eigen::MatrixXd theta = qr.solve(Y);  // d x ny

    VarxModel v;
    v.p = p;
    for (int i = 1; i <= p; ++i)
        v.My.push_back(theta.middleRows((i - 1) * ny, ny).transpose());
    const Eigen::Index off = p * ny;
    for (int i = 0; i <= p; ++i)
        v.Mu.push_back(theta.middleRows(off + i * nu, nu).transpose());

    const Eigen::MatrixXd resid = Y.topRows(rows) - X.topRows(rows) * theta;
    v.SigmaE = resid.transpose() * resid / static_cast<double>(rows);
    return v;
}

ExtractedMps extract_mps(const VarxModel& v, Eigen::Index L) {
    if (L < 1) throw DimensionError("extract_mps: L must be positive");
    const Eigen::Index ny = v.ny();
    const Eigen::Index nu = v.nu();
    MarkovSequence Hu(ny, nu);
    MarkovSequence Hy(ny, ny);
    for (Eigen::Index i = 0; i < L; ++i) {
        Hu.push_back(i <= v.p ? v.Mu[i] : Eigen::MatrixXd::Zero(ny, nu));
        // H_0^y = 0 is known exactly; identified coefficients start at lag 1.
        if (i == 0 || i > v.p)
            Hy.push_back(Eigen::MatrixXd::Zero(ny, ny));
        else
            Hy.push_back(v.My[i - 1]);
    }
    return ExtractedMps{std::move(Hu), std::move(Hy), L < v.p + 1};
}

OrderSuggestionVarx suggest_varx_order(const TimeSeries& data,
                                       const std::vector<int>& candidates) {
    if (candidates.empty())
        throw DimensionError("suggest_varx_order: no candidate orders");

    OrderSuggestionVarx s;
    double best = std::numeric_limits<double>::infinity();
    for (int p : candidates) {
        // A candidate whose regression is singular (overparameterized on
        // noise-free data) is inadmissible, not fatal.
        VarxModel v;
        try {
            v = fit_varx(data, p);
        } catch (const IllConditionedRegression&) {
            s.candidates.push_back({p, std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::quiet_NaN()});
            continue;
        }
        const Eigen::Index rows = data.samples() - p;
        const Eigen::Index ny = v.ny();
        const Eigen::Index params = ny * (p * ny + (p + 1) * v.nu());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(v.SigmaE +
                                          1e-300 * Eigen::MatrixXd::Identity(ny, ny));
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < ny; ++i)
            logdet += std::log(std::max(ldlt.vectorD()(i), 1e-300));
        const double aic = static_cast<double>(rows) * logdet +
                           2.0 * static_cast<double>(params);
        s.candidates.push_back({p, aic, v.SigmaE.trace()});
        best = std::min(best, aic);
    }
    if (!std::isfinite(best))
        throw IllConditionedRegression(
            "suggest_varx_order: every candidate regression is singular", 0.0);

    const double cutoff = best + 0.01 * std::abs(best);
    int chosen = candidates.front();
    bool found = false;
    for (const auto& c : s.candidates) {
        if (c.aic <= cutoff && (!found || c.p < chosen)) {
            chosen = c.p;
            found = true;
        }
    }
    s.order = chosen;
    return s;
}

}  // namespace fefkit
