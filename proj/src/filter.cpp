#include "fefkit/filter.hpp"

#include <cmath>
#include <string>

namespace fefkit {

FefFilter::FefFilter(FefRealization realization, Eigen::MatrixXd Kr,
                     Eigen::Index window_length)
    : real_(std::move(realization)),
      Kr_(std::move(Kr)),
      window_length_(window_length) {
    const Eigen::Index n = real_.order();
    if (Kr_.rows() != n || Kr_.cols() != real_.ny)
        throw DimensionError("FefFilter: gain must be order x ny");
    if (real_.BfKf.cols() != (real_.tau + 1) * (real_.nu + real_.ny))
        throw DimensionError("FefFilter: window width mismatch in realization");
    Phi_cl_ = real_.Phi1 - Kr_ * real_.C2;
    rho_cl_ = spectral_radius(Phi_cl_);
    x_ = Eigen::VectorXd::Zero(n);
}

FefFilter assemble(const FefRealization& realization, const Eigen::MatrixXd& Kr,
                   Eigen::Index window_length) {
    return FefFilter(realization, Kr, window_length);
}

void FefFilter::reset() {
    x_.setZero();
    ubuf_.clear();
    ybuf_.clear();
    count_ = 0;
    diverged_ = false;
    diverged_at_ = -1;
}

std::optional<EstimateRecord> FefFilter::step(const Eigen::VectorXd& u,
                                              const Eigen::VectorXd& y) {
    if (diverged_)
        throw DivergenceError("FefFilter: state diverged at sample " +
                                  std::to_string(diverged_at_),
                              diverged_at_);
    if (u.size() != real_.nu || y.size() != real_.ny)
        throw DimensionError("FefFilter::step: sample dimensions");

    const Eigen::Index tau = real_.tau;
    ubuf_.push_back(u);
    ybuf_.push_back(y);
    if (static_cast<Eigen::Index>(ubuf_.size()) > tau + 1) {
        ubuf_.pop_front();
        ybuf_.pop_front();
    }
    const Eigen::Index j = count_++;
    if (j < tau) return std::nullopt;  // warmup: window not yet filled

    const Eigen::Index nu = real_.nu;
    const Eigen::Index ny = real_.ny;
    Eigen::VectorXd z((tau + 1) * (nu + ny));
    for (Eigen::Index i = 0; i <= tau; ++i) z.segment(i * nu, nu) = ubuf_[i];
    const Eigen::Index yoff = (tau + 1) * nu;
    for (Eigen::Index i = 0; i <= tau; ++i)
        z.segment(yoff + i * ny, ny) = ybuf_[i];

    EstimateRecord rec;
    rec.k = j - tau;
    rec.rtilde = -real_.C2 * x_ + real_.Df2Gf2 * z;
    rec.fhat = real_.C1 * x_ + real_.Df1Gf1 * z;
    rec.transient = window_length_ > 0 && rec.k < window_length_;

    x_ = real_.Phi1 * x_ + real_.BfKf * z + Kr_ * rec.rtilde;
    if (!x_.allFinite() || x_.cwiseAbs().maxCoeff() > kDivergenceThreshold) {
        diverged_ = true;
        diverged_at_ = j;
    }
    return rec;
}

RunResult run_filter(FefFilter& filter, const TimeSeries& data,
                     const RunOptions& opts) {
    RunResult res;
    const Eigen::Index N = data.samples();
    res.records.reserve(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        auto rec = filter.step(data.u.row(k).transpose(), data.y.row(k).transpose());
        if (rec) res.records.push_back(std::move(*rec));
        if (filter.diverged()) {
            res.diverged = true;
            res.diverged_at = filter.diverged_at();
            break;
        }
    }
    if (!data.has_fault() || res.records.empty()) return res;

    Eigen::Index onset = 0;
    for (Eigen::Index k = 0; k < data.f.rows(); ++k) {
        if (data.f.row(k).cwiseAbs().maxCoeff() > 0.0) {
            onset = k;
            break;
        }
    }
    const Eigen::Index last = res.records.back().k + 1;
    Eigen::Index begin = opts.rmse_begin >= 0
                             ? opts.rmse_begin
                             : onset + 2 * filter.realization().order();
    Eigen::Index end = opts.rmse_end >= 0 ? std::min(opts.rmse_end, last) : last;
    res.rmse_begin = begin;
    res.rmse_end = end;

    const Eigen::Index nf = filter.realization().nf();
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(nf);
    Eigen::Index count = 0;
    for (const auto& rec : res.records) {
        if (rec.k < begin || rec.k >= end) continue;
        const Eigen::VectorXd err = rec.fhat - data.f.row(rec.k).transpose();
        sq += err.cwiseAbs2();
        ++count;
    }
    if (count > 0) res.rmse = (sq / static_cast<double>(count)).cwiseSqrt();
    return res;
}

FefRealization sifef_from_predictor(const PredictorModel& model,
                                    std::span<const FaultChannel> faults,
                                    const RelativeDegreeOptions& opts) {
    const Eigen::Index n = model.n();
    const Eigen::Index nu = model.nu();
    const Eigen::Index ny = model.ny();
    auto [Etilde, G] = predictor_fault_terms(model, faults);
    const Eigen::Index nf = Etilde.cols();

    // Fault MPs; by Cayley-Hamilton a zero prefix of length n+1 means the
    // whole sequence vanishes.
    MarkovSequence Hf(ny, nf);
    Hf.push_back(G);
    {
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
        for (Eigen::Index i = 1; i <= n + 1; ++i) {
            Hf.push_back(model.C * power * Etilde);
            power = model.Phi * power;
        }
    }
    const Eigen::Index tau = relative_degree(Hf, opts);
    const Eigen::MatrixXd Pi = select_pi(Hf[tau]);

    Eigen::MatrixXd PhiTau = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < tau; ++i) PhiTau = model.Phi * PhiTau;
    const Eigen::MatrixXd CPhiTau = model.C * PhiTau;
    const Eigen::MatrixXd D2 =
        Eigen::MatrixXd::Identity(ny, ny) - Hf[tau] * Pi;

    auto [Hu, Hy] = predictor_mps(model, tau + 1);
    Eigen::MatrixXd Bu(ny, (tau + 1) * nu);   // [H_tau^u ... H_0^u]
    Eigen::MatrixXd By(ny, (tau + 1) * ny);   // [-H_tau^y ... -H_1^y, I]
    for (Eigen::Index i = 0; i <= tau; ++i)
        Bu.middleCols(i * nu, nu) = Hu.at_or_zero(tau - i);
    for (Eigen::Index i = 0; i < tau; ++i)
        By.middleCols(i * ny, ny) = -Hy.at_or_zero(tau - i);
    By.middleCols(tau * ny, ny) = Eigen::MatrixXd::Identity(ny, ny);

    const Eigen::MatrixXd B1 = Etilde * Pi;
    Eigen::MatrixXd Bf = Eigen::MatrixXd::Zero(n, (tau + 1) * nu);
    Bf.leftCols(nu) = model.Btilde;
    Bf -= B1 * Bu;
    Eigen::MatrixXd Kf = Eigen::MatrixXd::Zero(n, (tau + 1) * ny);
    Kf.leftCols(ny) = model.K;
    Kf += B1 * By;

    FefRealization real;
    real.tau = tau;
    real.Pi = Pi;
    real.nu = nu;
    real.ny = ny;
    real.Phi1 = model.Phi - B1 * CPhiTau;
    real.B1 = B1;
    real.C1 = -Pi * CPhiTau;
    real.C2 = D2 * CPhiTau;
    real.D2 = D2;
    real.BfKf.resize(n, (tau + 1) * (nu + ny));
    real.BfKf << Bf, Kf;
    real.Df1Gf1.resize(nf, (tau + 1) * (nu + ny));
    real.Df1Gf1 << -Pi * Bu, Pi * By;
    real.Df2Gf2.resize(ny, (tau + 1) * (nu + ny));
    real.Df2Gf2 << -D2 * Bu, D2 * By;
    return real;
}

FefDesign design_model_based(const PredictorModel& model,
                             std::span<const FaultChannel> faults,
                             const Eigen::MatrixXd& SigmaE,
                             const RelativeDegreeOptions& reldeg,
                             const DareOptions& dare) {
    FefDesign d;
    d.realization = sifef_from_predictor(model, faults, reldeg);
    d.SigmaE = SigmaE;

    // H_tau^f of the model, for the alpha selection.
    auto [Etilde, G] = predictor_fault_terms(model, faults);
    Eigen::MatrixXd Htauf;
    if (d.realization.tau == 0) {
        Htauf = G;
    } else {
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(model.n(), model.n());
        for (Eigen::Index i = 1; i < d.realization.tau; ++i)
            power = model.Phi * power;
        Htauf = model.C * power * Etilde;
    }
    d.existence = check_existence(d.realization, SigmaE, select_alpha(Htauf));
    d.gain = design_gain(d.realization, SigmaE, Htauf, dare);
    return d;
}

}  // namespace fefkit
