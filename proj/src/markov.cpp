#include "fefkit/markov.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

namespace fefkit {

MarkovSequence::MarkovSequence(std::vector<Eigen::MatrixXd> blocks)
    : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw DimensionError("MarkovSequence: no blocks");
    rows_ = blocks_.front().rows();
    cols_ = blocks_.front().cols();
    for (const auto& b : blocks_) {
        if (b.rows() != rows_ || b.cols() != cols_)
            throw DimensionError("MarkovSequence: non-uniform block dimensions");
    }
}

void MarkovSequence::push_back(Eigen::MatrixXd block) {
    if (block.rows() != rows_ || block.cols() != cols_)
        throw DimensionError("MarkovSequence::push_back: block dimension mismatch");
    blocks_.push_back(std::move(block));
}

double MarkovSequence::max_block_norm() const {
    double mx = 0.0;
    for (const auto& b : blocks_) mx = std::max(mx, b.norm());
    return mx;
}

Eigen::MatrixXd BlockToeplitz::dense() const {
    const Eigen::Index r = seq.rows();
    const Eigen::Index c = seq.cols();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(block_count * r, block_count * c);
    for (Eigen::Index i = 0; i < block_count; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            T.block(i * r, j * c, r, c) = seq.at_or_zero(i - j);
    return T;
}

Eigen::MatrixXd BlockHankel::dense() const {
    const Eigen::Index r = seq.rows();
    const Eigen::Index c = seq.cols();
    Eigen::MatrixXd H(block_rows * r, block_cols * c);
    for (Eigen::Index i = 0; i < block_rows; ++i)
        for (Eigen::Index j = 0; j < block_cols; ++j)
            H.block(i * r, j * c, r, c) = seq[i + j + 1];
    return H;
}

BlockToeplitz block_toeplitz(const MarkovSequence& seq, Eigen::Index s) {
    if (s < 1) throw DimensionError("block_toeplitz: need at least one block");
    return BlockToeplitz{seq, s};
}

BlockHankel block_hankel(const MarkovSequence& seq, Eigen::Index l, Eigen::Index m) {
    if (l < 1 || m < 1) throw DimensionError("block_hankel: need l, m >= 1");
    if (seq.size() < l + m)
        throw DimensionError("block_hankel: sequence of length " +
                             std::to_string(seq.size()) + " too short for l+m = " +
                             std::to_string(l + m));
    return BlockHankel{seq, l, m};
}

MarkovSequence fault_mps(const MarkovSequence& Hu, const MarkovSequence& Hy,
                         const std::vector<FaultChannel>& faults) {
    const Eigen::Index ny = Hu.rows();
    const Eigen::Index nu = Hu.cols();
    if (Hy.rows() != ny || Hy.cols() != ny)
        throw DimensionError("fault_mps: Hy must be square with Hu's row count");
    if (faults.empty()) throw DimensionError("fault_mps: empty fault spec");
    for (const auto& f : faults) {
        const Eigen::Index limit = (f.kind == FaultKind::Actuator) ? nu : ny;
        if (f.channel < 0 || f.channel >= limit)
            throw DimensionError("fault_mps: channel index out of range");
    }

    const Eigen::Index nf = static_cast<Eigen::Index>(faults.size());
    const Eigen::Index L = std::max(Hu.size(), Hy.size());
    MarkovSequence Hf(ny, nf);
    for (Eigen::Index i = 0; i < L; ++i) {
        Eigen::MatrixXd block(ny, nf);
        for (Eigen::Index c = 0; c < nf; ++c) {
            const auto& f = faults[c];
            if (f.kind == FaultKind::Actuator) {
                block.col(c) = Hu.at_or_zero(i).col(f.channel);
            } else if (i == 0) {
                block.col(c) = Eigen::VectorXd::Unit(ny, f.channel);
            } else {
                block.col(c) = -Hy.at_or_zero(i).col(f.channel);
            }
        }
        Hf.push_back(std::move(block));
    }
    return Hf;
}

Eigen::Index relative_degree(const MarkovSequence& Hf,
                             const RelativeDegreeOptions& opts) {
    const double mx = Hf.max_block_norm();
    const double threshold = std::max(opts.rel_tol * mx, opts.abs_tol);
    if (mx <= 0.0)
        throw ZeroFaultSubsystem("relative_degree: all fault MPs are zero");
    for (Eigen::Index i = 0; i < Hf.size(); ++i) {
        if (Hf[i].norm() <= threshold) continue;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Hf[i]);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) <= opts.rel_tol * sv(0))
            throw AssumptionViolated(
                "relative_degree: H_tau^f is column-rank deficient (sigma_min/sigma_max = " +
                std::to_string(sv(sv.size() - 1) / sv(0)) + ")");
        return i;
    }
    throw ZeroFaultSubsystem("relative_degree: no fault MP above threshold");
}

Eigen::MatrixXd select_pi(const Eigen::MatrixXd& Htauf) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        Htauf, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0))
        throw AssumptionViolated("select_pi: H_tau^f is rank deficient");
    Eigen::VectorXd inv = sv.cwiseInverse();
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

FaultSignature make_fault_signature(const MarkovSequence& Hu,
                                    const MarkovSequence& Hy,
                                    const std::vector<FaultChannel>& faults,
                                    const RelativeDegreeOptions& opts) {
    MarkovSequence Hf = fault_mps(Hu, Hy, faults);
    const Eigen::Index tau = relative_degree(Hf, opts);
    Eigen::MatrixXd Pi = select_pi(Hf[tau]);
    return FaultSignature{std::move(Hf), tau, std::move(Pi)};
}

ScrSequences build_scrH(const MarkovSequence& Hu, const MarkovSequence& Hy,
                        const MarkovSequence& Hf, Eigen::Index tau,
                        Eigen::Index L) {
    const Eigen::Index ny = Hu.rows();
    const Eigen::Index nu = Hu.cols();
    const Eigen::Index nz = (tau + 1) * (nu + ny);

    MarkovSequence scrHz(ny, nz);
    // scrHz_0 = [-H_tau^u .. -H_0^u | -H_tau^y .. -H_1^y, I]
    Eigen::MatrixXd z0(ny, nz);
    for (Eigen::Index i = 0; i <= tau; ++i)
        z0.block(0, i * nu, ny, nu) = -Hu.at_or_zero(tau - i);
    const Eigen::Index yoff = (tau + 1) * nu;
    for (Eigen::Index i = 0; i < tau; ++i)
        z0.block(0, yoff + i * ny, ny, ny) = -Hy.at_or_zero(tau - i);
    z0.block(0, yoff + tau * ny, ny, ny) = Eigen::MatrixXd::Identity(ny, ny);
    scrHz.push_back(std::move(z0));
    // scrHz_i = -[H_{tau+i}^u, 0 | H_{tau+i}^y, 0]: only the oldest window
    // sample couples to the state for i >= 1. Past the identified order the
    // sequences read as zero.
    for (Eigen::Index i = 1; i < L; ++i) {
        Eigen::MatrixXd zi = Eigen::MatrixXd::Zero(ny, nz);
        zi.block(0, 0, ny, nu) = -Hu.at_or_zero(tau + i);
        zi.block(0, yoff, ny, ny) = -Hy.at_or_zero(tau + i);
        scrHz.push_back(std::move(zi));
    }

    MarkovSequence scrHf(ny, Hf.cols());
    for (Eigen::Index i = 0; i < L; ++i) scrHf.push_back(Hf.at_or_zero(tau + i));
    return ScrSequences{std::move(scrHz), std::move(scrHf)};
}

MarkovSequence invert_toeplitz_G(const MarkovSequence& scrHf,
                                 const Eigen::MatrixXd& Pi, Eigen::Index L) {
    const Eigen::Index nf = scrHf.cols();
    const Eigen::Index ny = scrHf.rows();
    if (Pi.rows() != nf || Pi.cols() != ny)
        throw DimensionError("invert_toeplitz_G: Pi must be nf x ny");
    MarkovSequence G(nf, ny);
    G.push_back(Pi);
    for (Eigen::Index i = 1; i < L; ++i) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(nf, nf);
        for (Eigen::Index j = 1; j <= i; ++j)
            acc.noalias() += G[i - j] * scrHf.at_or_zero(j);
        G.push_back(-acc * Pi);
    }
    return G;
}

MarkovSequence convolve_J(const MarkovSequence& scrHf, const MarkovSequence& G,
                          Eigen::Index L) {
    const Eigen::Index ny = scrHf.rows();
    MarkovSequence J(ny, ny);
    for (Eigen::Index i = 0; i < L; ++i) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(ny, ny);
        for (Eigen::Index j = 0; j <= i; ++j)
            acc.noalias() += scrHf.at_or_zero(i - j) * G.at_or_zero(j);
        if (i == 0)
            J.push_back(Eigen::MatrixXd::Identity(ny, ny) - acc);
        else
            J.push_back(-acc);
    }
    return J;
}

RQSequences convolve_RQ(const MarkovSequence& G, const MarkovSequence& J,
                        const MarkovSequence& scrHz, Eigen::Index L) {
    const Eigen::Index nf = G.rows();
    const Eigen::Index ny = J.rows();
    const Eigen::Index nz = scrHz.cols();
    MarkovSequence R(nf, nz);
    MarkovSequence Q(ny, nz);
    for (Eigen::Index i = 0; i < L; ++i) {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(nf, nz);
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(ny, nz);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const Eigen::MatrixXd& z = scrHz.at_or_zero(j);
            r.noalias() += G.at_or_zero(i - j) * z;
            q.noalias() += J.at_or_zero(i - j) * z;
        }
        R.push_back(std::move(r));
        Q.push_back(std::move(q));
    }
    return RQSequences{std::move(R), std::move(Q)};
}

ClosedLoopMps closed_loop_mps(const Eigen::MatrixXd& Phi1,
                              const Eigen::MatrixXd& B1,
                              const Eigen::MatrixXd& C1,
                              const Eigen::MatrixXd& D1,
                              const Eigen::MatrixXd& C2,
                              const Eigen::MatrixXd& D2,
                              const Eigen::MatrixXd& Kr, Eigen::Index L) {
    const Eigen::Index nf = C1.rows();
    const Eigen::Index ny = C2.rows();
    const Eigen::MatrixXd Phi_cl = Phi1 - Kr * C2;
    const Eigen::MatrixXd Bcl = B1 + Kr * D2;

    MarkovSequence K(nf, ny);
    MarkovSequence M(nf, ny);
    K.push_back(D1);
    M.push_back(Eigen::MatrixXd::Zero(nf, ny));
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(Phi1.rows(), Phi1.cols());
    for (Eigen::Index i = 1; i < L; ++i) {
        K.push_back(C1 * power * Bcl);
        M.push_back(C1 * power * Kr);
        power = Phi_cl * power;
    }
    return ClosedLoopMps{std::move(K), std::move(M)};
}

Eigen::VectorXd batch_estimate(const MarkovSequence& R, const MarkovSequence& Q,
                               const MarkovSequence& M,
                               const Eigen::MatrixXd& Phi_cl,
                               const Eigen::MatrixXd& C1,
                               const Eigen::VectorXd& x1_k0,
                               const Eigen::VectorXd& zbar) {
    const Eigen::Index L = R.size();
    if (Q.size() < L || M.size() < L)
        throw DimensionError("batch_estimate: sequences shorter than window");
    if (zbar.size() != L * R.cols())
        throw DimensionError("batch_estimate: window has " +
                             std::to_string(zbar.size()) + " entries, expected " +
                             std::to_string(L * R.cols()));

    const Eigen::MatrixXd TR = block_toeplitz(R, L).dense();
    const Eigen::MatrixXd TQ = block_toeplitz(Q, L).dense();
    const Eigen::MatrixXd TM = block_toeplitz(M, L).dense();
    Eigen::VectorXd fhat = TR * zbar + TM * (TQ * zbar);
    fhat += extended_observability(Phi_cl, C1, L) * x1_k0;
    return fhat;
}

Eigen::MatrixXd extended_observability(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& C,
                                       Eigen::Index s) {
    const Eigen::Index n = A.rows();
    const Eigen::Index p = C.rows();
    Eigen::MatrixXd O(s * p, n);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < s; ++i) {
        O.middleRows(i * p, p) = C * power;
        power = power * A;
    }
    return O;
}

}  // namespace fefkit
