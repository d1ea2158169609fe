#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fefkit/errors.hpp"

namespace fefkit {

/// Ordered sequence of equally sized impulse-response blocks H_0..H_{L-1}.
///
/// Indexing past the stored length reads as a zero block: identified
/// sequences are truncated at the model order and extend with zeros.
class MarkovSequence {
  public:
    MarkovSequence() = default;  ///< empty sequence of 0 x 0 blocks

    MarkovSequence(Eigen::Index rows, Eigen::Index cols)
        : rows_(rows), cols_(cols) {}

    explicit MarkovSequence(std::vector<Eigen::MatrixXd> blocks);

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(blocks_.size()); }

    const Eigen::MatrixXd& operator[](Eigen::Index i) const { return blocks_.at(i); }

    /// Block i, or a zero block when i is past the stored length.
    Eigen::MatrixXd at_or_zero(Eigen::Index i) const {
        if (i >= 0 && i < size()) return blocks_[i];
        return Eigen::MatrixXd::Zero(rows_, cols_);
    }

    void push_back(Eigen::MatrixXd block);

    double max_block_norm() const;

  private:
    std::vector<Eigen::MatrixXd> blocks_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
};

/// Lower block-triangular Toeplitz matrix generated by a Markov sequence.
struct BlockToeplitz {
    MarkovSequence seq;
    Eigen::Index block_count;

    Eigen::MatrixXd dense() const;
};

/// Block-Hankel matrix with entry (i,j) = W_{i+j+1}; W_0 is excluded.
struct BlockHankel {
    MarkovSequence seq;
    Eigen::Index block_rows;
    Eigen::Index block_cols;

    Eigen::MatrixXd dense() const;
};

BlockToeplitz block_toeplitz(const MarkovSequence& seq, Eigen::Index s);
BlockHankel block_hankel(const MarkovSequence& seq, Eigen::Index l, Eigen::Index m);

enum class FaultKind { Actuator, Sensor };

/// One faulty channel: actuator index into u or sensor index into y (0-based).
struct FaultChannel {
    FaultKind kind;
    Eigen::Index channel;
};

/// Fault Markov parameters assembled from the input/output sequences.
///
/// Actuator fault on channel j takes column j of each H_i^u. Sensor fault on
/// channel j has the j-th unit column at lag 0 and minus column j of H_i^y
/// afterwards. Multiple faults concatenate column-wise in the given order.
MarkovSequence fault_mps(const MarkovSequence& Hu, const MarkovSequence& Hy,
                         const std::vector<FaultChannel>& faults);

struct RelativeDegreeOptions {
    double rel_tol = 1e-6;  ///< threshold relative to the largest block norm
    double abs_tol = 0.0;   ///< extra absolute floor for identified sequences
};

/// Index of the first nonzero fault Markov parameter.
///
/// Also checks that the leading block has full column rank (smallest singular
/// value above rel_tol times the largest), which uniqueness of the fault
/// reconstruction requires.
Eigen::Index relative_degree(const MarkovSequence& Hf,
                             const RelativeDegreeOptions& opts = {});

/// Moore-Penrose left inverse of the leading fault Markov parameter.
Eigen::MatrixXd select_pi(const Eigen::MatrixXd& Htauf);

/// Fault signature: fault MPs, relative degree, and the chosen left inverse.
struct FaultSignature {
    MarkovSequence Hf;
    Eigen::Index tau;
    Eigen::MatrixXd Pi;
};

FaultSignature make_fault_signature(const MarkovSequence& Hu,
                                    const MarkovSequence& Hy,
                                    const std::vector<FaultChannel>& faults,
                                    const RelativeDegreeOptions& opts = {});

/// Markov parameters of the residual extended forms.
///
/// scrHz blocks are n_y x (tau+1)(n_u+n_y) and act on the stacked window
/// z = [u(k..k+tau); y(k..k+tau)], oldest sample first. scrHf blocks are the
/// fault MPs shifted by the relative degree.
struct ScrSequences {
    MarkovSequence scrHz;
    MarkovSequence scrHf;
};

ScrSequences build_scrH(const MarkovSequence& Hu, const MarkovSequence& Hy,
                        const MarkovSequence& Hf, Eigen::Index tau,
                        Eigen::Index L);

/// Toeplitz left inverse of the fault sequence: G_0 = Pi and
/// G_i = -(sum_{j=1..i} G_{i-j} scrHf_j) G_0, so T_L({G}) T_L({scrHf}) = I.
MarkovSequence invert_toeplitz_G(const MarkovSequence& scrHf,
                                 const Eigen::MatrixXd& Pi, Eigen::Index L);

/// Residual-reconstruction sequence: J = I - T({scrHf}) T({G}) block-wise.
MarkovSequence convolve_J(const MarkovSequence& scrHf, const MarkovSequence& G,
                          Eigen::Index L);

struct RQSequences {
    MarkovSequence R;  ///< R_i = sum G_{i-j} scrHz_j
    MarkovSequence Q;  ///< Q_i = sum J_{i-j} scrHz_j
};

RQSequences convolve_RQ(const MarkovSequence& G, const MarkovSequence& J,
                        const MarkovSequence& scrHz, Eigen::Index L);

/// Closed-loop filter MPs from realization matrices:
/// K_0 = D1, K_i = C1 (Phi1 - Kr C2)^{i-1} (B1 + Kr D2),
/// M_0 = 0,  M_i = C1 (Phi1 - Kr C2)^{i-1} Kr.
struct ClosedLoopMps {
    MarkovSequence K;
    MarkovSequence M;
};

ClosedLoopMps closed_loop_mps(const Eigen::MatrixXd& Phi1,
                              const Eigen::MatrixXd& B1,
                              const Eigen::MatrixXd& C1,
                              const Eigen::MatrixXd& D1,
                              const Eigen::MatrixXd& C2,
                              const Eigen::MatrixXd& D2,
                              const Eigen::MatrixXd& Kr, Eigen::Index L);

/// Batch fault estimator over one data window:
/// fhat_stack = O_L(Phi_cl, C1) x1_k0 + (T_L(R) + T_L(M) T_L(Q)) zbar.
///
/// zbar stacks the (tau+1)-sample windows of [u; y] over L consecutive steps.
/// Returns all L stacked n_f-estimates; serves as the oracle for the
/// recursive filter.
Eigen::VectorXd batch_estimate(const MarkovSequence& R, const MarkovSequence& Q,
                               const MarkovSequence& M,
                               const Eigen::MatrixXd& Phi_cl,
                               const Eigen::MatrixXd& C1,
                               const Eigen::VectorXd& x1_k0,
                               const Eigen::VectorXd& zbar);

/// Extended observability matrix O_s(A, C) = [C; CA; ...; CA^{s-1}].
Eigen::MatrixXd extended_observability(const Eigen::MatrixXd& A,
                                       const Eigen::MatrixXd& C,
                                       Eigen::Index s);

}  // namespace fefkit
