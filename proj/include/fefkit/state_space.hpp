#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "fefkit/markov.hpp"

namespace fefkit {

/// Continuous-time LTI quadruple (Ac, Bc, Cc, Dc).
struct ContinuousModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
};

/// Discrete-time process-form model with additive faults and Gaussian noise:
///   x(k+1) = A x + B u + E f + w1,   w1 ~ N(0, Q1)
///   y(k)   = C x + D u + G f + w2,   w2 ~ N(0, Q2)
struct StateSpaceModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    Eigen::MatrixXd E;   ///< n x nf fault-to-state map (0 columns: no faults)
    Eigen::MatrixXd G;   ///< ny x nf fault-to-output map
    Eigen::MatrixXd Q1;  ///< process noise covariance, PSD
    Eigen::MatrixXd Q2;  ///< measurement noise covariance, PD
    double dt = 1.0;

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index nu() const { return B.cols(); }
    Eigen::Index ny() const { return C.rows(); }
    Eigen::Index nf() const { return E.cols(); }

    void validate() const;
};

/// Steady-state Kalman predictor (innovation) form:
///   x(k+1) = Phi x + Btilde u + Etilde f + K y
///   y(k)   = C x + D u + G f + e,   e ~ N(0, SigmaE)
struct PredictorModel {
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd Btilde;
    Eigen::MatrixXd Etilde;
    Eigen::MatrixXd K;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;
    Eigen::MatrixXd G;
    Eigen::MatrixXd SigmaE;

    Eigen::Index n() const { return Phi.rows(); }
    Eigen::Index nu() const { return Btilde.cols(); }
    Eigen::Index ny() const { return C.rows(); }
    Eigen::Index nf() const { return Etilde.cols(); }
};

/// Sampled input/output data, one row per sample. Fault and state channels
/// are optional ground truth (zero rows when absent).
struct TimeSeries {
    Eigen::MatrixXd u;
    Eigen::MatrixXd y;
    Eigen::MatrixXd f;
    Eigen::MatrixXd x;

    Eigen::Index samples() const { return y.rows(); }
    bool has_fault() const { return f.rows() > 0; }
    bool has_state() const { return x.rows() > 0; }
};

/// Zero-order-hold discretization via the augmented matrix exponential
/// exp([[Ac, Bc],[0, 0]] dt). C and D carry over unchanged.
StateSpaceModel zoh_discretize(const ContinuousModel& m, double dt);

/// Series interconnection: the input feeds stages.front(), each output feeds
/// the next stage. State order is the sum of the component orders, actuator
/// states first.
ContinuousModel series_connect(std::span<const ContinuousModel> stages);
StateSpaceModel series_connect(std::span<const StateSpaceModel> stages);

/// Steady-state Kalman predictor of the fault-free subsystem: K from the
/// filtering Riccati equation, Phi = A - K C, Btilde = B - K D,
/// Etilde = E - K G, SigmaE = C P C^T + Q2. Requires a stable predictor.
PredictorModel to_predictor(const StateSpaceModel& m);

/// Input specification for simulation: an open-loop series, or static output
/// feedback u(k) = -F y(k) + eta(k) where y is the measured (noisy, faulty)
/// output so that faults propagate through the loop.
struct InputSpec {
    static InputSpec open_loop(Eigen::MatrixXd u_series);
    static InputSpec feedback(Eigen::MatrixXd F, Eigen::MatrixXd eta_series);

    bool is_feedback() const { return feedback_gain.size() > 0; }
    Eigen::Index horizon() const {
        return is_feedback() ? eta.rows() : u.rows();
    }

    Eigen::MatrixXd u;              ///< open-loop input series
    Eigen::MatrixXd feedback_gain;  ///< F (empty for open loop)
    Eigen::MatrixXd eta;            ///< reference series for feedback
};

struct SimulateOptions {
    std::optional<Eigen::VectorXd> x0;  ///< initial state, default zero
    bool record_state = true;
};

/// Simulates the process form with seeded Gaussian noise. Per step the
/// measurement noise is drawn before the process noise. Throws
/// DivergenceError naming the first non-finite sample.
TimeSeries simulate(const StateSpaceModel& m, const InputSpec& input,
                    const Eigen::MatrixXd& fault, std::uint64_t seed,
                    const SimulateOptions& opts = {});

/// Exact predictor Markov parameters up to length L:
/// H_0^u = D, H_i^u = C Phi^{i-1} Btilde; H_0^y = 0, H_i^y = C Phi^{i-1} K.
std::pair<MarkovSequence, MarkovSequence> predictor_mps(const PredictorModel& m,
                                                        Eigen::Index L);

/// Sets E and G of a process-form model from a fault specification:
/// actuator channel j uses B and D column j, sensor channel j uses a zero
/// state map and the j-th unit output column.
void set_fault_channels(StateSpaceModel& m, std::span<const FaultChannel> faults);

/// Fault terms (Etilde, G) of a predictor model for the given channels.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predictor_fault_terms(
    const PredictorModel& m, std::span<const FaultChannel> faults);

}  // namespace fefkit
