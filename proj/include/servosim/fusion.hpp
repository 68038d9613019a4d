#pragma once

#include <deque>
#include <limits>

#include "servosim/geometry.hpp"

namespace servosim {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

struct UkfParams {
    double alpha = 1e-1;
    double beta = 2.0;
    double kappa = 0.0;
};

// Gaussian belief over the 6-vector image of the bottleneck pose.
struct BeliefState {
    PoseVector6 mean;
    Matrix6d covariance = Matrix6d::Identity();
};

// Throws NonSPDCovariance unless m is symmetric positive-definite.
void requireSPD(const Matrix6d& m, const char* what);

BeliefState ukfInit(const PoseVector6& prior, const Matrix6d& priorCov);

// One predict/update cycle. The process model is identity (the bottleneck is
// static between displacement events) inflated by processCov; the measurement
// observes the full state. Axis-angle residuals take the shorter arc; any
// sigma point pushed to theta >= pi raises AngleWrap.
BeliefState ukfStep(const BeliefState& belief, const PoseVector6& measurement,
                    const Matrix6d& measCov, const Matrix6d& processCov,
                    const UkfParams& params = UkfParams{});

// Ring buffer of recent estimates with per-component unbiased sample variance.
// Fewer than two entries report +infinity (not yet stable).
struct VarianceWindow {
    std::size_t capacity = 10;
    std::deque<PoseVector6> buffer;
    Vector6d perComponentVariance = Vector6d::Constant(std::numeric_limits<double>::infinity());
};

VarianceWindow pushVariance(VarianceWindow win, const PoseVector6& estimate);

} // namespace servosim
