#include "servosim/fusion.hpp"

#include <array>
#include <cmath>
#include <string>

namespace servosim {

namespace {

// Equivalent axis-angle representative of a nearest to b (the rotation
// vector family v, v(1 - 2pi/|v|), ... all encode the same rotation).
Eigen::Vector3d shortestArcTo(const Eigen::Vector3d& v, const Eigen::Vector3d& target) {
    const double theta = v.norm();
    if (theta < 1e-12) return v;
    const Eigen::Vector3d alt = v * (1.0 - 2.0 * M_PI / theta);
    return (alt - target).squaredNorm() < (v - target).squaredNorm() ? alt : v;
}

Matrix6d symmetrized(const Matrix6d& m) { return 0.5 * (m + m.transpose()); }

} // namespace

void requireSPD(const Matrix6d& m, const char* what) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw NonSPDCovariance(std::string(what) + ": not symmetric");
    Eigen::LLT<Matrix6d> llt(symmetrized(m));
    if (llt.info() != Eigen::Success)
        throw NonSPDCovariance(std::string(what) + ": not positive-definite");
}

BeliefState ukfInit(const PoseVector6& prior, const Matrix6d& priorCov) {
    requireSPD(priorCov, "prior covariance");
    return BeliefState{prior, symmetrized(priorCov)};
}

BeliefState ukfStep(const BeliefState& belief, const PoseVector6& measurement,
                    const Matrix6d& measCov, const Matrix6d& processCov,
                    const UkfParams& params) {
    requireSPD(measCov, "measurement covariance");
    if (measurement.axisAngle.norm() >= M_PI - kAnglePiMargin)
        throw AngleWrap("measurement rotation at or beyond pi");

    constexpr int n = 6;
    const double lambda = params.alpha * params.alpha * (n + params.kappa) - n;

    // Predict: identity process with additive inflation.
    const Vector6d xPred = belief.mean.stacked();
    Matrix6d pPred = symmetrized(belief.covariance + processCov);

    Eigen::LLT<Matrix6d> llt((n + lambda) * pPred);
    if (llt.info() != Eigen::Success) {
        pPred += Matrix6d::Identity() * 1e-12;
        llt.compute((n + lambda) * pPred);
        if (llt.info() != Eigen::Success)
            throw NonSPDCovariance("predicted covariance lost positive-definiteness");
    }
    const Matrix6d sqrtP = llt.matrixL();

    // 2n+1 sigma points; the measurement model observes the state directly.
    std::array<Vector6d, 2 * n + 1> sigma;
    sigma[0] = xPred;
    for (int i = 0; i < n; ++i) {
        sigma[1 + i] = xPred + sqrtP.col(i);
        sigma[1 + n + i] = xPred - sqrtP.col(i);
    }
    for (const auto& s : sigma) {
        if (s.head<3>().norm() >= M_PI - kAnglePiMargin)
            throw AngleWrap("sigma point rotation at or beyond pi; reduce spread");
    }

    const double wm0 = lambda / (n + lambda);
    const double wc0 = wm0 + (1.0 - params.alpha * params.alpha + params.beta);
    const double wi = 0.5 / (n + lambda);

    // Innovations against the measurement, rotation part on the shorter arc.
    auto innovation = [&](const Vector6d& s) {
        Vector6d z = s;
        z.head<3>() = shortestArcTo(s.head<3>(), measurement.axisAngle);
        Vector6d d;
        d.head<3>() = measurement.axisAngle - z.head<3>();
        d.tail<3>() = measurement.translation - z.tail<3>();
        return d;
    };

    Vector6d innovMean = wm0 * innovation(sigma[0]);
    for (int i = 1; i < 2 * n + 1; ++i) innovMean += wi * innovation(sigma[i]);

    Matrix6d innovCov = measCov;
    Matrix6d crossCov = Matrix6d::Zero();
    {
        const Vector6d d0 = innovation(sigma[0]) - innovMean;
        innovCov += wc0 * d0 * d0.transpose();
        crossCov += wc0 * (sigma[0] - xPred) * (-d0).transpose();
        for (int i = 1; i < 2 * n + 1; ++i) {
            const Vector6d di = innovation(sigma[i]) - innovMean;
            innovCov += wi * di * di.transpose();
            crossCov += wi * (sigma[i] - xPred) * (-di).transpose();
        }
    }

    const Matrix6d gain = crossCov * innovCov.inverse();
    Vector6d xPost = xPred + gain * innovMean;
    Matrix6d pPost = symmetrized(pPred - gain * innovCov * gain.transpose());

    Eigen::LLT<Matrix6d> check(pPost);
    if (check.info() != Eigen::Success) pPost += Matrix6d::Identity() * 1e-12;
    requireSPD(pPost, "posterior covariance");

    if (xPost.head<3>().norm() >= M_PI - kAnglePiMargin)
        throw AngleWrap("posterior rotation at or beyond pi");

    BeliefState out;
    out.mean = PoseVector6::fromStacked(xPost);
    out.covariance = pPost;
    return out;
}

VarianceWindow pushVariance(VarianceWindow win, const PoseVector6& estimate) {
    win.buffer.push_back(estimate);
    while (win.buffer.size() > win.capacity) win.buffer.pop_front();

    if (win.buffer.size() < 2) {
        win.perComponentVariance =
            Vector6d::Constant(std::numeric_limits<double>::infinity());
        return win;
    }
    Vector6d mean = Vector6d::Zero();
    for (const auto& e : win.buffer) mean += e.stacked();
    mean /= static_cast<double>(win.buffer.size());

    Vector6d var = Vector6d::Zero();
    for (const auto& e : win.buffer) {
        const Vector6d d = e.stacked() - mean;
        var += d.cwiseProduct(d);
    }
    win.perComponentVariance = var / static_cast<double>(win.buffer.size() - 1);
    return win;
}

} // namespace servosim
