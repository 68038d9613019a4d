#pragma once

#include <Eigen/Dense>

#include "servosim/errors.hpp"

namespace servosim {

// Rigid transform in SE(3). Rotation is kept orthonormal by re-orthonormalizing
// (polar decomposition) once a composition chain grows past kReorthoInterval.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    int chainLength = 0; // compositions since the last re-orthonormalization

    static constexpr int kReorthoInterval = 100;

    static Pose Identity() { return Pose{}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

// Nearest rotation matrix (polar decomposition, det +1).
Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m);

// Rotation angle in [0, pi].
double rotationAngle(const Eigen::Matrix3d& r);

// Geodesic distance between the rotations of two poses plus translation gap.
double rotationDistance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
double translationDistance(const Pose& a, const Pose& b);

// Axis-angle + translation image of a pose. The axis-angle norm is the
// rotation angle and must stay strictly below pi; poses at the theta = pi
// singularity are rejected (AngleAtPi) rather than handled with a second chart.
struct PoseVector6 {
    Eigen::Vector3d axisAngle = Eigen::Vector3d::Zero();   // radians
    Eigen::Vector3d translation = Eigen::Vector3d::Zero(); // meters

    Eigen::Matrix<double, 6, 1> stacked() const {
        Eigen::Matrix<double, 6, 1> v;
        v << axisAngle, translation;
        return v;
    }
    static PoseVector6 fromStacked(const Eigen::Matrix<double, 6, 1>& v) {
        return PoseVector6{v.head<3>(), v.tail<3>()};
    }
};

constexpr double kAnglePiMargin = 1e-6;

// M: Pose -> axis-angle/translation vector. Throws AngleAtPi for theta >= pi - margin.
PoseVector6 toVector(const Pose& p);

// Inverse of M via the Rodrigues formula. Throws AngleAtPi for |axisAngle| >= pi - margin.
Pose fromVector(const PoseVector6& v);

// Rodrigues rotation about an arbitrary rotation vector (angle = norm).
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& rotVec);

// Pinhole model shared by the simulated cameras.
struct CameraIntrinsics {
    double fx = 600.0, fy = 600.0; // pixels
    double cx = 424.0, cy = 240.0; // pixels
    int width = 848, height = 480; // pixels

    bool valid() const {
        return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }
};

struct PixelDepth {
    Eigen::Vector2d pixel;
    double depth;
};

// Projects a camera-frame point; throws BehindCamera for z <= 1e-6.
PixelDepth project(const CameraIntrinsics& intr, const Eigen::Vector3d& pointCam);

// Exact inverse of project; throws NonPositiveDepth for depth <= 0.
Eigen::Vector3d backproject(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel,
                            double depth);

// Normalized image coordinates (x/z, y/z, 1) of a pixel.
Eigen::Vector3d normalizedCoords(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel);
Eigen::Vector2d pixelFromNormalized(const CameraIntrinsics& intr, const Eigen::Vector3d& m);

} // namespace servosim
