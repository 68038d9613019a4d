#include "servosim/geometry.hpp"

#include <cmath>

namespace servosim {

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    out.chainLength = a.chainLength + b.chainLength + 1;
    if (out.chainLength >= Pose::kReorthoInterval) {
        out.rotation = orthonormalized(out.rotation);
        out.chainLength = 0;
    }
    return out;
}

Pose inverse(const Pose& p) {
    Pose out;
    out.rotation = p.rotation.transpose();
    out.translation = -(out.rotation * p.translation);
    out.chainLength = p.chainLength;
    return out;
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

double rotationAngle(const Eigen::Matrix3d& r) {
    double c = (r.trace() - 1.0) * 0.5;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

double rotationDistance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    return rotationAngle(a.transpose() * b);
}

double translationDistance(const Pose& a, const Pose& b) {
    return (a.translation - b.translation).norm();
}

PoseVector6 toVector(const Pose& p) {
    Eigen::AngleAxisd aa(p.rotation);
    double angle = aa.angle();
    Eigen::Vector3d axis = aa.axis();
    // Eigen may report angles in (pi, 2pi) for some inputs; fold to [0, pi].
    if (angle > M_PI) {
        angle = 2.0 * M_PI - angle;
        axis = -axis;
    }
    if (angle >= M_PI - kAnglePiMargin)
        throw AngleAtPi("rotation angle at or beyond pi - 1e-6");
    PoseVector6 v;
    v.axisAngle = angle * axis;
    v.translation = p.translation;
    return v;
}

Pose fromVector(const PoseVector6& v) {
    const double angle = v.axisAngle.norm();
    if (angle >= M_PI - kAnglePiMargin)
        throw AngleAtPi("axis-angle norm at or beyond pi - 1e-6");
    Pose p;
    p.rotation = rodrigues(v.axisAngle);
    p.translation = v.translation;
    return p;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& rotVec) {
    const double angle = rotVec.norm();
    if (angle < 1e-14) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, rotVec / angle).toRotationMatrix();
}

PixelDepth project(const CameraIntrinsics& intr, const Eigen::Vector3d& pointCam) {
    if (pointCam.z() <= 1e-6) throw BehindCamera("point at or behind the camera plane");
    PixelDepth out;
    out.pixel.x() = intr.fx * pointCam.x() / pointCam.z() + intr.cx;
    out.pixel.y() = intr.fy * pointCam.y() / pointCam.z() + intr.cy;
    out.depth = pointCam.z();
    return out;
}

Eigen::Vector3d backproject(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel,
                            double depth) {
    if (depth <= 0.0) throw NonPositiveDepth("backproject requires depth > 0");
    return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth,
            depth};
}

Eigen::Vector3d normalizedCoords(const CameraIntrinsics& intr, const Eigen::Vector2d& pixel) {
    return {(pixel.x() - intr.cx) / intr.fx, (pixel.y() - intr.cy) / intr.fy, 1.0};
}

Eigen::Vector2d pixelFromNormalized(const CameraIntrinsics& intr, const Eigen::Vector3d& m) {
    const Eigen::Vector3d h = m / m.z();
    return {intr.fx * h.x() + intr.cx, intr.fy * h.y() + intr.cy};
}

} // namespace servosim
