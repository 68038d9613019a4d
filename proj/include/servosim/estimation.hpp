#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "servosim/geometry.hpp"
#include "servosim/matchsim.hpp"

namespace servosim {

// ---------------------------------------------------------------------------
// Rigid registration
// ---------------------------------------------------------------------------

struct RansacConfig {
    int minMatches = 6;
    int minInliers = 6;
    double inlierDistM = 0.01; // 3D inlier threshold, meters
    double confidence = 0.99;
    int maxIterations = 1000;
};

struct IcpConfig {
    int maxIters = 50;
    double relTol = 1e-6;
};

struct PriorConfig {
    int minPoints = 20;
    RansacConfig ransac;
    IcpConfig icp;
};

// Closed-form weighted least-squares rigid alignment: returns the pose p
// minimizing sum w_i |p(a_i) - b_i|^2 with a proper rotation.
Pose weightedKabsch(const std::vector<Eigen::Vector3d>& ptsA,
                    const std::vector<Eigen::Vector3d>& ptsB,
                    const std::vector<double>& weights);

struct RobustPoseResult {
    Pose pose;
    std::vector<bool> inlierFlags;
    int inlierCount = 0;
    double meanInlierResidual = 0.0; // meters
};

// MSAC-scored RANSAC over minimal 3-point samples on index-corresponded
// clouds, followed by a weighted Kabsch refit on the inliers.
RobustPoseResult ransacKabsch(const std::vector<Eigen::Vector3d>& ptsA,
                              const std::vector<Eigen::Vector3d>& ptsB,
                              const std::vector<double>& weights, const RansacConfig& cfg,
                              std::uint64_t seed);

// Lifts 2D-2D matches to 3D via backprojection, then runs ransacKabsch.
RobustPoseResult robustKabsch(const CorrespondenceSet& matches,
                              const CameraIntrinsics& intrinsicsA,
                              const CameraIntrinsics& intrinsicsB, const RansacConfig& cfg,
                              std::uint64_t seed);

// Nearest-neighbor ICP polishing. The returned pose never has a worse
// association RMS than the initial guess.
Pose icpRefine(const std::vector<Eigen::Vector3d>& cloudA,
               const std::vector<Eigen::Vector3d>& cloudB, const Pose& init,
               const IcpConfig& cfg = IcpConfig{});

// ---------------------------------------------------------------------------
// Bottleneck estimates (global prior and wrist measurement chains)
// ---------------------------------------------------------------------------

// Global-camera prior: registers the demo object cloud to the current object
// cloud (index-corresponded, both in the global camera frame), then conjugates
// the delta through the calibrated extrinsic onto the demo bottleneck.
// Registration failures surface as PriorUnavailable.
PoseVector6 globalPrior(const std::vector<Eigen::Vector3d>& demoObjCloud,
                        const std::vector<Eigen::Vector3d>& currentObjCloud,
                        const std::vector<double>& weights, const Pose& calibGlobal,
                        const Pose& demoBottleneck, const PriorConfig& cfg, std::uint64_t seed);

// Wrist-camera bottleneck estimate: conjugates the camera-frame displacement
// through the calibrated wrist extrinsic at the current EE pose.
PoseVector6 wristMeasurement(const Pose& deltaWrist, const Pose& eePose, const Pose& calibWrist);

// ---------------------------------------------------------------------------
// Homography pipeline (stage three)
// ---------------------------------------------------------------------------

struct HomographyConfig {
    int minMatches = 8;
    double reprojThreshPx = 2.0; // converted to normalized units via fx
    double confidence = 0.99;
    int maxIterations = 1000;
};

// Plane-induced map between normalized image coordinates, stored with
// h(2,2) = 1 (intrinsics removed).
struct Homography {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
};

struct HomographySolution {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d tScaled = Eigen::Vector3d::Zero(); // t / d*
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ(); // n*, unit
    bool degenerateNormal = false; // pure-rotation branch: t = 0, normal meaningless
};

struct ReferencePoint {
    Eigen::Vector3d mStar = Eigen::Vector3d::UnitZ(); // (x*, y*, 1)
    double zStar = 0.0;                               // meters
};

// 2 1/2-D task error: extended image part (rho*m - m*, rho - 1) and the
// axis-angle of the camera-to-reference rotation.
struct TaskError25D {
    Eigen::Vector3d extended = Eigen::Vector3d::Zero();
    Eigen::Vector3d rotational = Eigen::Vector3d::Zero();
    double rho = 1.0;

    double norm() const { return std::sqrt(extended.squaredNorm() + rotational.squaredNorm()); }
};

struct HomographyInlier {
    Eigen::Vector3d mStar = Eigen::Vector3d::UnitZ(); // normalized bottleneck coords
    Eigen::Vector3d mCur = Eigen::Vector3d::UnitZ();  // normalized current coords
    double depthStar = 0.0;                           // bottleneck-side depth
    double transferErr = 0.0;                         // symmetric transfer error under H
};

struct HomographyResult {
    Homography h;
    std::vector<bool> inlierFlags;
    std::vector<HomographyInlier> inliers;
};

// MSAC-scored RANSAC over 4-point DLT samples with symmetric-transfer-error
// scoring in normalized coordinates; final DLT refit on the inliers.
HomographyResult estimateHomography(const CorrespondenceSet& matches,
                                    const CameraIntrinsics& intrinsics,
                                    const HomographyConfig& cfg, std::uint64_t seed);

// SVD-based decomposition of H into (R, t/d*, n*) candidates. Up to four
// mathematical solutions; passing reference points applies the cheirality
// test (positive reconstructed depth: n.m* > 0), leaving at most two.
// A homography within 1e-6 of a pure rotation returns the single degenerate
// solution (R, t = 0, normal flagged).
std::vector<HomographySolution> decomposeHomography(
    const Homography& h,
    const std::vector<Eigen::Vector3d>& referencePoints = {});

// Temporal-consistency solution selection; cold start falls back to the
// configured plane-normal guess. Deterministic tie-break: smaller rotation
// angle, then lexicographically smaller normal.
HomographySolution selectSolution(const std::vector<HomographySolution>& candidates,
                                  const std::optional<HomographySolution>& previous,
                                  const Eigen::Vector3d& initialNormalGuess = Eigen::Vector3d::UnitZ());

// Task-function evaluation. Picks (and then keeps) the reference point as the
// inlier with the smallest transfer error; rho*m = H*m*.
std::pair<TaskError25D, ReferencePoint> buildTaskError(
    const Homography& h, const std::vector<HomographyInlier>& inliers,
    const HomographySolution& selected, const std::optional<ReferencePoint>& ref);

// Scale-canonical form used by the decomposition and its tests: H divided by
// its middle singular value, sign-fixed so det > 0.
Eigen::Matrix3d normalizeHomographyScale(const Eigen::Matrix3d& h);

} // namespace servosim
