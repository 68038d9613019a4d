#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "servosim/geometry.hpp"

namespace servosim {

// A feature-bearing task object. Cameras are feature-level, not pixel-level:
// downstream math consumes correspondences and depths, so no rendering exists.
struct ObjectFeature {
    int id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // object frame, meters
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // object frame, outward
    std::uint64_t descriptorSeed = 0;
};

struct ObjectModel {
    std::vector<ObjectFeature> featurePoints;
    double boundingRadius = 0.05; // meters
};

// Household-object stand-in: a flat-topped block with featured sides. The
// dominant top plane is what the stage-3 homography latches onto.
ObjectModel makeBoxObject(std::uint64_t seed, int featureCount = 120,
                          double halfExtent = 0.05, double height = 0.06);

enum class CameraMount { GlobalFixed, WristAttached };

// trueExtrinsic is the exact mounting; calibExtrinsic is the perturbed copy
// handed to the estimators ("imprecise hand-eye calibration").
struct CameraRig {
    CameraIntrinsics intrinsics;
    Pose trueExtrinsic;  // global: camera in robot frame; wrist: camera in EE frame
    Pose calibExtrinsic;
    CameraMount mount = CameraMount::GlobalFixed;
};

// Perturbs truth by a rotation of exactly rotRad about a random axis and a
// translation of exactly transM in a random direction.
Pose perturbPose(const Pose& truth, double rotRad, double transM, std::mt19937_64& rng);

enum class DofMode { FourDof, SixDof };

struct ScenarioConfig {
    DofMode dofMode = DofMode::FourDof;
    double maxZRotDeg = 60.0;
    double maxXYRotDeg = 30.0;
    double maxTranslationM = 0.12;
    int distractorCount = 0;
    double occlusionFraction = 0.0;
    double maskErosionFraction = 0.0;
    double calibErrorScale = 1.0;   // x (1 deg, 1 cm)
    double matcherNoiseScale = 1.0; // scales the match noise model
    std::uint64_t seed = 0;
};

struct Scenario {
    Pose objectDelta; // demo -> test object displacement, robot frame
    DofMode dofMode = DofMode::FourDof;
    int distractorCount = 0;
    double occlusionFraction = 0.0;
    double maskErosionFraction = 0.0;
    double calibErrorScale = 1.0;
    double matcherNoiseScale = 1.0;
    std::uint64_t seed = 0;
};

// Deterministic function of (config, seed): same inputs, same Scenario.
Scenario sampleScenario(const ScenarioConfig& config, std::uint64_t seed);

struct VelocityCommand {
    Eigen::Vector3d linear = Eigen::Vector3d::Zero();  // m/s, robot frame
    Eigen::Vector3d angular = Eigen::Vector3d::Zero(); // rad/s, robot frame

    bool finite() const { return linear.allFinite() && angular.allFinite(); }
};

struct VelocityLimits {
    double maxLinear = 0.15; // m/s per axis
    double maxAngular = 0.8; // rad/s per axis
};

struct DistractorFeature {
    int id = 0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero(); // robot frame
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// Kinematic world: EE is a free rigid body under velocity control, the object
// a displaceable feature cloud. Ground truth lives here and only here.
struct WorldState {
    Pose eePose;            // T_R^E
    Pose objectPose;        // T_R^O, ground truth only
    Pose demoObjectPose;    // object pose when the demonstration was recorded
    Pose demoBottleneck;    // T_R^B
    double time = 0.0;      // seconds
    std::mt19937_64 rng{0};

    ObjectModel object;
    std::vector<DistractorFeature> distractors;

    Pose secondEePose;        // second arm, used by the coordination module
    bool displacementFlag = false; // set by displaceObject, cleared by the controller
    int lastClampedAxes = 0;       // telemetry: axes clamped in the last stepRobot

    // Grasp attachment (kinematic): object rigidly follows the grasping EE.
    std::optional<Pose> attachedGraspOffset; // T_E^O while attached
    int attachedArm = -1;                    // 0 = eePose, 1 = secondEePose
};

// Ground-truth optimal bottleneck: objectPose * inverse(demoObjectPose) * demoBottleneck.
Pose trueBottleneck(const WorldState& world);

struct FeatureObservation {
    int id = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0; // meters
    bool inMask = false;
};

struct FeatureObservations {
    std::vector<FeatureObservation> features;
    CameraIntrinsics intrinsics;
    // Camera pose in the object frame at capture time. Simulation-internal
    // ground truth; drives the viewpoint-dependent matcher noise only.
    Pose cameraPoseInObject;
};

struct ObservationConfig {
    double occlusionFraction = 0.0;
    double maskErosionFraction = 0.0;
};

// Camera pose in the robot frame for a rig given the current world.
Pose cameraPoseInRobot(const WorldState& world, const CameraRig& rig);

// Feature-level rendering: frustum, front-facing and occlusion checks, true
// pixels/depths under the TRUE extrinsic. Empty set signals object out of view.
FeatureObservations observe(WorldState& world, const CameraRig& rig,
                            const ObservationConfig& cfg);

// First-order integration of a clamped velocity command (10 Hz control rate).
void stepRobot(WorldState& world, const VelocityCommand& cmd, double dt,
               const VelocityLimits& limits = VelocityLimits{});

// objectPose <- delta * objectPose; flags the displacement for the controller.
void displaceObject(WorldState& world, const Pose& delta);

// Scene geometry shared by episodes and benchmarks.
struct SceneLayout {
    Pose demoObjectPose;        // object resting pose at demonstration time
    Pose globalCameraPose;      // T_R^Cg truth
    Pose wristCameraInEE;       // T_E^Cw truth
    double bottleneckStandoff = 0.15; // meters along the object z-axis (config, not a claim)
};

SceneLayout defaultLayout();

// Builds the demo-time world: object at rest, EE parked at the bottleneck,
// distractors scattered on the table, rigs calibrated with scaled perturbation.
struct BuiltScene {
    WorldState world;
    CameraRig globalRig;
    CameraRig wristRig;
};

BuiltScene buildScene(const Scenario& scenario, const SceneLayout& layout = defaultLayout());

// Clean captures taken at the demonstration bottleneck before the object moves.
struct DemoRecord {
    FeatureObservations wristBottleneck;
    FeatureObservations globalBottleneck;
    Pose demoBottleneck;
};

DemoRecord recordDemo(WorldState& world, const CameraRig& globalRig, const CameraRig& wristRig);

std::string dofModeName(DofMode mode);
DofMode dofModeFromName(const std::string& name);

} // namespace servosim
