#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "servosim/scene.hpp"

namespace servosim {

enum class Primitive { Act, Stabilize, Rearrange };
enum class GripperState { Open, Closed };
enum class Paradigm { ActAct, StabilizeAct, RearrangeAct, RearrangeRearrange };

std::string primitiveName(Primitive p);
Primitive primitiveFromName(const std::string& name);
std::string paradigmName(Paradigm p);
Paradigm paradigmFromName(const std::string& name);

struct DemoWaypoint {
    double t = 0.0; // seconds, strictly increasing per arm
    Pose eePose;
    GripperState gripper = GripperState::Open;
};

struct DemoSegment {
    int armId = 0;
    Primitive primitive = Primitive::Act;
    int begin = 0, end = 0; // waypoint index range [begin, end)
};

// Act segments store dense waypoints; Stabilize and Rearrange segments are
// consumed through their target EE poses only.
struct DemoTrajectory {
    Paradigm paradigm = Paradigm::ActAct;
    std::array<std::vector<DemoWaypoint>, 2> perArm;
    std::vector<DemoSegment> segments;
};

// Throws ConfigError unless timestamps increase, segments tile each arm's
// waypoints, and the segment pattern matches the declared paradigm.
void validateDemo(const DemoTrajectory& demo);

struct PlanSegment {
    int armId = 0;
    Primitive primitive = Primitive::Act;
    int barrierSlot = 0; // segments in the same slot run concurrently
    std::vector<DemoWaypoint> waypoints;
};

struct CoordinationPlan {
    Paradigm paradigm = Paradigm::ActAct;
    std::vector<PlanSegment> orderedSegments;
};

// Groups a labeled demonstration into barrier-slotted segments following its
// paradigm (Rearrange slots precede interaction slots; Stabilize runs
// alongside its Act).
CoordinationPlan makePlan(const DemoTrajectory& demo);

struct TimedWaypoint {
    double t = 0.0;
    Pose eePose;
    GripperState gripper = GripperState::Open;
};

struct CoordinatedTrajectory {
    std::array<std::vector<TimedWaypoint>, 2> perArm;
    Pose bottleneckRef; // T_R^B
};

// Relative object pose change implied by the bottleneck pair:
// delta = testBottleneck * inverse(demoBottleneck).
Pose deltaObjectTransform(const Pose& demoBottleneck, const Pose& testBottleneck);

// Left-multiplies every waypoint pose by delta; times and grippers unchanged.
CoordinatedTrajectory adaptCartesian(const CoordinatedTrajectory& traj, const Pose& delta);

struct GripperWaypoint {
    Pose pose;
    GripperState gripper = GripperState::Open;
};

struct RearrangeConfig {
    double liftHeight = 0.10; // meters
    Eigen::Vector3d workspaceMin{0.15, -0.45, -0.01};
    Eigen::Vector3d workspaceMax{0.85, 0.45, 0.6};
};

struct RearrangePlan {
    std::vector<GripperWaypoint> waypoints;
    bool noOp = false; // grasp/release in place, object already at the demo pose
};

// Straight-line pick/lift/transport/place plan that returns the object to
// demoObjPose under the kinematic grasp model. graspPose is in the object
// frame. No collision checking.
RearrangePlan planRearrange(const Pose& currentObjPose, const Pose& demoObjPose,
                            const Pose& graspPose, const RearrangeConfig& cfg = {});

struct MotionLimits {
    double vMax = 0.5;    // m/s
    double aMax = 1.0;    // m/s^2
    double omegaMax = 1.0; // rad/s
    double alphaMax = 2.0; // rad/s^2
};

// Trapezoidal (or triangular) profile duration for a point-to-point move.
double trapezoidDuration(double distance, double vMax, double aMax);

// Normalized trapezoid position s(t) in [0, 1] for a unit move under the
// given normalized limits; t clamped to [0, duration].
double trapezoidPosition(double t, double duration, double vLimit, double aLimit);

// Time-parameterizes one arm's waypoint chain with per-segment trapezoids,
// sampled at dt. Zero-length segments become a dwell of one sample.
std::vector<TimedWaypoint> timeParameterizeArm(const std::vector<GripperWaypoint>& waypoints,
                                               const MotionLimits& limits, double dt = 0.1,
                                               double startTime = 0.0);

// Dual-arm parametrization with barrier alignment: slot k of both arms starts
// together and lasts as long as the slower arm (the faster one dwells).
CoordinatedTrajectory timeParameterize(
    const std::vector<std::vector<GripperWaypoint>>& armASlots,
    const std::vector<std::vector<GripperWaypoint>>& armBSlots, const MotionLimits& limits,
    const Pose& bottleneckRef, double dt = 0.1);

enum class ExecutionMode { CartesianAdapted, JointReplay };

struct ExecutionConfig {
    double attachDistance = 0.01;     // meters: gripper-to-grasp proximity for attachment
    double replayPreconditionT = 0.01;            // jointReplay: object restored within
    double replayPreconditionR = 2.0 * M_PI / 180; // these tolerances of the demo pose
    double successThreshT = 0.005;
    double successThreshR = 1.0 * M_PI / 180.0;
};

struct ExecutionResult {
    bool success = false;
    std::array<double, 2> finalRelErrT{0.0, 0.0}; // vs demo final EE-object relative pose
    std::array<double, 2> finalRelErrR{0.0, 0.0};
    std::vector<std::array<Pose, 2>> relativeTrace; // per-step EE-object relative poses
};

// Drives both simulated EEs through the timed waypoints (kinematic following,
// grasp attachment honored). demoFinalRelative are the demonstration's final
// EE-object relative poses per arm; graspInObject enables attachment. For
// JointReplay the object must already be restored to its demo pose.
ExecutionResult executePlan(WorldState& world, const CoordinatedTrajectory& plan,
                            ExecutionMode mode, const std::array<Pose, 2>& demoFinalRelative,
                            const std::optional<Pose>& graspInObject = std::nullopt,
                            const ExecutionConfig& cfg = {});

// Kinematic arm placement preserving the grasp attachment.
void setArmPose(WorldState& world, int arm, const Pose& pose);

} // namespace servosim
