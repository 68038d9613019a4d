#pragma once

#include <optional>
#include <string>
#include <vector>

#include "servosim/estimation.hpp"
#include "servosim/fusion.hpp"
#include "servosim/matchsim.hpp"
#include "servosim/scene.hpp"

namespace servosim {

enum class StagePhase { Stage1, Stage2, Stage3, Converged, Reinitializing };

std::string stagePhaseName(StagePhase phase);

// Ablation arms: the full three-stage controller, a variant that declares
// convergence at the stage-2/3 boundary, and an open-loop arm that only
// servos to the global-camera prior.
enum class ControllerMode { Full, StopAtStage2, OpenLoopOnly };

struct ControllerConfig {
    double lambda1 = 1.2;  // 1/s, stage-1 proportional gain
    double lambda2 = 1.2;  // 1/s, stage-2 proportional gain
    double lambdaT = 0.9;  // 1/s, stage-3 translational gain
    double lambdaR = 0.9;  // 1/s, stage-3 rotational gain

    int matchCountThresh = 30;
    Vector6d varianceThresh = (Vector6d() << 3.0e-4, 3.0e-4, 3.0e-4, 2.5e-5, 2.5e-5, 2.5e-5)
                                  .finished(); // (1 deg)^2 rot, (0.5 cm)^2 trans
    double overlapDeltaThreshT = 0.02;             // meters
    double overlapDeltaThreshR = 5.0 * M_PI / 180; // radians
    int overlapHoldSteps = 10;
    double convergenceThresh = 0.01; // mixed task-error norm, radians
    double bidirFilterThresh = 0.05;
    double controlRateHz = 10.0;

    int stepBudget = 600;

    // Measurement covariance scaling: base sigmas grow with fewer matches and
    // larger robust-fit residuals (fusion should respond to matcher quality).
    double measBaseSigmaRotRad = 1.5 * M_PI / 180.0;
    double measBaseSigmaTransM = 0.006;
    double measResidualRefM = 0.003;
    int measMatchCountRef = 50;

    double priorSigmaRotRad = 3.0 * M_PI / 180.0; // global-prior covariance
    double priorSigmaTransM = 0.03;
    double processSigmaRotRad = 0.1 * M_PI / 180.0;
    double processSigmaTransM = 0.001;

    int lostTrackPatience = 20;   // steps without usable matches before reinit
    int stage1RequeryPatience = 60; // parked at the prior without stabilizing

    UkfParams ukf;
    RansacConfig wristRansac;
    HomographyConfig homography;
    PriorConfig prior;
    VelocityLimits limits;
    ControllerMode mode = ControllerMode::Full;

    double successThreshT = 0.005;             // 5 mm
    double successThreshR = 1.0 * M_PI / 180.0; // 1 deg
};

// Decoupled proportional law for stages one and two: command opposing the
// componentwise pose-vector error, in the robot frame.
VelocityCommand stageLaw12(const PoseVector6& eeVec, const PoseVector6& target, double gain);

// 2 1/2-D law: rotation decoupled (w = -lambdaR * theta-u), translation
// compensated for the rotation-induced image motion so the extended error
// decays at exactly lambdaT in the noiseless case. Returns the EE-frame twist
// mapped through the calibrated wrist extrinsic; throws DegenerateDepth when
// the reconstructed reference depth collapses below 1 mm.
VelocityCommand stageLaw3(const TaskError25D& e, const ControllerConfig& cfg,
                          const Pose& calibWrist, const ReferencePoint& ref);

// EE-frame twist expressed in the robot frame.
VelocityCommand twistToRobotFrame(const VelocityCommand& eeFrame, const Pose& eePose);

struct TransitionTelemetry {
    int matchCount = 0;
    Vector6d variance = Vector6d::Constant(std::numeric_limits<double>::infinity());
    // Newest entries last; pairs are (translation m, rotation rad) magnitudes
    // of the posterior camera-frame displacement.
    std::vector<std::pair<double, double>> posteriorDeltaHistory;
    std::vector<double> taskErrorHistory;
    bool displacementFlag = false;
};

StagePhase checkTransition(StagePhase phase, const TransitionTelemetry& telemetry,
                           const ControllerConfig& cfg);

bool bidirectionalActive(StagePhase phase, const std::vector<double>& taskErrorHistory,
                         const ControllerConfig& cfg);

struct TraceStep {
    int step = 0;
    StagePhase phase = StagePhase::Stage1;
    Pose eePose;
    VelocityCommand command;
    int matchCount = 0;
    double taskErrorNorm = std::numeric_limits<double>::quiet_NaN();
    bool unidirectionalActive = true;
    bool bidirectionalActive = false;
    std::optional<PoseVector6> estimate; // posterior (stage 2) or wrist estimate
    double posteriorDeltaT = std::numeric_limits<double>::quiet_NaN();
    double posteriorDeltaR = std::numeric_limits<double>::quiet_NaN();
};

struct EpisodeResult {
    bool success = false;
    bool converged = false;
    double finalErrT = 0.0; // meters, vs ground-truth bottleneck
    double finalErrR = 0.0; // radians
    int steps = 0;
    int stage1Steps = 0;
    int stage2Steps = 0;
    int stage3Steps = 0;
    int reinits = 0;
    std::string failureReason; // empty on success
    std::vector<TraceStep> trace;
};

struct EpisodeInputs {
    WorldState world; // object displaced, EE at its start pose
    CameraRig globalRig;
    CameraRig wristRig;
    DemoRecord demo;
    NoiseModel noise;
    Scenario scenario;
    // Optional mid-episode disturbance for recovery experiments.
    std::optional<std::pair<int, Pose>> displaceAtStep;
};

// Runs the full servoing loop at the configured control rate. Throws
// PriorUnavailable only if the object is never registered by the global
// camera; step-budget exhaustion is reported in the result, not thrown.
EpisodeResult runEpisode(EpisodeInputs inputs, const ControllerConfig& cfg);

} // namespace servosim
