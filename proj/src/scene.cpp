#include "servosim/scene.hpp"

#include <algorithm>
#include <cmath>

namespace servosim {

namespace {

Eigen::Vector3d uniformUnitVector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector3d v;
    do {
        v = {gauss(rng), gauss(rng), gauss(rng)};
    } while (v.norm() < 1e-9);
    return v.normalized();
}

Eigen::Matrix3d lookAtRotation(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
    // Camera convention: x right, y down, z forward.
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
    if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitY();
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    return r;
}

} // namespace

ObjectModel makeBoxObject(std::uint64_t seed, int featureCount, double halfExtent,
                          double height) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> uz(0.15, 0.95);

    ObjectModel model;
    model.boundingRadius = std::sqrt(2.0 * halfExtent * halfExtent + height * height);
    model.featurePoints.reserve(featureCount);

    const int topCount = featureCount * 6 / 10;
    for (int i = 0; i < featureCount; ++i) {
        ObjectFeature f;
        f.id = i;
        f.descriptorSeed = rng();
        if (i < topCount) {
            // Top face with slight relief so the plane is dominant, not exact.
            f.position = {uni(rng) * halfExtent, uni(rng) * halfExtent,
                          height + 0.002 * uni(rng)};
            f.normal = Eigen::Vector3d::UnitZ();
        } else {
            const int side = i % 4;
            const double a = uni(rng) * halfExtent;
            const double z = uz(rng) * height;
            switch (side) {
                case 0: f.position = {halfExtent, a, z}; f.normal = Eigen::Vector3d::UnitX(); break;
                case 1: f.position = {-halfExtent, a, z}; f.normal = -Eigen::Vector3d::UnitX(); break;
                case 2: f.position = {a, halfExtent, z}; f.normal = Eigen::Vector3d::UnitY(); break;
                default: f.position = {a, -halfExtent, z}; f.normal = -Eigen::Vector3d::UnitY(); break;
            }
        }
        model.featurePoints.push_back(f);
    }
    return model;
}

Pose perturbPose(const Pose& truth, double rotRad, double transM, std::mt19937_64& rng) {
    const Eigen::Vector3d rotAxis = uniformUnitVector(rng);
    const Eigen::Vector3d transDir = uniformUnitVector(rng);
    Pose delta;
    delta.rotation = rodrigues(rotAxis * rotRad);
    delta.translation = transDir * transM;
    return compose(truth, delta);
}

Scenario sampleScenario(const ScenarioConfig& config, std::uint64_t seed) {
    if (config.maxZRotDeg < 0 || config.maxXYRotDeg < 0 || config.maxTranslationM < 0 ||
        config.occlusionFraction < 0 || config.occlusionFraction > 1 ||
        config.maskErosionFraction < 0 || config.maskErosionFraction > 1 ||
        config.distractorCount < 0 || config.calibErrorScale < 0 ||
        config.matcherNoiseScale < 0)
        throw InvalidBounds("scenario config out of range");

    std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbull);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    const double deg = M_PI / 180.0;
    const double zRot = uni(rng) * config.maxZRotDeg * deg;
    double xRot = 0.0, yRot = 0.0;
    if (config.dofMode == DofMode::SixDof) {
        xRot = uni(rng) * config.maxXYRotDeg * deg;
        yRot = uni(rng) * config.maxXYRotDeg * deg;
    }
    const Eigen::Matrix3d r = (Eigen::AngleAxisd(zRot, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(yRot, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(xRot, Eigen::Vector3d::UnitX()))
                                  .toRotationMatrix();
    const Eigen::Vector3d shift(uni(rng) * config.maxTranslationM,
                                uni(rng) * config.maxTranslationM, 0.0);

    // Rotation pivots about the demo object center; expressed as a robot-frame
    // left delta: x -> R (x - c) + c + shift.
    const Eigen::Vector3d pivot = defaultLayout().demoObjectPose.translation;

    Scenario s;
    s.objectDelta.rotation = r;
    s.objectDelta.translation = pivot + shift - r * pivot;
    s.dofMode = config.dofMode;
    s.distractorCount = config.distractorCount;
    s.occlusionFraction = config.occlusionFraction;
    s.maskErosionFraction = config.maskErosionFraction;
    s.calibErrorScale = config.calibErrorScale;
    s.matcherNoiseScale = config.matcherNoiseScale;
    s.seed = seed;
    return s;
}

Pose trueBottleneck(const WorldState& world) {
    return compose(compose(world.objectPose, inverse(world.demoObjectPose)),
                   world.demoBottleneck);
}

Pose cameraPoseInRobot(const WorldState& world, const CameraRig& rig) {
    if (rig.mount == CameraMount::GlobalFixed) return rig.trueExtrinsic;
    return compose(world.eePose, rig.trueExtrinsic);
}

FeatureObservations observe(WorldState& world, const CameraRig& rig,
                            const ObservationConfig& cfg) {
    FeatureObservations obs;
    obs.intrinsics = rig.intrinsics;
    const Pose camPose = cameraPoseInRobot(world, rig);
    const Pose camInv = inverse(camPose);
    obs.cameraPoseInObject = compose(inverse(world.objectPose), camPose);

    std::bernoulli_distribution occluded(std::clamp(cfg.occlusionFraction, 0.0, 1.0));
    std::bernoulli_distribution eroded(std::clamp(cfg.maskErosionFraction, 0.0, 1.0));

    auto tryObserve = [&](int id, const Eigen::Vector3d& worldPos,
                          const Eigen::Vector3d& worldNormal, bool isObject) {
        const Eigen::Vector3d viewRay = worldPos - camPose.translation;
        if (worldNormal.dot(viewRay) >= 0.0) return; // back-facing
        const Eigen::Vector3d inCam = camInv.apply(worldPos);
        if (inCam.z() <= 0.01) return;
        const PixelDepth pd = project(rig.intrinsics, inCam);
        if (pd.pixel.x() < 0 || pd.pixel.x() >= rig.intrinsics.width || pd.pixel.y() < 0 ||
            pd.pixel.y() >= rig.intrinsics.height)
            return;
        if (isObject && cfg.occlusionFraction > 0.0 && occluded(world.rng)) return;
        bool inMask = isObject;
        if (isObject && cfg.maskErosionFraction > 0.0 && eroded(world.rng)) inMask = false;
        obs.features.push_back({id, pd.pixel, pd.depth, inMask});
    };

    for (const ObjectFeature& f : world.object.featurePoints) {
        tryObserve(f.id, world.objectPose.apply(f.position),
                   world.objectPose.rotation * f.normal, true);
    }
    for (const DistractorFeature& d : world.distractors) {
        tryObserve(d.id, d.position, d.normal, false);
    }
    return obs;
}

void stepRobot(WorldState& world, const VelocityCommand& cmd, double dt,
               const VelocityLimits& limits) {
    if (!cmd.finite()) throw NonFiniteCommand("velocity command has non-finite components");

    VelocityCommand clamped = cmd;
    int clampedAxes = 0;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(clamped.linear[i]) > limits.maxLinear) {
            clamped.linear[i] = std::copysign(limits.maxLinear, clamped.linear[i]);
            ++clampedAxes;
        }
        if (std::abs(clamped.angular[i]) > limits.maxAngular) {
            clamped.angular[i] = std::copysign(limits.maxAngular, clamped.angular[i]);
            ++clampedAxes;
        }
    }
    world.lastClampedAxes = clampedAxes;

    world.eePose.translation += clamped.linear * dt;
    world.eePose.rotation = rodrigues(clamped.angular * dt) * world.eePose.rotation;
    world.eePose.chainLength += 1;
    if (world.eePose.chainLength >= Pose::kReorthoInterval) {
        world.eePose.rotation = orthonormalized(world.eePose.rotation);
        world.eePose.chainLength = 0;
    }
    world.time += dt;

    if (world.attachedGraspOffset && world.attachedArm == 0)
        world.objectPose = compose(world.eePose, *world.attachedGraspOffset);
}

void displaceObject(WorldState& world, const Pose& delta) {
    world.objectPose = compose(delta, world.objectPose);
    const bool identity = rotationAngle(delta.rotation) < 1e-12 &&
                          delta.translation.norm() < 1e-12;
    if (!identity) world.displacementFlag = true;
}

SceneLayout defaultLayout() {
    SceneLayout layout;
    layout.demoObjectPose.translation = {0.5, 0.0, 0.0};

    layout.globalCameraPose.translation = {1.05, 0.0, 0.55};
    layout.globalCameraPose.rotation =
        lookAtRotation(layout.globalCameraPose.translation, {0.5, 0.0, 0.05});

    // Wrist camera hangs under the tool flange looking along the EE -z axis.
    layout.wristCameraInEE.rotation =
        Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()).toRotationMatrix();
    layout.wristCameraInEE.translation = {0.03, 0.0, -0.02};
    return layout;
}

BuiltScene buildScene(const Scenario& scenario, const SceneLayout& layout) {
    BuiltScene scene;
    std::mt19937_64 rng(scenario.seed ^ 0xc2b2ae3d27d4eb4full);

    scene.world.object = makeBoxObject(scenario.seed);
    scene.world.demoObjectPose = layout.demoObjectPose;
    scene.world.objectPose = layout.demoObjectPose;

    // Bottleneck: standoff above the object top. The EE keeps an upright frame
    // (the camera extrinsic carries the look-down flip), so EE rotations stay
    // well clear of the axis-angle singularity at pi.
    Pose standoff;
    standoff.translation = {0.0, 0.0, 0.06 + layout.bottleneckStandoff};
    scene.world.demoBottleneck = compose(layout.demoObjectPose, standoff);
    scene.world.eePose = scene.world.demoBottleneck;
    scene.world.secondEePose.translation = {0.3, -0.35, 0.3};
    scene.world.rng.seed(scenario.seed ^ 0xa0761d6478bd642full);

    std::uniform_real_distribution<double> ringR(0.16, 0.3);
    std::uniform_real_distribution<double> ringA(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> dz(0.0, 0.05);
    for (int i = 0; i < scenario.distractorCount; ++i) {
        const double r = ringR(rng), a = ringA(rng);
        DistractorFeature d;
        d.id = 100000 + i;
        d.position = layout.demoObjectPose.translation +
                     Eigen::Vector3d(r * std::cos(a), r * std::sin(a), dz(rng));
        scene.world.distractors.push_back(d);
    }

    const double calibRot = scenario.calibErrorScale * M_PI / 180.0; // 1 degree
    const double calibTrans = scenario.calibErrorScale * 0.01;       // 1 cm

    scene.globalRig.mount = CameraMount::GlobalFixed;
    scene.globalRig.intrinsics = {900.0, 900.0, 640.0, 360.0, 1280, 720};
    scene.globalRig.trueExtrinsic = layout.globalCameraPose;
    scene.globalRig.calibExtrinsic = perturbPose(layout.globalCameraPose, calibRot, calibTrans, rng);

    scene.wristRig.mount = CameraMount::WristAttached;
    scene.wristRig.intrinsics = {600.0, 600.0, 424.0, 240.0, 848, 480};
    scene.wristRig.trueExtrinsic = layout.wristCameraInEE;
    scene.wristRig.calibExtrinsic = perturbPose(layout.wristCameraInEE, calibRot, calibTrans, rng);

    return scene;
}

DemoRecord recordDemo(WorldState& world, const CameraRig& globalRig, const CameraRig& wristRig) {
    DemoRecord demo;
    const Pose savedEE = world.eePose;
    world.eePose = world.demoBottleneck;
    ObservationConfig clean; // demonstrations are captured unoccluded
    demo.wristBottleneck = observe(world, wristRig, clean);
    demo.globalBottleneck = observe(world, globalRig, clean);
    demo.demoBottleneck = world.demoBottleneck;
    world.eePose = savedEE;
    return demo;
}

std::string dofModeName(DofMode mode) {
    return mode == DofMode::FourDof ? "4dof" : "6dof";
}

DofMode dofModeFromName(const std::string& name) {
    if (name == "4dof") return DofMode::FourDof;
    if (name == "6dof") return DofMode::SixDof;
    throw ConfigError("unknown dofMode: " + name);
}

} // namespace servosim
