#include "servosim/coordination.hpp"

#include <algorithm>
#include <cmath>

namespace servosim {

std::string primitiveName(Primitive p) {
    switch (p) {
        case Primitive::Act: return "act";
        case Primitive::Stabilize: return "stabilize";
        case Primitive::Rearrange: return "rearrange";
    }
    return "unknown";
}

Primitive primitiveFromName(const std::string& name) {
    if (name == "act") return Primitive::Act;
    if (name == "stabilize") return Primitive::Stabilize;
    if (name == "rearrange") return Primitive::Rearrange;
    throw ConfigError("unknown primitive: " + name);
}

std::string paradigmName(Paradigm p) {
    switch (p) {
        case Paradigm::ActAct: return "act-act";
        case Paradigm::StabilizeAct: return "stabilize-act";
        case Paradigm::RearrangeAct: return "rearrange-act";
        case Paradigm::RearrangeRearrange: return "rearrange-rearrange";
    }
    return "unknown";
}

Paradigm paradigmFromName(const std::string& name) {
    if (name == "act-act") return Paradigm::ActAct;
    if (name == "stabilize-act") return Paradigm::StabilizeAct;
    if (name == "rearrange-act") return Paradigm::RearrangeAct;
    if (name == "rearrange-rearrange") return Paradigm::RearrangeRearrange;
    throw ConfigError("unknown paradigm: " + name);
}

namespace {

std::vector<const DemoSegment*> armSegments(const DemoTrajectory& demo, int arm) {
    std::vector<const DemoSegment*> out;
    for (const auto& s : demo.segments)
        if (s.armId == arm) out.push_back(&s);
    return out;
}

} // namespace

void validateDemo(const DemoTrajectory& demo) {
    for (int arm = 0; arm < 2; ++arm) {
        const auto& wps = demo.perArm[arm];
        for (std::size_t i = 1; i < wps.size(); ++i)
            if (wps[i].t <= wps[i - 1].t)
                throw ConfigError("demo timestamps must be strictly increasing");

        auto segs = armSegments(demo, arm);
        std::sort(segs.begin(), segs.end(),
                  [](const DemoSegment* a, const DemoSegment* b) { return a->begin < b->begin; });
        int cursor = 0;
        for (const auto* s : segs) {
            if (s->begin != cursor || s->end <= s->begin)
                throw ConfigError("segments must tile each arm's waypoints");
            cursor = s->end;
        }
        if (cursor != static_cast<int>(wps.size()))
            throw ConfigError("segments must cover all waypoints");
    }

    auto primitives = [&](int arm) {
        std::vector<Primitive> out;
        for (const auto* s : armSegments(demo, arm)) out.push_back(s->primitive);
        return out;
    };
    const auto a = primitives(0), b = primitives(1);
    auto countOf = [](const std::vector<Primitive>& v, Primitive p) {
        return std::count(v.begin(), v.end(), p);
    };

    switch (demo.paradigm) {
        case Paradigm::ActAct:
            if (countOf(a, Primitive::Act) != 1 || countOf(b, Primitive::Act) != 1 ||
                a.size() != 1 || b.size() != 1)
                throw ConfigError("act-act expects exactly one act segment per arm");
            break;
        case Paradigm::StabilizeAct: {
            const bool ok = (a == std::vector<Primitive>{Primitive::Stabilize} &&
                             b == std::vector<Primitive>{Primitive::Act}) ||
                            (b == std::vector<Primitive>{Primitive::Stabilize} &&
                             a == std::vector<Primitive>{Primitive::Act});
            if (!ok) throw ConfigError("stabilize-act expects one stabilize and one act arm");
            break;
        }
        case Paradigm::RearrangeAct: {
            const bool ok = (a == std::vector<Primitive>{Primitive::Rearrange} &&
                             b == std::vector<Primitive>{Primitive::Act}) ||
                            (b == std::vector<Primitive>{Primitive::Rearrange} &&
                             a == std::vector<Primitive>{Primitive::Act});
            if (!ok) throw ConfigError("rearrange-act expects one rearrange and one act arm");
            break;
        }
        case Paradigm::RearrangeRearrange:
            if (a.empty() || b.empty() || a.front() != Primitive::Rearrange ||
                b.front() != Primitive::Rearrange)
                throw ConfigError("rearrange-rearrange expects both arms to start rearranging");
            break;
    }
}

CoordinationPlan makePlan(const DemoTrajectory& demo) {
    validateDemo(demo);
    CoordinationPlan plan;
    plan.paradigm = demo.paradigm;

    auto pushSegment = [&](const DemoSegment& s, int slot) {
        PlanSegment ps;
        ps.armId = s.armId;
        ps.primitive = s.primitive;
        ps.barrierSlot = slot;
        const auto& wps = demo.perArm[s.armId];
        for (int i = s.begin; i < s.end; ++i) ps.waypoints.push_back(wps[i]);
        plan.orderedSegments.push_back(std::move(ps));
    };

    // Rearranges occupy the leading barrier slots; everything else follows.
    // Stabilize-Act and Act-Act run their segments concurrently in one slot.
    int interactionSlot = 0;
    if (demo.paradigm == Paradigm::RearrangeAct ||
        demo.paradigm == Paradigm::RearrangeRearrange)
        interactionSlot = 1;
    for (const auto& s : demo.segments) {
        const bool rearr = s.primitive == Primitive::Rearrange;
        pushSegment(s, rearr ? 0 : interactionSlot);
    }
    std::stable_sort(plan.orderedSegments.begin(), plan.orderedSegments.end(),
                     [](const PlanSegment& x, const PlanSegment& y) {
                         return x.barrierSlot < y.barrierSlot;
                     });
    return plan;
}

Pose deltaObjectTransform(const Pose& demoBottleneck, const Pose& testBottleneck) {
    return compose(testBottleneck, inverse(demoBottleneck));
}

CoordinatedTrajectory adaptCartesian(const CoordinatedTrajectory& traj, const Pose& delta) {
    CoordinatedTrajectory out = traj;
    for (auto& arm : out.perArm)
        for (auto& wp : arm) wp.eePose = compose(delta, wp.eePose);
    return out;
}

RearrangePlan planRearrange(const Pose& currentObjPose, const Pose& demoObjPose,
                            const Pose& graspPose, const RearrangeConfig& cfg) {
    const Pose graspNow = compose(currentObjPose, graspPose);
    const Pose graspDemo = compose(demoObjPose, graspPose);

    auto inWorkspace = [&](const Eigen::Vector3d& p) {
        return (p.array() >= cfg.workspaceMin.array()).all() &&
               (p.array() <= cfg.workspaceMax.array()).all();
    };
    if (!inWorkspace(graspNow.translation) || !inWorkspace(graspDemo.translation))
        throw OutOfWorkspace("grasp pose outside the configured workspace");

    RearrangePlan plan;
    const bool degenerate =
        translationDistance(currentObjPose, demoObjPose) < 1e-12 &&
        rotationDistance(currentObjPose.rotation, demoObjPose.rotation) < 1e-12;

    auto lifted = [&](const Pose& p) {
        Pose out = p;
        out.translation.z() += cfg.liftHeight;
        return out;
    };

    if (degenerate) {
        plan.noOp = true;
        plan.waypoints = {{lifted(graspNow), GripperState::Open},
                          {graspNow, GripperState::Open},
                          {graspNow, GripperState::Closed},
                          {graspNow, GripperState::Open},
                          {lifted(graspNow), GripperState::Open}};
        return plan;
    }

    plan.waypoints = {{lifted(graspNow), GripperState::Open},
                      {graspNow, GripperState::Open},
                      {graspNow, GripperState::Closed},
                      {lifted(graspNow), GripperState::Closed},
                      {lifted(graspDemo), GripperState::Closed},
                      {graspDemo, GripperState::Closed},
                      {graspDemo, GripperState::Open},
                      {lifted(graspDemo), GripperState::Open}};
    return plan;
}

double trapezoidDuration(double distance, double vMax, double aMax) {
    if (distance <= 0.0) return 0.0;
    const double accelDist = vMax * vMax / aMax; // accel + decel ramps combined
    if (distance <= accelDist) return 2.0 * std::sqrt(distance / aMax); // triangular
    return 2.0 * vMax / aMax + (distance - accelDist) / vMax;
}

double trapezoidPosition(double t, double duration, double vLimit, double aLimit) {
    if (duration <= 0.0) return 1.0;
    t = std::clamp(t, 0.0, duration);
    const double rampTime = std::min(vLimit / aLimit, 0.5 * duration);
    const double peak = aLimit * rampTime; // actual cruise speed (may be < vLimit)
    if (t < rampTime) return 0.5 * aLimit * t * t;
    if (t < duration - rampTime)
        return 0.5 * aLimit * rampTime * rampTime + peak * (t - rampTime);
    const double tail = duration - t;
    return 1.0 - 0.5 * aLimit * tail * tail;
}

namespace {

void appendSegmentSamples(std::vector<TimedWaypoint>& out, const Pose& from, const Pose& to,
                          GripperState gripper, const MotionLimits& limits, double dt,
                          double& clock) {
    const double dTrans = (to.translation - from.translation).norm();
    Eigen::Vector3d rotVec = Eigen::Vector3d::Zero();
    if (rotationDistance(from.rotation, to.rotation) > 1e-15)
        rotVec = toVector(Pose{from.rotation.transpose() * to.rotation,
                               Eigen::Vector3d::Zero(), 0})
                     .axisAngle;
    const double dRot = rotVec.norm();
    const bool dwell = dTrans < 1e-12 && dRot < 1e-12;

    // Normalized profile limited so both translation and rotation obey their
    // caps: s in [0, 1], speed <= vLim, accel <= aLim.
    double vLim = std::numeric_limits<double>::infinity();
    double aLim = std::numeric_limits<double>::infinity();
    if (dTrans > 0.0) {
        vLim = std::min(vLim, limits.vMax / dTrans);
        aLim = std::min(aLim, limits.aMax / dTrans);
    }
    if (dRot > 0.0) {
        vLim = std::min(vLim, limits.omegaMax / dRot);
        aLim = std::min(aLim, limits.alphaMax / dRot);
    }
    const double duration = dwell ? dt : trapezoidDuration(1.0, vLim, aLim);

    const int samples = std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-9)));
    for (int k = 1; k <= samples; ++k) {
        const double t = std::min(duration, k * dt);
        const double s = dwell ? 1.0 : trapezoidPosition(t, duration, vLim, aLim);
        TimedWaypoint wp;
        wp.t = clock + t;
        wp.gripper = gripper;
        wp.eePose.translation = from.translation + s * (to.translation - from.translation);
        wp.eePose.rotation = from.rotation * rodrigues(s * rotVec);
        out.push_back(wp);
    }
    clock += duration;
}

} // namespace

std::vector<TimedWaypoint> timeParameterizeArm(const std::vector<GripperWaypoint>& waypoints,
                                               const MotionLimits& limits, double dt,
                                               double startTime) {
    if (waypoints.size() < 2) throw ConfigError("time parametrization needs >= 2 waypoints");
    if (limits.vMax <= 0 || limits.aMax <= 0 || limits.omegaMax <= 0 || limits.alphaMax <= 0)
        throw ConfigError("motion limits must be positive");

    std::vector<TimedWaypoint> out;
    double clock = startTime;
    out.push_back({clock, waypoints.front().pose, waypoints.front().gripper});
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        // The gripper state of the target waypoint applies over the segment.
        appendSegmentSamples(out, waypoints[i - 1].pose, waypoints[i].pose,
                             waypoints[i].gripper, limits, dt, clock);
    }
    return out;
}

CoordinatedTrajectory timeParameterize(
    const std::vector<std::vector<GripperWaypoint>>& armASlots,
    const std::vector<std::vector<GripperWaypoint>>& armBSlots, const MotionLimits& limits,
    const Pose& bottleneckRef, double dt) {
    CoordinatedTrajectory traj;
    traj.bottleneckRef = bottleneckRef;
    const std::size_t slots = std::max(armASlots.size(), armBSlots.size());

    std::array<double, 2> clock{0.0, 0.0};
    std::array<const std::vector<std::vector<GripperWaypoint>>*, 2> arms{&armASlots, &armBSlots};
    std::array<Pose, 2> lastPose;
    std::array<GripperState, 2> lastGrip{GripperState::Open, GripperState::Open};
    for (int a = 0; a < 2; ++a) {
        if (!arms[a]->empty() && !arms[a]->front().empty()) {
            lastPose[a] = arms[a]->front().front().pose;
            lastGrip[a] = arms[a]->front().front().gripper;
        }
        traj.perArm[a].push_back({0.0, lastPose[a], lastGrip[a]});
    }

    for (std::size_t slot = 0; slot < slots; ++slot) {
        // First pass: each arm runs its slot independently to find durations.
        std::array<std::vector<TimedWaypoint>, 2> segment;
        std::array<double, 2> end{clock[0], clock[1]};
        for (int a = 0; a < 2; ++a) {
            if (slot >= arms[a]->size() || (*arms[a])[slot].empty()) continue;
            double c = clock[a];
            std::vector<TimedWaypoint> samples;
            const auto& wps = (*arms[a])[slot];
            Pose from = lastPose[a];
            for (const auto& wp : wps) {
                appendSegmentSamples(samples, from, wp.pose, wp.gripper, limits, dt, c);
                from = wp.pose;
            }
            segment[a] = std::move(samples);
            end[a] = c;
        }
        // Barrier: both arms leave the slot together; the faster one dwells.
        const double barrier = std::max(end[0], end[1]);
        for (int a = 0; a < 2; ++a) {
            for (const auto& wp : segment[a]) traj.perArm[a].push_back(wp);
            if (!segment[a].empty()) {
                lastPose[a] = segment[a].back().eePose;
                lastGrip[a] = segment[a].back().gripper;
            }
            double c = std::max(end[a], clock[a]);
            while (c + 1e-12 < barrier) {
                c = std::min(barrier, c + dt);
                traj.perArm[a].push_back({c, lastPose[a], lastGrip[a]});
            }
            clock[a] = barrier;
        }
    }
    return traj;
}

void setArmPose(WorldState& world, int arm, const Pose& pose) {
    if (arm == 0)
        world.eePose = pose;
    else
        world.secondEePose = pose;
    if (world.attachedGraspOffset && world.attachedArm == arm)
        world.objectPose = compose(pose, *world.attachedGraspOffset);
}

ExecutionResult executePlan(WorldState& world, const CoordinatedTrajectory& plan,
                            ExecutionMode mode, const std::array<Pose, 2>& demoFinalRelative,
                            const std::optional<Pose>& graspInObject,
                            const ExecutionConfig& cfg) {
    if (mode == ExecutionMode::JointReplay) {
        if (translationDistance(world.objectPose, world.demoObjectPose) >
                cfg.replayPreconditionT ||
            rotationDistance(world.objectPose.rotation, world.demoObjectPose.rotation) >
                cfg.replayPreconditionR)
            throw PreconditionViolated(
                "joint replay requires the object restored to its demo pose");
    }

    ExecutionResult result;
    std::array<GripperState, 2> grip{GripperState::Open, GripperState::Open};
    std::array<std::size_t, 2> cursor{0, 0};

    // Merge the two timelines, advancing both arms in lock-step.
    while (cursor[0] < plan.perArm[0].size() || cursor[1] < plan.perArm[1].size()) {
        double tNext = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 2; ++a)
            if (cursor[a] < plan.perArm[a].size())
                tNext = std::min(tNext, plan.perArm[a][cursor[a]].t);

        for (int a = 0; a < 2; ++a) {
            while (cursor[a] < plan.perArm[a].size() &&
                   plan.perArm[a][cursor[a]].t <= tNext + 1e-12) {
                const TimedWaypoint& wp = plan.perArm[a][cursor[a]];
                setArmPose(world, a, wp.eePose);
                const Pose armPose = a == 0 ? world.eePose : world.secondEePose;

                if (wp.gripper == GripperState::Closed && grip[a] == GripperState::Open &&
                    graspInObject && !world.attachedGraspOffset) {
                    const Pose graspWorld = compose(world.objectPose, *graspInObject);
                    if (translationDistance(armPose, graspWorld) <= cfg.attachDistance) {
                        world.attachedGraspOffset = compose(inverse(armPose), world.objectPose);
                        world.attachedArm = a;
                    }
                }
                if (wp.gripper == GripperState::Open && grip[a] == GripperState::Closed &&
                    world.attachedGraspOffset && world.attachedArm == a) {
                    world.attachedGraspOffset.reset();
                    world.attachedArm = -1;
                }
                grip[a] = wp.gripper;
                ++cursor[a];
            }
        }
        result.relativeTrace.push_back(
            {compose(inverse(world.objectPose), world.eePose),
             compose(inverse(world.objectPose), world.secondEePose)});
    }

    const std::array<Pose, 2> finalRel = result.relativeTrace.empty()
                                             ? std::array<Pose, 2>{Pose{}, Pose{}}
                                             : result.relativeTrace.back();
    result.success = true;
    for (int a = 0; a < 2; ++a) {
        result.finalRelErrT[a] =
            (finalRel[a].translation - demoFinalRelative[a].translation).norm();
        result.finalRelErrR[a] =
            rotationDistance(finalRel[a].rotation, demoFinalRelative[a].rotation);
        if (result.finalRelErrT[a] > cfg.successThreshT ||
            result.finalRelErrR[a] > cfg.successThreshR)
            result.success = false;
    }
    return result;
}

} // namespace servosim
