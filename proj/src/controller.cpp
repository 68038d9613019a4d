#include "servosim/controller.hpp"

#include <cmath>

namespace servosim {

namespace {

std::uint64_t mixSeed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int trailingCount(const std::vector<std::pair<double, double>>& hist, double threshT,
                  double threshR) {
    int count = 0;
    for (auto it = hist.rbegin(); it != hist.rend(); ++it) {
        if (it->first < threshT && it->second < threshR)
            ++count;
        else
            break;
    }
    return count;
}

int trailingCount(const std::vector<double>& hist, double thresh) {
    int count = 0;
    for (auto it = hist.rbegin(); it != hist.rend(); ++it) {
        if (*it < thresh)
            ++count;
        else
            break;
    }
    return count;
}

Matrix6d diagCov(double sigmaRot, double sigmaTrans) {
    Matrix6d m = Matrix6d::Zero();
    m.diagonal().head<3>().setConstant(sigmaRot * sigmaRot);
    m.diagonal().tail<3>().setConstant(sigmaTrans * sigmaTrans);
    return m;
}

Matrix6d measurementCov(const RobustPoseResult& fit, const ControllerConfig& cfg) {
    const double countScale = std::sqrt(static_cast<double>(cfg.measMatchCountRef) /
                                        static_cast<double>(std::max(fit.inlierCount, 1)));
    const double residScale = std::max(1.0, fit.meanInlierResidual / cfg.measResidualRefM);
    const double s = std::max(1.0, countScale) * residScale;
    return diagCov(cfg.measBaseSigmaRotRad * s, cfg.measBaseSigmaTransM * s);
}

} // namespace

std::string stagePhaseName(StagePhase phase) {
    switch (phase) {
        case StagePhase::Stage1: return "stage1";
        case StagePhase::Stage2: return "stage2";
        case StagePhase::Stage3: return "stage3";
        case StagePhase::Converged: return "converged";
        case StagePhase::Reinitializing: return "reinitializing";
    }
    return "unknown";
}

VelocityCommand stageLaw12(const PoseVector6& eeVec, const PoseVector6& target, double gain) {
    VelocityCommand cmd;
    cmd.linear = -gain * (eeVec.translation - target.translation);
    cmd.angular = -gain * (eeVec.axisAngle - target.axisAngle);
    return cmd;
}

VelocityCommand stageLaw3(const TaskError25D& e, const ControllerConfig& cfg,
                          const Pose& calibWrist, const ReferencePoint& ref) {
    const double depth = e.rho * ref.zStar;
    if (depth < 1e-3) throw DegenerateDepth("reconstructed reference depth below 1 mm");

    const Eigen::Vector3d omegaCam = -cfg.lambdaR * e.rotational;
    const Eigen::Vector3d rhoM = e.extended + ref.mStar;
    const Eigen::Vector3d vCam =
        ref.zStar * (cfg.lambdaT * e.extended - omegaCam.cross(rhoM));

    VelocityCommand eeFrame;
    eeFrame.angular = calibWrist.rotation * omegaCam;
    eeFrame.linear = calibWrist.rotation * vCam - eeFrame.angular.cross(calibWrist.translation);
    return eeFrame;
}

VelocityCommand twistToRobotFrame(const VelocityCommand& eeFrame, const Pose& eePose) {
    VelocityCommand out;
    out.linear = eePose.rotation * eeFrame.linear;
    out.angular = eePose.rotation * eeFrame.angular;
    return out;
}

StagePhase checkTransition(StagePhase phase, const TransitionTelemetry& telemetry,
                           const ControllerConfig& cfg) {
    if (telemetry.displacementFlag) return StagePhase::Reinitializing;
    switch (phase) {
        case StagePhase::Stage1: {
            const bool varianceOk = (telemetry.variance.array() <
                                     cfg.varianceThresh.array()).all();
            if (telemetry.matchCount >= cfg.matchCountThresh && varianceOk)
                return StagePhase::Stage2;
            return StagePhase::Stage1;
        }
        case StagePhase::Stage2: {
            if (trailingCount(telemetry.posteriorDeltaHistory, cfg.overlapDeltaThreshT,
                              cfg.overlapDeltaThreshR) >= cfg.overlapHoldSteps)
                return StagePhase::Stage3;
            return StagePhase::Stage2;
        }
        case StagePhase::Stage3: {
            if (trailingCount(telemetry.taskErrorHistory, cfg.convergenceThresh) >=
                cfg.overlapHoldSteps)
                return StagePhase::Converged;
            return StagePhase::Stage3;
        }
        case StagePhase::Reinitializing: return StagePhase::Stage1;
        case StagePhase::Converged: return StagePhase::Converged;
    }
    return phase;
}

bool bidirectionalActive(StagePhase phase, const std::vector<double>& taskErrorHistory,
                         const ControllerConfig& cfg) {
    if (phase != StagePhase::Stage3 || taskErrorHistory.empty()) return false;
    return taskErrorHistory.back() < cfg.bidirFilterThresh;
}

EpisodeResult runEpisode(EpisodeInputs in, const ControllerConfig& cfg) {
    WorldState& world = in.world;
    const double dt = 1.0 / cfg.controlRateHz;
    const ObservationConfig obsCfg{in.scenario.occlusionFraction,
                                   in.scenario.maskErosionFraction};
    const std::uint64_t seed = in.scenario.seed;
    const Matrix6d priorCov = diagCov(cfg.priorSigmaRotRad, cfg.priorSigmaTransM);
    const Matrix6d processCov = diagCov(cfg.processSigmaRotRad, cfg.processSigmaTransM);

    EpisodeResult result;

    auto queryPrior = [&](int step) -> std::optional<PoseVector6> {
        FeatureObservations cur = observe(world, in.globalRig, obsCfg);
        CorrespondenceSet m = generateMatches(in.demo.globalBottleneck, cur, in.noise,
                                              mixSeed(seed, 0x1100 + step));
        // The live segmentation masks both sides of the global view.
        m = filterMask(m, MaskSide::Bidirectional, in.demo.globalBottleneck, cur);
        std::vector<Eigen::Vector3d> demoCloud, curCloud;
        std::vector<double> weights;
        for (const auto& c : m) {
            if (c.depthA <= 0.0 || c.depthB <= 0.0) continue;
            demoCloud.push_back(backproject(in.globalRig.intrinsics, c.pixA, c.depthA));
            curCloud.push_back(backproject(in.globalRig.intrinsics, c.pixB, c.depthB));
            weights.push_back(c.weight);
        }
        try {
            return globalPrior(demoCloud, curCloud, weights, in.globalRig.calibExtrinsic,
                               in.demo.demoBottleneck, cfg.prior, mixSeed(seed, 0x1200 + step));
        } catch (const PriorUnavailable&) {
            return std::nullopt;
        } catch (const AngleAtPi&) {
            return std::nullopt;
        }
    };

    StagePhase phase = StagePhase::Stage1;
    std::optional<PoseVector6> prior;
    std::optional<BeliefState> belief;
    VarianceWindow varWin;
    TransitionTelemetry tel;
    std::optional<HomographySolution> prevSolution;
    std::optional<ReferencePoint> refPoint;
    int lostStreak = 0;
    int parkedStreak = 0;
    int noPriorStreak = 0;
    int openLoopHold = 0;

    for (int step = 0; step < cfg.stepBudget; ++step) {
        if (in.displaceAtStep && step == in.displaceAtStep->first)
            displaceObject(world, in.displaceAtStep->second);

        if (world.displacementFlag && phase != StagePhase::Reinitializing) {
            world.displacementFlag = false;
            phase = StagePhase::Reinitializing;
            ++result.reinits;
            TraceStep ts;
            ts.step = step;
            ts.phase = phase;
            ts.eePose = world.eePose;
            result.trace.push_back(ts);
            stepRobot(world, VelocityCommand{}, dt, cfg.limits);
            ++result.steps;
            continue;
        }
        if (phase == StagePhase::Reinitializing) {
            prior.reset();
            belief.reset();
            varWin = VarianceWindow{};
            tel = TransitionTelemetry{};
            prevSolution.reset();
            refPoint.reset();
            lostStreak = parkedStreak = noPriorStreak = 0;
            phase = StagePhase::Stage1;
        }

        TraceStep ts;
        ts.step = step;
        ts.eePose = world.eePose;
        VelocityCommand cmd;

        if (cfg.mode == ControllerMode::OpenLoopOnly) {
            if (!prior) {
                prior = queryPrior(step);
                if (!prior && ++noPriorStreak > 30)
                    throw PriorUnavailable("object never registered by the global camera");
            }
            if (prior) {
                const PoseVector6 eeVec = toVector(world.eePose);
                cmd = stageLaw12(eeVec, *prior, cfg.lambda1);
                const Pose target = fromVector(*prior);
                const bool parked =
                    (eeVec.translation - prior->translation).norm() < 1e-3 &&
                    rotationDistance(world.eePose.rotation, target.rotation) < 0.2 * M_PI / 180;
                openLoopHold = parked ? openLoopHold + 1 : 0;
                if (openLoopHold >= cfg.overlapHoldSteps) phase = StagePhase::Converged;
            }
            ts.phase = phase;
            ts.command = cmd;
            result.trace.push_back(ts);
            if (phase == StagePhase::Converged) {
                result.converged = true;
                break;
            }
            ++result.stage1Steps;
            stepRobot(world, cmd, dt, cfg.limits);
            ++result.steps;
            continue;
        }

        // Wrist view, simulated matching, mask filtering.
        FeatureObservations wristObs = observe(world, in.wristRig, obsCfg);
        CorrespondenceSet matches = generateMatches(in.demo.wristBottleneck, wristObs, in.noise,
                                                    mixSeed(seed, 0x2100 + step));
        const bool bidir = bidirectionalActive(phase, tel.taskErrorHistory, cfg);
        CorrespondenceSet filtered =
            filterMask(matches, bidir ? MaskSide::Bidirectional : MaskSide::Unidirectional,
                       in.demo.wristBottleneck, wristObs);
        tel.matchCount = static_cast<int>(filtered.size());
        ts.matchCount = tel.matchCount;
        ts.bidirectionalActive = bidir;

        std::optional<RobustPoseResult> wristFit;
        std::optional<PoseVector6> wristEst;
        if (phase != StagePhase::Stage3 &&
            tel.matchCount >= cfg.wristRansac.minMatches) {
            try {
                wristFit = robustKabsch(filtered, wristObs.intrinsics, wristObs.intrinsics,
                                        cfg.wristRansac, mixSeed(seed, 0x2200 + step));
                wristEst = wristMeasurement(inverse(wristFit->pose), world.eePose,
                                            in.wristRig.calibExtrinsic);
            } catch (const Error&) {
            }
        }
        if (wristEst) varWin = pushVariance(varWin, *wristEst);

        switch (phase) {
            case StagePhase::Stage1: {
                if (!prior) {
                    prior = queryPrior(step);
                    if (!prior && ++noPriorStreak > 30)
                        throw PriorUnavailable("object never registered by the global camera");
                }
                if (prior) {
                    const PoseVector6 eeVec = toVector(world.eePose);
                    cmd = stageLaw12(eeVec, *prior, cfg.lambda1);
                    ts.estimate = prior;
                    // Parked at the prior but the wrist never stabilizes: the
                    // prior draw was unlucky, ask the global camera again.
                    const bool parked =
                        (eeVec.translation - prior->translation).norm() < 2e-3 &&
                        (eeVec.axisAngle - prior->axisAngle).norm() < 0.5 * M_PI / 180;
                    parkedStreak = parked ? parkedStreak + 1 : 0;
                    if (parkedStreak > cfg.stage1RequeryPatience) {
                        prior.reset();
                        parkedStreak = 0;
                    }
                }
                break;
            }
            case StagePhase::Stage2: {
                if (!belief && prior) belief = ukfInit(*prior, priorCov);
                if (belief && wristEst && wristFit) {
                    try {
                        belief = ukfStep(*belief, *wristEst, measurementCov(*wristFit, cfg),
                                         processCov, cfg.ukf);
                    } catch (const Error&) {
                    }
                }
                if (belief) {
                    cmd = stageLaw12(toVector(world.eePose), belief->mean, cfg.lambda2);
                    ts.estimate = belief->mean;
                    const Pose target = fromVector(belief->mean);
                    const Pose deltaCam = compose(
                        inverse(in.wristRig.calibExtrinsic),
                        compose(compose(inverse(world.eePose), target),
                                in.wristRig.calibExtrinsic));
                    tel.posteriorDeltaHistory.emplace_back(deltaCam.translation.norm(),
                                                           rotationAngle(deltaCam.rotation));
                    ts.posteriorDeltaT = tel.posteriorDeltaHistory.back().first;
                    ts.posteriorDeltaR = tel.posteriorDeltaHistory.back().second;
                }
                lostStreak = wristEst ? 0 : lostStreak + 1;
                break;
            }
            case StagePhase::Stage3: {
                try {
                    HomographyResult hres = estimateHomography(
                        filtered, wristObs.intrinsics, cfg.homography,
                        mixSeed(seed, 0x3100 + step));
                    std::vector<Eigen::Vector3d> refs;
                    refs.reserve(hres.inliers.size());
                    for (const auto& inl : hres.inliers) refs.push_back(inl.mStar);
                    const auto solutions = decomposeHomography(hres.h, refs);
                    const HomographySolution sel = selectSolution(solutions, prevSolution);
                    prevSolution = sel;
                    auto [taskErr, ref] = buildTaskError(hres.h, hres.inliers, sel, refPoint);
                    refPoint = ref;
                    tel.taskErrorHistory.push_back(taskErr.norm());
                    ts.taskErrorNorm = taskErr.norm();
                    cmd = twistToRobotFrame(stageLaw3(taskErr, cfg, in.wristRig.calibExtrinsic,
                                                      *refPoint),
                                            world.eePose);
                    lostStreak = 0;
                } catch (const Error&) {
                    ++lostStreak;
                }
                break;
            }
            case StagePhase::Converged:
            case StagePhase::Reinitializing: break;
        }

        if (phase != StagePhase::Stage1 && lostStreak > cfg.lostTrackPatience) {
            phase = StagePhase::Reinitializing;
            ++result.reinits;
            ts.phase = phase;
            ts.command = VelocityCommand{};
            result.trace.push_back(ts);
            stepRobot(world, VelocityCommand{}, dt, cfg.limits);
            ++result.steps;
            continue;
        }

        ts.phase = phase;
        ts.command = cmd;
        if (!ts.estimate && wristEst) ts.estimate = wristEst;
        result.trace.push_back(ts);

        switch (phase) {
            case StagePhase::Stage1: ++result.stage1Steps; break;
            case StagePhase::Stage2: ++result.stage2Steps; break;
            case StagePhase::Stage3: ++result.stage3Steps; break;
            default: break;
        }

        stepRobot(world, cmd, dt, cfg.limits);
        ++result.steps;

        tel.variance = varWin.perComponentVariance;
        tel.displacementFlag = false;
        StagePhase next = checkTransition(phase, tel, cfg);
        if (cfg.mode == ControllerMode::StopAtStage2 && next == StagePhase::Stage3)
            next = StagePhase::Converged;
        if (next == StagePhase::Stage2 && phase == StagePhase::Stage1 && prior)
            belief = ukfInit(*prior, priorCov);
        if (next == StagePhase::Stage3 && phase == StagePhase::Stage2) {
            prevSolution.reset();
            refPoint.reset();
            tel.taskErrorHistory.clear();
        }
        if (next == StagePhase::Converged) {
            result.converged = true;
            TraceStep done;
            done.step = step + 1;
            done.phase = StagePhase::Converged;
            done.eePose = world.eePose;
            done.matchCount = tel.matchCount;
            if (!tel.taskErrorHistory.empty()) done.taskErrorNorm = tel.taskErrorHistory.back();
            result.trace.push_back(done);
            break;
        }
        phase = next;
    }

    const Pose truth = trueBottleneck(world);
    result.finalErrT = (world.eePose.translation - truth.translation).norm();
    result.finalErrR = rotationDistance(world.eePose.rotation, truth.rotation);
    result.success = result.converged && result.finalErrT <= cfg.successThreshT &&
                     result.finalErrR <= cfg.successThreshR;
    if (!result.converged) result.failureReason = "step budget exceeded";
    return result;
}

} // namespace servosim
