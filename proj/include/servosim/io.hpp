#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "servosim/controller.hpp"
#include "servosim/coordination.hpp"
#include "servosim/matchsim.hpp"
#include "servosim/scene.hpp"

namespace servosim {

using Json = nlohmann::json;

// Pose as {"rotation": [9, row-major], "translation": [3]}.
Json poseToJson(const Pose& p);
Pose poseFromJson(const Json& j);

Json noiseModelToJson(const NoiseModel& m);
NoiseModel noiseModelFromJson(const Json& j);

// Scenario config file: top-level keys {dofMode, maxZRotDeg, maxXYRotDeg,
// maxTranslationM, distractorCount, occlusionFraction, maskErosionFraction,
// calibErrorScale, matcherNoiseScale, seed} plus optional sub-objects
// "noise", "estimation", "fusion" and "controller". Round-trips bit-exactly.
Json scenarioConfigToJson(const ScenarioConfig& cfg);
ScenarioConfig scenarioConfigFromJson(const Json& j);

Json controllerConfigToJson(const ControllerConfig& cfg);
ControllerConfig controllerConfigFromJson(const Json& j);

Json demoTrajectoryToJson(const DemoTrajectory& demo);
DemoTrajectory demoTrajectoryFromJson(const Json& j);

// Episode trace: summary fields plus a per-step array of
// {step, phase, eePose, command, matchCount, taskError, estimates, filters}.
Json episodeResultToJson(const EpisodeResult& result);
EpisodeResult episodeResultFromJson(const Json& j);

void writeJsonFile(const std::string& path, const Json& j);
Json readJsonFile(const std::string& path);

// Full bundle read from a scenario/suite config file.
struct RunConfig {
    ScenarioConfig scenario;
    NoiseModel noise;
    ControllerConfig controller;
};

RunConfig runConfigFromJson(const Json& j);
Json runConfigToJson(const RunConfig& cfg);

} // namespace servosim
