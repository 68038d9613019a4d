#pragma once

#include <cstdint>
#include <vector>

#include "servosim/scene.hpp"

namespace servosim {

struct Correspondence {
    int idA = 0, idB = 0;
    Eigen::Vector2d pixA = Eigen::Vector2d::Zero();
    Eigen::Vector2d pixB = Eigen::Vector2d::Zero();
    double depthA = 0.0, depthB = 0.0; // meters
    double weight = 1.0;               // [0, 1]
    bool isInlierTruth = false;        // test-only ground truth
};

using CorrespondenceSet = std::vector<Correspondence>;

// Piecewise-linear error multiplier over a combined viewpoint offset. Anchors
// are (offset u, multiplier); u = max(trans / transRef, rot / rotRef). The
// multiplier is non-decreasing in both offsets by construction.
struct ViewpointScaling {
    double transRefM = 0.15;              // offset that saturates translation-wise
    double rotRefRad = 75.0 * M_PI / 180; // offset that saturates rotation-wise
    std::vector<double> anchorsU{0.0, 0.35, 1.0};
    std::vector<double> anchorsScale{1.0, 8.0, 32.0};

    double scale(double transOffsetM, double rotOffsetRad) const;
};

// Error model of the simulated matcher. Two layers:
//  - per-match pixel/depth noise (spread within one frame),
//  - a per-frame correlated pose bias applied to the current-side points
//    (systematic matcher error; what dominates estimator-level statistics).
// Defaults are fitted so robust pose estimates at the bottleneck reproduce the
// SIFT+LG static-state errors (0.5 cm / 1.3 deg); see the bench-metrics grid.
// The inverse calibration from pose error back to these sigmas is a fitted
// choice, not a measured one.
struct NoiseModel {
    double pixelSigma = 1.2;      // px, per match
    double depthSigmaRel = 0.004; // fraction of depth, per match
    double outlierFraction = 0.08;
    double dropoutFraction = 0.15;
    double biasSigmaTransM = 0.0031;              // per-frame pose bias, translation
    double biasSigmaRotRad = 0.8 * M_PI / 180.0;  // per-frame pose bias, rotation
    ViewpointScaling viewpointScaling;

    NoiseModel scaled(double factor) const;
    static NoiseModel zero();
};

// Generates 2D-2D correspondences between a stored bottleneck observation and
// a current observation. Deterministic per seed. Candidates are features seen
// in both sets; dropoutFraction withheld; outlierFraction re-targeted to random
// visible features (object or distractor). Weights are informative but jittered.
CorrespondenceSet generateMatches(const FeatureObservations& bottleneckObs,
                                  const FeatureObservations& currentObs,
                                  const NoiseModel& noise, std::uint64_t rngSeed);

enum class MaskSide { Unidirectional, Bidirectional };

// Discards matches outside the segmentation masks. Unidirectional filters on
// the bottleneck side only; bidirectional on both. Order preserved.
CorrespondenceSet filterMask(const CorrespondenceSet& matches, MaskSide maskSide,
                             const FeatureObservations& bottleneckMask,
                             const FeatureObservations& currentMask);

} // namespace servosim
