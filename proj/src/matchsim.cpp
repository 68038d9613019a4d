#include "servosim/matchsim.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>

namespace servosim {

double ViewpointScaling::scale(double transOffsetM, double rotOffsetRad) const {
    const double u = std::max(std::abs(transOffsetM) / transRefM,
                              std::abs(rotOffsetRad) / rotRefRad);
    if (anchorsU.empty()) return 1.0;
    if (u <= anchorsU.front()) return anchorsScale.front();
    for (std::size_t i = 1; i < anchorsU.size(); ++i) {
        if (u <= anchorsU[i]) {
            const double f = (u - anchorsU[i - 1]) / (anchorsU[i] - anchorsU[i - 1]);
            return anchorsScale[i - 1] + f * (anchorsScale[i] - anchorsScale[i - 1]);
        }
    }
    return anchorsScale.back();
}

NoiseModel NoiseModel::scaled(double factor) const {
    NoiseModel m = *this;
    m.pixelSigma *= factor;
    m.depthSigmaRel *= factor;
    m.biasSigmaTransM *= factor;
    m.biasSigmaRotRad *= factor;
    if (factor == 0.0) {
        m.outlierFraction = 0.0;
        m.dropoutFraction = 0.0;
    }
    return m;
}

NoiseModel NoiseModel::zero() { return NoiseModel{}.scaled(0.0); }

CorrespondenceSet generateMatches(const FeatureObservations& bottleneckObs,
                                  const FeatureObservations& currentObs,
                                  const NoiseModel& noise, std::uint64_t rngSeed) {
    std::mt19937_64 rng(rngSeed ^ 0x2545f4914f6cdd1dull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    // Viewpoint offset between the two captures, relative to the object.
    const Pose rel = compose(inverse(bottleneckObs.cameraPoseInObject),
                             currentObs.cameraPoseInObject);
    const double scale = noise.viewpointScaling.scale(rel.translation.norm(),
                                                      rotationAngle(rel.rotation));

    // Per-frame correlated bias: a small pose applied to current-side points.
    Pose bias;
    {
        const Eigen::Vector3d rotVec(gauss(rng), gauss(rng), gauss(rng));
        const Eigen::Vector3d trans(gauss(rng), gauss(rng), gauss(rng));
        bias.rotation = rodrigues(rotVec * noise.biasSigmaRotRad * scale);
        bias.translation = trans * noise.biasSigmaTransM * scale;
    }

    std::unordered_map<int, const FeatureObservation*> currentById;
    currentById.reserve(currentObs.features.size());
    for (const auto& f : currentObs.features) currentById[f.id] = &f;

    const double pixSigma = noise.pixelSigma * scale;
    const double depthSigma = noise.depthSigmaRel * scale;

    auto noisyCurrent = [&](const FeatureObservation& f, double& outDepth) {
        Eigen::Vector3d p = backproject(currentObs.intrinsics, f.pixel, f.depth);
        p = bias.apply(p);
        Eigen::Vector2d pix = project(currentObs.intrinsics, p).pixel;
        pix.x() += gauss(rng) * pixSigma;
        pix.y() += gauss(rng) * pixSigma;
        outDepth = p.z() * (1.0 + gauss(rng) * depthSigma);
        return pix;
    };

    CorrespondenceSet out;
    out.reserve(bottleneckObs.features.size());
    for (const auto& fa : bottleneckObs.features) {
        auto it = currentById.find(fa.id);
        if (it == currentById.end()) continue;
        if (noise.dropoutFraction > 0.0 && uni01(rng) < noise.dropoutFraction) continue;

        Correspondence c;
        c.idA = fa.id;
        c.pixA = fa.pixel;
        c.depthA = fa.depth;

        const bool makeOutlier = noise.outlierFraction > 0.0 &&
                                 uni01(rng) < noise.outlierFraction &&
                                 currentObs.features.size() > 1;
        if (makeOutlier) {
            // Mismatch: re-target to a random other visible feature.
            const FeatureObservation* target = &currentObs.features[static_cast<std::size_t>(
                uni01(rng) * static_cast<double>(currentObs.features.size()))];
            if (target->id == fa.id)
                target = &currentObs.features[(static_cast<std::size_t>(target -
                                                                        currentObs.features.data()) +
                                               1) %
                                              currentObs.features.size()];
            c.idB = target->id;
            c.pixB = noisyCurrent(*target, c.depthB);
            c.isInlierTruth = false;
            c.weight = 0.05 + 0.55 * uni01(rng);
        } else {
            const FeatureObservation& fb = *it->second;
            c.idB = fb.id;
            c.pixB = noisyCurrent(fb, c.depthB);
            c.isInlierTruth = fa.id < 100000; // distractor self-matches do not support the object
            const double residual = pixSigma > 0.0
                                        ? (c.pixB - project(currentObs.intrinsics,
                                                            bias.apply(backproject(
                                                                currentObs.intrinsics, fb.pixel,
                                                                fb.depth)))
                                                        .pixel)
                                              .norm()
                                        : 0.0;
            double w = pixSigma > 0.0 ? std::exp(-residual * residual / (2.0 * pixSigma * pixSigma))
                                      : 1.0;
            if (pixSigma > 0.0) w = std::clamp(w + 0.1 * gauss(rng), 0.0, 1.0);
            c.weight = w;
        }
        out.push_back(c);
    }
    return out;
}

CorrespondenceSet filterMask(const CorrespondenceSet& matches, MaskSide maskSide,
                             const FeatureObservations& bottleneckMask,
                             const FeatureObservations& currentMask) {
    std::unordered_map<int, bool> inMaskA, inMaskB;
    inMaskA.reserve(bottleneckMask.features.size());
    for (const auto& f : bottleneckMask.features) inMaskA[f.id] = f.inMask;
    inMaskB.reserve(currentMask.features.size());
    for (const auto& f : currentMask.features) inMaskB[f.id] = f.inMask;

    CorrespondenceSet out;
    out.reserve(matches.size());
    for (const auto& m : matches) {
        auto a = inMaskA.find(m.idA);
        if (a == inMaskA.end() || !a->second) continue;
        if (maskSide == MaskSide::Bidirectional) {
            auto b = inMaskB.find(m.idB);
            if (b == inMaskB.end() || !b->second) continue;
        }
        out.push_back(m);
    }
    return out;
}

} // namespace servosim
