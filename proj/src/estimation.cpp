#include "servosim/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace servosim {

namespace {

int adaptiveIterations(double inlierRatio, int sampleSize, double confidence, int cap) {
    if (inlierRatio <= 0.0) return cap;
    const double wS = std::pow(inlierRatio, sampleSize);
    if (wS >= 1.0 - 1e-12) return 1;
    const double n = std::log(1.0 - confidence) / std::log(1.0 - wS);
    if (!std::isfinite(n)) return cap;
    return std::clamp(static_cast<int>(std::ceil(n)), 1, cap);
}

bool sampleDistinct(std::mt19937_64& rng, std::size_t n, int k, std::vector<int>& out) {
    if (n < static_cast<std::size_t>(k)) return false;
    out.clear();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (static_cast<int>(out.size()) < k) {
        const int idx = static_cast<int>(pick(rng));
        if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
    }
    return true;
}

bool collinear(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    return (b - a).cross(c - a).norm() < 1e-12;
}

} // namespace

Pose weightedKabsch(const std::vector<Eigen::Vector3d>& ptsA,
                    const std::vector<Eigen::Vector3d>& ptsB,
                    const std::vector<double>& weights) {
    if (ptsA.size() != ptsB.size() || ptsA.size() != weights.size())
        throw TooFewPoints("point/weight list size mismatch");
    if (ptsA.size() < 3) throw TooFewPoints("weighted Kabsch needs at least 3 points");

    const double wSum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (wSum <= 1e-15) throw DegenerateConfiguration("all weights are zero");

    Eigen::Vector3d centA = Eigen::Vector3d::Zero(), centB = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < ptsA.size(); ++i) {
        centA += weights[i] * ptsA[i];
        centB += weights[i] * ptsB[i];
    }
    centA /= wSum;
    centB /= wSum;

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < ptsA.size(); ++i)
        cross += weights[i] * (ptsA[i] - centA) * (ptsB[i] - centB).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    // Collinear (or worse) weighted point sets leave the rotation unconstrained.
    if (sv(1) <= 1e-9 * std::max(sv(0), 1e-30))
        throw DegenerateConfiguration("weighted covariance rank < 2");

    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

    Pose p;
    p.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    p.translation = centB - p.rotation * centA;
    return p;
}

RobustPoseResult ransacKabsch(const std::vector<Eigen::Vector3d>& ptsA,
                              const std::vector<Eigen::Vector3d>& ptsB,
                              const std::vector<double>& weights, const RansacConfig& cfg,
                              std::uint64_t seed) {
    const std::size_t n = ptsA.size();
    if (ptsB.size() != n || weights.size() != n)
        throw InsufficientMatches("correspondence list size mismatch");
    if (n < static_cast<std::size_t>(std::max(cfg.minMatches, 3)))
        throw InsufficientMatches("fewer matches than cfg.minMatches");

    std::mt19937_64 rng(seed ^ 0x853c49e6748fea9bull);
    const double tau2 = cfg.inlierDistM * cfg.inlierDistM;

    double bestScore = std::numeric_limits<double>::max();
    Pose bestPose;
    int bestInliers = 0;
    bool anyModel = false;

    int iterations = cfg.maxIterations;
    std::vector<int> sample;
    std::vector<Eigen::Vector3d> sa(3), sb(3);
    const std::vector<double> unit(3, 1.0);

    int degenerateSamples = 0;
    for (int it = 0; it < iterations; ++it) {
        if (!sampleDistinct(rng, n, 3, sample)) break;
        if (collinear(ptsA[sample[0]], ptsA[sample[1]], ptsA[sample[2]])) {
            ++degenerateSamples;
            if (degenerateSamples > 3 * cfg.maxIterations) break;
            --it;
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            sa[k] = ptsA[sample[k]];
            sb[k] = ptsB[sample[k]];
        }
        Pose candidate;
        try {
            candidate = weightedKabsch(sa, sb, unit);
        } catch (const DegenerateConfiguration&) {
            continue;
        }

        // MSAC: inliers contribute their squared residual, outliers the cap.
        double score = 0.0;
        int inl = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r2 = (candidate.apply(ptsA[i]) - ptsB[i]).squaredNorm();
            if (r2 < tau2) {
                score += r2;
                ++inl;
            } else {
                score += tau2;
            }
        }
        if (score < bestScore) {
            bestScore = score;
            bestPose = candidate;
            bestInliers = inl;
            anyModel = true;
            iterations = std::min(
                iterations, it + 1 + adaptiveIterations(static_cast<double>(inl) /
                                                            static_cast<double>(n),
                                                        3, cfg.confidence, cfg.maxIterations));
        }
    }

    if (!anyModel) throw DegenerateConfiguration("no non-degenerate minimal sample found");
    if (bestInliers < cfg.minInliers) throw NoConsensus("best consensus below cfg.minInliers");

    RobustPoseResult result;
    result.inlierFlags.assign(n, false);
    std::vector<Eigen::Vector3d> ia, ib;
    std::vector<double> iw;
    for (std::size_t i = 0; i < n; ++i) {
        if ((bestPose.apply(ptsA[i]) - ptsB[i]).squaredNorm() < tau2) {
            result.inlierFlags[i] = true;
            ia.push_back(ptsA[i]);
            ib.push_back(ptsB[i]);
            iw.push_back(std::max(weights[i], 1e-6));
        }
    }
    result.pose = weightedKabsch(ia, ib, iw);

    // Re-evaluate support under the refit pose.
    result.inlierCount = 0;
    double residSum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (result.pose.apply(ptsA[i]) - ptsB[i]).norm();
        const bool in = r * r < tau2;
        result.inlierFlags[i] = in;
        if (in) {
            ++result.inlierCount;
            residSum += r;
        }
    }
    if (result.inlierCount < cfg.minInliers) throw NoConsensus("refit lost consensus");
    result.meanInlierResidual = residSum / static_cast<double>(result.inlierCount);
    return result;
}

RobustPoseResult robustKabsch(const CorrespondenceSet& matches,
                              const CameraIntrinsics& intrinsicsA,
                              const CameraIntrinsics& intrinsicsB, const RansacConfig& cfg,
                              std::uint64_t seed) {
    std::vector<Eigen::Vector3d> ptsA, ptsB;
    std::vector<double> weights;
    ptsA.reserve(matches.size());
    ptsB.reserve(matches.size());
    weights.reserve(matches.size());
    for (const auto& m : matches) {
        if (m.depthA <= 0.0 || m.depthB <= 0.0) continue;
        ptsA.push_back(backproject(intrinsicsA, m.pixA, m.depthA));
        ptsB.push_back(backproject(intrinsicsB, m.pixB, m.depthB));
        weights.push_back(m.weight);
    }
    return ransacKabsch(ptsA, ptsB, weights, cfg, seed);
}

namespace {

double associationRms(const std::vector<Eigen::Vector3d>& cloudA,
                      const std::vector<Eigen::Vector3d>& cloudB, const Pose& pose,
                      std::vector<int>* assoc = nullptr) {
    double sum = 0.0;
    if (assoc) assoc->assign(cloudA.size(), 0);
    for (std::size_t i = 0; i < cloudA.size(); ++i) {
        const Eigen::Vector3d p = pose.apply(cloudA[i]);
        double best = std::numeric_limits<double>::max();
        int bestJ = 0;
        for (std::size_t j = 0; j < cloudB.size(); ++j) {
            const double d2 = (p - cloudB[j]).squaredNorm();
            if (d2 < best) {
                best = d2;
                bestJ = static_cast<int>(j);
            }
        }
        sum += best;
        if (assoc) (*assoc)[i] = bestJ;
    }
    return std::sqrt(sum / static_cast<double>(cloudA.size()));
}

} // namespace

Pose icpRefine(const std::vector<Eigen::Vector3d>& cloudA,
               const std::vector<Eigen::Vector3d>& cloudB, const Pose& init,
               const IcpConfig& cfg) {
    if (cloudA.empty() || cloudB.empty()) throw EmptyCloud("icpRefine needs non-empty clouds");

    Pose best = init;
    std::vector<int> assoc;
    double bestRms = associationRms(cloudA, cloudB, best, &assoc);
    double prevRms = bestRms;

    std::vector<Eigen::Vector3d> targets(cloudA.size());
    const std::vector<double> unit(cloudA.size(), 1.0);
    Pose current = init;
    for (int it = 0; it < cfg.maxIters; ++it) {
        for (std::size_t i = 0; i < cloudA.size(); ++i) targets[i] = cloudB[assoc[i]];
        Pose updated;
        try {
            updated = weightedKabsch(cloudA, targets, unit);
        } catch (const DegenerateConfiguration&) {
            break;
        }
        const double rms = associationRms(cloudA, cloudB, updated, &assoc);
        current = updated;
        if (rms < bestRms) {
            bestRms = rms;
            best = updated;
        }
        if (prevRms - rms < cfg.relTol * std::max(prevRms, 1e-12)) break;
        prevRms = rms;
    }
    return best;
}

PoseVector6 globalPrior(const std::vector<Eigen::Vector3d>& demoObjCloud,
                        const std::vector<Eigen::Vector3d>& currentObjCloud,
                        const std::vector<double>& weights, const Pose& calibGlobal,
                        const Pose& demoBottleneck, const PriorConfig& cfg, std::uint64_t seed) {
    if (demoObjCloud.size() < static_cast<std::size_t>(cfg.minPoints) ||
        currentObjCloud.size() < static_cast<std::size_t>(cfg.minPoints))
        throw PriorUnavailable("too few points for the global prior");

    Pose delta;
    try {
        delta = ransacKabsch(demoObjCloud, currentObjCloud, weights, cfg.ransac, seed).pose;
    } catch (const Error& e) {
        throw PriorUnavailable(std::string("registration failed: ") + e.what());
    }
    delta = icpRefine(demoObjCloud, currentObjCloud, delta, cfg.icp);

    const Pose bottleneck = compose(
        compose(calibGlobal, delta), compose(inverse(calibGlobal), demoBottleneck));
    return toVector(bottleneck);
}

PoseVector6 wristMeasurement(const Pose& deltaWrist, const Pose& eePose, const Pose& calibWrist) {
    return toVector(
        compose(compose(eePose, calibWrist), compose(deltaWrist, inverse(calibWrist))));
}

// ---------------------------------------------------------------------------
// Homography estimation
// ---------------------------------------------------------------------------

namespace {

// Hartley-style conditioning: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d conditioningTransform(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double meanDist = 0.0;
    for (const auto& p : pts) meanDist += (p - centroid).norm();
    meanDist /= static_cast<double>(pts.size());
    const double s = meanDist > 1e-12 ? std::sqrt(2.0) / meanDist : 1.0;
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = s;
    t(1, 1) = s;
    t(0, 2) = -s * centroid.x();
    t(1, 2) = -s * centroid.y();
    return t;
}

// Direct linear transform on inhomogeneous normalized coordinates.
Eigen::Matrix3d dltHomography(const std::vector<Eigen::Vector2d>& a,
                              const std::vector<Eigen::Vector2d>& b) {
    const Eigen::Matrix3d ta = conditioningTransform(a);
    const Eigen::Matrix3d tb = conditioningTransform(b);

    const std::size_t n = a.size();
    Eigen::MatrixXd m(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d pa = ta * Eigen::Vector3d(a[i].x(), a[i].y(), 1.0);
        const Eigen::Vector3d pb = tb * Eigen::Vector3d(b[i].x(), b[i].y(), 1.0);
        m.row(2 * i) << 0, 0, 0, -pb.z() * pa.transpose(), pb.y() * pa.transpose();
        m.row(2 * i + 1) << pb.z() * pa.transpose(), 0, 0, 0, -pb.x() * pa.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
    Eigen::Matrix3d hm;
    hm << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return tb.inverse() * hm * ta;
}

double symmetricTransferErr2(const Eigen::Matrix3d& h, const Eigen::Matrix3d& hInv,
                             const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const Eigen::Vector3d fa = h * Eigen::Vector3d(a.x(), a.y(), 1.0);
    const Eigen::Vector3d fb = hInv * Eigen::Vector3d(b.x(), b.y(), 1.0);
    if (std::abs(fa.z()) < 1e-12 || std::abs(fb.z()) < 1e-12)
        return std::numeric_limits<double>::max();
    const double fwd = (fa.hnormalized() - b).squaredNorm();
    const double bwd = (fb.hnormalized() - a).squaredNorm();
    return 0.5 * (fwd + bwd);
}

bool degenerateQuad(const std::vector<Eigen::Vector2d>& p) {
    auto area = [](const Eigen::Vector2d& x, const Eigen::Vector2d& y, const Eigen::Vector2d& z) {
        return std::abs((y - x).x() * (z - x).y() - (y - x).y() * (z - x).x());
    };
    for (int skip = 0; skip < 4; ++skip) {
        Eigen::Vector2d q[3];
        int k = 0;
        for (int i = 0; i < 4; ++i)
            if (i != skip) q[k++] = p[i];
        if (area(q[0], q[1], q[2]) < 1e-10) return true;
    }
    return false;
}

} // namespace

Eigen::Matrix3d normalizeHomographyScale(const Eigen::Matrix3d& h) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h);
    Eigen::Matrix3d out = h / svd.singularValues()(1);
    if (out.determinant() < 0.0) out = -out;
    return out;
}

HomographyResult estimateHomography(const CorrespondenceSet& matches,
                                    const CameraIntrinsics& intrinsics,
                                    const HomographyConfig& cfg, std::uint64_t seed) {
    std::vector<Eigen::Vector2d> a, b;
    std::vector<double> depthsA;
    std::vector<std::size_t> sourceIdx;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const auto& m = matches[i];
        a.emplace_back(normalizedCoords(intrinsics, m.pixA).head<2>());
        b.emplace_back(normalizedCoords(intrinsics, m.pixB).head<2>());
        depthsA.push_back(m.depthA);
        sourceIdx.push_back(i);
    }
    const std::size_t n = a.size();
    if (n < static_cast<std::size_t>(std::max(cfg.minMatches, 4)))
        throw InsufficientMatches("fewer matches than cfg.minMatches for homography");

    std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
    const double tau = cfg.reprojThreshPx / intrinsics.fx;
    const double tau2 = tau * tau;

    double bestScore = std::numeric_limits<double>::max();
    Eigen::Matrix3d bestH = Eigen::Matrix3d::Identity();
    bool anyModel = false;
    int iterations = cfg.maxIterations;
    std::vector<int> sample;
    std::vector<Eigen::Vector2d> sa(4), sb(4);

    int degenerate = 0;
    for (int it = 0; it < iterations; ++it) {
        if (!sampleDistinct(rng, n, 4, sample)) break;
        for (int k = 0; k < 4; ++k) {
            sa[k] = a[sample[k]];
            sb[k] = b[sample[k]];
        }
        if (degenerateQuad(sa) || degenerateQuad(sb)) {
            // Collinear minimal sample: reject and resample.
            ++degenerate;
            if (degenerate > 3 * cfg.maxIterations) break;
            --it;
            continue;
        }
        const Eigen::Matrix3d h = dltHomography(sa, sb);
        if (std::abs(h.determinant()) < 1e-12) continue;
        const Eigen::Matrix3d hInv = h.inverse();

        double score = 0.0;
        int inl = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e2 = symmetricTransferErr2(h, hInv, a[i], b[i]);
            if (e2 < tau2) {
                score += e2;
                ++inl;
            } else {
                score += tau2;
            }
        }
        if (score < bestScore) {
            bestScore = score;
            bestH = h;
            anyModel = true;
            iterations = std::min(
                iterations, it + 1 + adaptiveIterations(static_cast<double>(inl) /
                                                            static_cast<double>(n),
                                                        4, cfg.confidence, cfg.maxIterations));
        }
    }
    if (!anyModel) throw DegenerateConfiguration("no valid homography sample found");

    // Refit on the consensus set, then score once more under the refit model.
    HomographyResult result;
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::Matrix3d hInv = bestH.inverse();
        std::vector<Eigen::Vector2d> ia, ib;
        result.inlierFlags.assign(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (symmetricTransferErr2(bestH, hInv, a[i], b[i]) < tau2) {
                result.inlierFlags[i] = true;
                ia.push_back(a[i]);
                ib.push_back(b[i]);
            }
        }
        if (ia.size() < 4) throw NoConsensus("homography consensus below minimal sample");
        if (pass == 0) bestH = dltHomography(ia, ib);
    }

    if (std::abs(bestH(2, 2)) < 1e-12) throw DegenerateConfiguration("homography h22 ~ 0");
    result.h.h = bestH / bestH(2, 2);

    const Eigen::Matrix3d hInv = result.h.h.inverse();
    for (std::size_t i = 0; i < n; ++i) {
        if (!result.inlierFlags[i]) continue;
        HomographyInlier inl;
        inl.mStar = {a[i].x(), a[i].y(), 1.0};
        inl.mCur = {b[i].x(), b[i].y(), 1.0};
        inl.depthStar = depthsA[i];
        inl.transferErr = std::sqrt(symmetricTransferErr2(result.h.h, hInv, a[i], b[i]));
        result.inliers.push_back(inl);
    }
    return result;
}

std::vector<HomographySolution> decomposeHomography(
    const Homography& h, const std::vector<Eigen::Vector3d>& referencePoints) {
    const Eigen::Matrix3d hn = normalizeHomographyScale(h.h);

    // Pure-rotation branch: H (scale-normalized) already is a rotation.
    {
        const Eigen::Matrix3d r = orthonormalized(hn);
        if ((hn - r).norm() < 1e-6) {
            HomographySolution sol;
            sol.rotation = r;
            sol.tScaled = Eigen::Vector3d::Zero();
            sol.normal = Eigen::Vector3d::UnitZ();
            sol.degenerateNormal = true;
            return {sol};
        }
    }

    // Faugeras SVD method on H = U diag(d1, 1, d3) V^T (d2 normalized to 1).
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(hn, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    // Work with proper rotations so the recomposed R is proper too.
    if (u.determinant() < 0.0) {
        u.col(2) *= -1.0;
        v.col(2) *= -1.0; // det(hn) > 0 means det(u)det(v) = +1: flip both
    } else if (v.determinant() < 0.0) {
        u.col(2) *= -1.0;
        v.col(2) *= -1.0;
    }
    const double d1 = svd.singularValues()(0);
    const double d2 = svd.singularValues()(1);
    const double d3 = svd.singularValues()(2);

    const double denom = d1 * d1 - d3 * d3;
    std::vector<HomographySolution> out;
    if (denom < 1e-15) return out; // numerically equal singular values, no parallax

    const double x1 = std::sqrt(std::max(0.0, (d1 * d1 - d2 * d2) / denom));
    const double x3 = std::sqrt(std::max(0.0, (d2 * d2 - d3 * d3) / denom));

    const double sinT = (d1 - d3) * x1 * x3 / d2;
    const double cosT = (d1 * x3 * x3 + d3 * x1 * x1) / d2;

    for (const double e1 : {1.0, -1.0}) {
        for (const double e3 : {1.0, -1.0}) {
            Eigen::Matrix3d rp = Eigen::Matrix3d::Identity();
            rp(0, 0) = cosT;
            rp(0, 2) = -e1 * e3 * sinT;
            rp(2, 0) = e1 * e3 * sinT;
            rp(2, 2) = cosT;

            HomographySolution sol;
            sol.rotation = u * rp * v.transpose();
            const Eigen::Vector3d np(e1 * x1, 0.0, e3 * x3);
            sol.normal = v * np;
            const Eigen::Vector3d tp = (d1 - d3) * Eigen::Vector3d(e1 * x1, 0.0, -e3 * x3);
            sol.tScaled = u * tp;

            // Keep only candidates that actually reconstruct hn.
            if ((sol.rotation + sol.tScaled * sol.normal.transpose() - hn).norm() > 1e-6 *
                    std::max(1.0, hn.norm()))
                continue;
            bool duplicate = false;
            for (const auto& prev : out) {
                if ((prev.rotation - sol.rotation).norm() < 1e-9 &&
                    (prev.normal - sol.normal).norm() < 1e-9)
                    duplicate = true;
            }
            if (!duplicate) out.push_back(sol);
        }
    }

    if (!referencePoints.empty()) {
        // Cheirality: reconstructed reference depth Z* = d*/(n.m*) must be
        // positive for every inlier reference point.
        std::vector<HomographySolution> kept;
        double bestWorst = -std::numeric_limits<double>::max();
        HomographySolution bestSol;
        for (const auto& sol : out) {
            double worst = std::numeric_limits<double>::max();
            for (const auto& m : referencePoints) worst = std::min(worst, sol.normal.dot(m));
            if (worst > 1e-9) kept.push_back(sol);
            if (worst > bestWorst) {
                bestWorst = worst;
                bestSol = sol;
            }
        }
        if (kept.empty() && !out.empty()) kept.push_back(bestSol);
        out = std::move(kept);
    }
    return out;
}

HomographySolution selectSolution(const std::vector<HomographySolution>& candidates,
                                  const std::optional<HomographySolution>& previous,
                                  const Eigen::Vector3d& initialNormalGuess) {
    if (candidates.empty()) throw DegenerateConfiguration("no homography solutions to select");

    auto lexLess = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        for (int i = 0; i < 3; ++i) {
            if (a[i] < b[i] - 1e-15) return true;
            if (a[i] > b[i] + 1e-15) return false;
        }
        return false;
    };

    auto keyOf = [&](const HomographySolution& c) {
        if (previous) return rotationDistance(previous->rotation, c.rotation);
        return c.degenerateNormal ? 0.0 : -c.normal.dot(initialNormalGuess);
    };

    const HomographySolution* best = &candidates.front();
    double bestKey = keyOf(*best);
    for (const auto& c : candidates) {
        if (&c == best) continue;
        const double key = keyOf(c);
        const double tie = rotationAngle(c.rotation);
        const double bestTie = rotationAngle(best->rotation);
        if (key < bestKey - 1e-12 ||
            (std::abs(key - bestKey) <= 1e-12 &&
             (tie < bestTie - 1e-12 ||
              (std::abs(tie - bestTie) <= 1e-12 && lexLess(c.normal, best->normal))))) {
            bestKey = key;
            best = &c;
        }
    }
    return *best;
}

std::pair<TaskError25D, ReferencePoint> buildTaskError(
    const Homography& h, const std::vector<HomographyInlier>& inliers,
    const HomographySolution& selected, const std::optional<ReferencePoint>& ref) {
    ReferencePoint chosen;
    if (ref && ref->zStar > 0.0) {
        chosen = *ref;
    } else {
        const HomographyInlier* best = nullptr;
        for (const auto& inl : inliers) {
            if (inl.depthStar <= 0.0) continue;
            if (!best || inl.transferErr < best->transferErr) best = &inl;
        }
        if (!best) throw NoValidDepth("no inlier with a valid bottleneck depth");
        chosen.mStar = best->mStar;
        chosen.mStar.z() = 1.0;
        chosen.zStar = best->depthStar;
    }

    const Eigen::Vector3d rhoM = h.h * chosen.mStar;

    TaskError25D e;
    e.extended = rhoM - chosen.mStar;
    e.rho = rhoM.z();
    // Rotation error of the camera relative to the reference view.
    e.rotational = toVector(Pose{selected.rotation.transpose(), Eigen::Vector3d::Zero(), 0})
                       .axisAngle;
    return {e, chosen};
}

} // namespace servosim
