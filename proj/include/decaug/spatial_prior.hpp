#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "decaug/annotations.hpp"
#include "decaug/gmm.hpp"
#include "decaug/kmeans.hpp"
#include "decaug/pose.hpp"
#include "decaug/rng.hpp"

namespace decaug {

inline constexpr int kDefaultAtomicPoses = 42;
inline constexpr int kPriorFormatVersion = 1;

/// One (pose, normalized offset) observation for an interaction.
struct PriorSample {
    InteractionId interaction;
    PoseFeature pose;
    Vec2 offset;  // normalized frame
};

/// Mixture over normalized offsets for one interaction. Component j is anchored to
/// pose_centroids[j].
struct InteractionPrior {
    std::vector<Gaussian2> components;
    std::vector<PoseFeature> pose_centroids;
    std::vector<int> atomic_pose;  // source cluster per component, -1 for the pooled fallback
    std::size_t n_samples = 0;
    std::vector<double> log_likelihood;  // EM trace; not serialized
};

struct SpatialPriorSet {
    int version = kPriorFormatVersion;
    std::vector<PoseFeature> atomic_poses;
    /// Bandwidth of the pose kernel exp(-d²/temperature): K-means distortion of the
    /// training poses. Zero means hard nearest-centroid assignment.
    double temperature = 0.0;
    std::map<InteractionId, InteractionPrior> interactions;
    std::vector<InteractionId> skipped;  // interactions with no usable sample

    const InteractionPrior& at(InteractionId h) const {
        auto it = interactions.find(h);
        if (it == interactions.end()) throw MissingPrior("no spatial prior for interaction " + std::to_string(h.value));
        return it->second;
    }
};

struct PriorConfig {
    int n_atomic = kDefaultAtomicPoses;
    int kmeans_max_iterations = 100;
    double kmeans_tolerance = 1e-6;
    EmOptions em;
    std::uint64_t seed = 0;
};

/// Usable triplets: an object is present and the human pose normalizes.
inline std::vector<PriorSample> collect_samples(const Dataset& ds) {
    std::vector<PriorSample> out;
    for (const auto& t : ds.triplets) {
        if (!t.object_id) continue;
        const Instance* h = ds.find_instance(t.human_id);
        const Instance* o = ds.find_instance(*t.object_id);
        if (!h || !o) continue;
        auto pose = normalize_pose(*h);
        if (!pose) continue;
        const Vec2 center{o->bbox.center_x(), o->bbox.center_y()};
        out.push_back({t.interaction_id, pose_feature(*pose), pose->to_normalized(center)});
    }
    return out;
}

namespace detail {

inline Gaussian2 moments(std::span<const Vec2> pts, double weight, double reg) {
    Gaussian2 g;
    g.weight = weight;
    for (const auto& p : pts) g.mean = g.mean + p;
    g.mean = g.mean / static_cast<double>(pts.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        const double dx = p.x - g.mean.x, dy = p.y - g.mean.y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double n = static_cast<double>(pts.size());
    g.cov = {sxx / n + reg, sxy / n, syy / n + reg};
    return g;
}

inline PoseFeature mean_pose(std::span<const PoseFeature> poses) {
    PoseFeature m;
    m.valid.fill(true);
    for (int j = 0; j < kNumKeypoints; ++j) {
        double sx = 0, sy = 0;
        int c = 0;
        for (const auto& p : poses)
            if (p.valid[j]) {
                sx += p.values[2 * j];
                sy += p.values[2 * j + 1];
                ++c;
            }
        if (c > 0) {
            m.values[2 * j] = sx / c;
            m.values[2 * j + 1] = sy / c;
        }
    }
    return m;
}

}  // namespace detail

/// Cluster all poses into atomic poses, then per interaction seed one Gaussian per
/// atomic pose from its hard-assigned offsets and refine with EM. Clusters with fewer
/// than two samples are pooled into one component initialised from the interaction's
/// global moments. `interactions` lists ids to report as skipped when they have no sample.
inline SpatialPriorSet fit_prior(std::span<const PriorSample> samples, const PriorConfig& cfg,
                                 std::span<const InteractionId> interactions = {}) {
    SpatialPriorSet set;
    for (InteractionId h : interactions) {
        const bool any = std::any_of(samples.begin(), samples.end(), [h](const auto& s) { return s.interaction == h; });
        if (!any) set.skipped.push_back(h);
    }
    if (samples.empty()) return set;

    std::vector<PoseFeature> poses;
    poses.reserve(samples.size());
    for (const auto& s : samples) poses.push_back(s.pose);
    Rng rng = seeded_rng(cfg.seed);
    KMeansOptions km{static_cast<std::size_t>(std::max(cfg.n_atomic, 1)), cfg.kmeans_max_iterations, cfg.kmeans_tolerance};
    PoseClustering clusters = cluster_poses(poses, km, rng);
    set.atomic_poses = clusters.centroids;
    set.temperature = clusters.distortion;

    std::map<InteractionId, std::vector<std::size_t>> by_interaction;
    for (std::size_t i = 0; i < samples.size(); ++i) by_interaction[samples[i].interaction].push_back(i);

    for (const auto& [h, members] : by_interaction) {
        std::vector<Vec2> offsets;
        for (std::size_t i : members) offsets.push_back(samples[i].offset);
        const double n = static_cast<double>(members.size());

        std::map<int, std::vector<std::size_t>> groups;
        for (std::size_t i : members) groups[clusters.assignment[i]].push_back(i);

        InteractionPrior prior;
        prior.n_samples = members.size();
        std::vector<Gaussian2> init;
        std::vector<std::size_t> pooled;
        for (const auto& [j, g] : groups) {
            if (g.size() < 2) {
                pooled.insert(pooled.end(), g.begin(), g.end());
                continue;
            }
            std::vector<Vec2> pts;
            for (std::size_t i : g) pts.push_back(samples[i].offset);
            init.push_back(detail::moments(pts, static_cast<double>(g.size()) / n, cfg.em.regularization));
            prior.pose_centroids.push_back(clusters.centroids[static_cast<std::size_t>(j)]);
            prior.atomic_pose.push_back(j);
        }
        if (!pooled.empty()) {
            init.push_back(detail::moments(offsets, static_cast<double>(pooled.size()) / n, cfg.em.regularization));
            std::vector<PoseFeature> pp;
            for (std::size_t i : pooled) pp.push_back(samples[i].pose);
            prior.pose_centroids.push_back(detail::mean_pose(pp));
            prior.atomic_pose.push_back(-1);
        }

        EmResult em = fit_gmm_em(offsets, init, cfg.em);
        // EM may drop starved components; keep anchors aligned with the survivors.
        std::vector<PoseFeature> centroids;
        std::vector<int> atomic;
        for (std::size_t j : em.origin) {
            centroids.push_back(prior.pose_centroids[j]);
            atomic.push_back(prior.atomic_pose[j]);
        }
        prior.pose_centroids = std::move(centroids);
        prior.atomic_pose = std::move(atomic);
        prior.components = std::move(em.components);
        prior.log_likelihood = std::move(em.log_likelihood);
        set.interactions.emplace(h, std::move(prior));
    }
    return set;
}

inline SpatialPriorSet fit_prior(const Dataset& ds, const PriorConfig& cfg) {
    auto samples = collect_samples(ds);
    std::vector<InteractionId> ids;
    for (const auto& [id, name] : ds.interactions) ids.push_back(id);
    return fit_prior(samples, cfg, ids);
}

/// Pool samples from several datasets (e.g. a target set plus a larger auxiliary one).
inline SpatialPriorSet fit_prior(std::span<const Dataset* const> datasets, const PriorConfig& cfg) {
    std::vector<PriorSample> samples;
    std::vector<InteractionId> ids;
    for (const Dataset* ds : datasets) {
        auto s = collect_samples(*ds);
        samples.insert(samples.end(), s.begin(), s.end());
        for (const auto& [id, name] : ds->interactions)
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return fit_prior(samples, cfg, ids);
}

// ---------------------------------------------------------------------------------
// Conditional sampling

/// Pose-conditioned component probabilities: pi_j ∝ w_j · exp(-d_j² / temperature),
/// d_j the masked pose distance to the component's anchor.
inline std::vector<double> component_probabilities(const InteractionPrior& prior, const PoseFeature& pose,
                                                   double temperature) {
    const std::size_t k = prior.components.size();
    std::vector<double> d2(k);
    for (std::size_t j = 0; j < k; ++j) d2[j] = masked_sq_distance(pose, prior.pose_centroids[j]);
    std::vector<double> logp(k, -std::numeric_limits<double>::infinity());
    if (temperature > 0.0) {
        for (std::size_t j = 0; j < k; ++j)
            if (std::isfinite(d2[j])) logp[j] = std::log(prior.components[j].weight) - d2[j] / temperature;
    } else {
        const double best = *std::min_element(d2.begin(), d2.end());
        for (std::size_t j = 0; j < k; ++j)
            if (d2[j] == best) logp[j] = std::log(prior.components[j].weight);
    }
    const double lse = log_sum_exp(logp);
    std::vector<double> p(k);
    if (!std::isfinite(lse)) {
        // No usable pose information: fall back to the mixture weights.
        for (std::size_t j = 0; j < k; ++j) p[j] = prior.components[j].weight;
        return p;
    }
    for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(logp[j] - lse);
    return p;
}

struct OffsetDraw {
    OffsetVector offset;  // normalized frame
    std::size_t component = 0;
};

inline std::size_t draw_index(std::span<const double> probs, Rng& rng) {
    double u = uniform01(rng);
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (u < probs[j]) return j;
        u -= probs[j];
    }
    for (std::size_t j = probs.size(); j-- > 0;)
        if (probs[j] > 0.0) return j;
    return 0;
}

inline OffsetDraw sample_offset(const SpatialPriorSet& priors, InteractionId h, const NormalizedPose& pose, Rng& rng) {
    const InteractionPrior& prior = priors.at(h);
    if (prior.components.empty()) throw MissingPrior("empty prior for interaction " + std::to_string(h.value));
    const auto probs = component_probabilities(prior, pose_feature(pose), priors.temperature);
    const std::size_t j = draw_index(probs, rng);
    return {{prior.components[j].sample(rng), OffsetFrame::Normalized}, j};
}

/// Density of the pose-conditioned mixture over the image grid (pixel centres),
/// normalised to sum to 1. Row-major, width * height.
inline std::vector<double> probability_map(const SpatialPriorSet& priors, InteractionId h, const Instance& human,
                                           int width, int height) {
    const InteractionPrior& prior = priors.at(h);
    if (!human.keypoints) throw Unnormalizable("human " + std::to_string(human.id.value) + " has no keypoints");
    auto pose = normalize_pose(*human.keypoints, image_diagonal(width, height));
    if (!pose) throw Unnormalizable("human " + std::to_string(human.id.value) + " has no normalizable torso");
    const auto probs = component_probabilities(prior, pose_feature(*pose), priors.temperature);

    std::vector<double> logd(static_cast<std::size_t>(width) * height);
    std::vector<double> terms(prior.components.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Vec2 v = pose->to_normalized({x + 0.5, y + 0.5});
            for (std::size_t j = 0; j < terms.size(); ++j)
                terms[j] = probs[j] > 0 ? std::log(probs[j]) + prior.components[j].log_pdf(v)
                                        : -std::numeric_limits<double>::infinity();
            const double l = log_sum_exp(terms);
            logd[static_cast<std::size_t>(y) * width + x] = l;
            peak = std::max(peak, l);
        }
    double total = 0.0;
    for (double& v : logd) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : logd) v /= total;
    return logd;
}

// ---------------------------------------------------------------------------------
// priors.json

namespace detail {
inline nlohmann::json pose_to_json(const PoseFeature& p) {
    auto a = nlohmann::json::array();
    for (double v : p.values) a.push_back(v);
    return a;
}
inline PoseFeature pose_from_json(const nlohmann::json& a) {
    auto v = a.get<std::vector<double>>();
    if (v.size() != kPoseDims) throw SchemaError("pose centroid must have 34 values");
    PoseFeature p;
    std::copy(v.begin(), v.end(), p.values.begin());
    p.valid.fill(true);
    return p;
}
}  // namespace detail

inline nlohmann::json priors_to_json(const SpatialPriorSet& set) {
    nlohmann::json root;
    root["version"] = set.version;
    root["n_atomic"] = set.atomic_poses.size();
    root["temperature"] = set.temperature;
    root["pose_centroids"] = nlohmann::json::array();
    for (const auto& p : set.atomic_poses) root["pose_centroids"].push_back(detail::pose_to_json(p));
    root["interactions"] = nlohmann::json::array();
    for (const auto& [h, prior] : set.interactions) {
        nlohmann::json e;
        e["interaction_id"] = h.value;
        e["n_samples"] = prior.n_samples;
        e["components"] = nlohmann::json::array();
        for (std::size_t j = 0; j < prior.components.size(); ++j) {
            const auto& g = prior.components[j];
            e["components"].push_back({{"weight", g.weight},
                                        {"mean", {g.mean.x, g.mean.y}},
                                        {"cov", {{g.cov.xx, g.cov.xy}, {g.cov.xy, g.cov.yy}}},
                                        {"atomic_pose", prior.atomic_pose[j]},
                                        {"pose_centroid", detail::pose_to_json(prior.pose_centroids[j])}});
        }
        root["interactions"].push_back(std::move(e));
    }
    root["skipped"] = nlohmann::json::array();
    for (auto h : set.skipped) root["skipped"].push_back(h.value);
    return root;
}

inline std::string priors_text(const SpatialPriorSet& set) { return priors_to_json(set).dump(1) + "\n"; }

/// Parse and validate priors.json (weights on the simplex, covariances positive definite).
inline SpatialPriorSet priors_from_json(const nlohmann::json& root) {
    try {
        SpatialPriorSet set;
        set.version = root.at("version").get<int>();
        if (set.version != kPriorFormatVersion)
            throw SchemaError("unsupported priors version " + std::to_string(set.version));
        set.temperature = root.at("temperature").get<double>();
        for (const auto& p : root.at("pose_centroids")) set.atomic_poses.push_back(detail::pose_from_json(p));
        for (const auto& e : root.at("interactions")) {
            InteractionId h(e.at("interaction_id").get<std::int64_t>());
            InteractionPrior prior;
            prior.n_samples = e.at("n_samples").get<std::size_t>();
            double wsum = 0.0;
            for (const auto& c : e.at("components")) {
                Gaussian2 g;
                g.weight = c.at("weight").get<double>();
                auto m = c.at("mean").get<std::vector<double>>();
                auto cov = c.at("cov").get<std::vector<std::vector<double>>>();
                if (m.size() != 2 || cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2)
                    throw SchemaError("component mean/cov have the wrong shape");
                g.mean = {m[0], m[1]};
                g.cov = {cov[0][0], cov[0][1], cov[1][1]};
                if (cov[0][1] != cov[1][0]) throw SchemaError("covariance is not symmetric");
                if (!cholesky(g.cov)) throw SchemaError("covariance is not positive definite");
                if (!(g.weight >= 0.0)) throw SchemaError("negative component weight");
                wsum += g.weight;
                prior.components.push_back(g);
                prior.atomic_pose.push_back(c.at("atomic_pose").get<int>());
                prior.pose_centroids.push_back(detail::pose_from_json(c.at("pose_centroid")));
            }
            if (prior.components.empty() || std::abs(wsum - 1.0) > 1e-9)
                throw SchemaError("interaction " + std::to_string(h.value) + " weights do not sum to 1");
            set.interactions.emplace(h, std::move(prior));
        }
        for (const auto& s : root.value("skipped", nlohmann::json::array()))
            set.skipped.emplace_back(s.get<std::int64_t>());
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("priors: ") + e.what());
    }
}

inline SpatialPriorSet load_priors(const std::filesystem::path& path) {
    auto bytes = io::read_file(path);
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return priors_from_json(root);
}

inline void save_priors(const SpatialPriorSet& set, const std::filesystem::path& path) {
    io::write_file(path, priors_text(set));
}

}  // namespace decaug
