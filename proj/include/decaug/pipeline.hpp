#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "decaug/annotations.hpp"
#include "decaug/candidate_selection.hpp"
#include "decaug/compositing.hpp"
#include "decaug/mask_algebra.hpp"
#include "decaug/morphology.hpp"
#include "decaug/pose.hpp"
#include "decaug/rng.hpp"
#include "decaug/spatial_prior.hpp"

namespace decaug {

struct AugmentationConfig {
    double augment_probability = 0.5;
    double interlock_threshold = kDefaultInterlockThreshold;
    int contour_width = kDefaultContourWidth;
    int candidate_pool = kDefaultCandidatePool;
    int feather = kDefaultFeather;
    int inpaint_radius = kDefaultInpaintRadius;
    int gsc_max_resamples = 10;
    std::uint64_t seed = 0;
    bool enable_loa = true;
    bool enable_gsc = true;

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(augment_probability)) throw std::invalid_argument("augment probability must lie in [0, 1]");
        if (!unit(interlock_threshold)) throw std::invalid_argument("interlock threshold must lie in [0, 1]");
        if (candidate_pool < 1) throw std::invalid_argument("candidate pool must be >= 1");
        if (contour_width < 1) throw std::invalid_argument("contour width must be >= 1");
        if (feather < 0 || inpaint_radius < 1 || gsc_max_resamples < 0)
            throw std::invalid_argument("feather >= 0, inpaint radius >= 1, resamples >= 0 required");
    }
};

/// Thread-safe image loader with a small LRU cache. `preload` pins images in memory.
class ImageStore {
public:
    explicit ImageStore(std::size_t capacity = 64) : capacity_(capacity) {}

    std::shared_ptr<const RgbImage> get(const ImageRecord& rec) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = pinned_.find(rec.id); it != pinned_.end()) return it->second;
            if (auto it = cache_.find(rec.id); it != cache_.end()) {
                order_.splice(order_.begin(), order_, it->second.second);
                return it->second.first;
            }
        }
        auto img = std::make_shared<const RgbImage>(io::load_image(rec.uri));
        if (img->width != rec.width || img->height != rec.height)
            throw GeometryError(rec.uri.string() + ": decoded size differs from the annotation");
        std::lock_guard lock(mutex_);
        if (capacity_ == 0) return img;
        if (cache_.size() >= capacity_) {
            cache_.erase(order_.back());
            order_.pop_back();
        }
        order_.push_front(rec.id);
        cache_[rec.id] = {img, order_.begin()};
        return img;
    }

    void preload(const ImageRecord& rec, RgbImage image) {
        std::lock_guard lock(mutex_);
        pinned_[rec.id] = std::make_shared<const RgbImage>(std::move(image));
    }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<ImageId, std::shared_ptr<const RgbImage>> pinned_;
    mutable std::list<ImageId> order_;
    mutable std::unordered_map<ImageId, std::pair<std::shared_ptr<const RgbImage>, std::list<ImageId>::iterator>> cache_;
};

/// Immutable inputs shared by every augmentation call.
struct AugmentContext {
    const Dataset* pool = nullptr;             // replacement candidates come from here
    const CategoryIndex* index = nullptr;      // built over `pool`
    const SpatialPriorSet* priors = nullptr;   // null disables relocation
    const ImageStore* images = nullptr;        // pixels of pool images
    AugmentationConfig cfg;
};

namespace detail {

inline nlohmann::json skip(const char* step, InstanceId object, const char* reason) {
    return {{"step", step}, {"object", object.value}, {"skipped", reason}};
}

inline std::size_t find_index(const std::vector<Instance>& v, InstanceId id) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i].id == id) return i;
    return v.size();
}

inline void replace_objects(AugmentedSample& s, const AugmentContext& ctx, Rng& rng, nlohmann::json& steps) {
    const auto& cfg = ctx.cfg;
    InterlockTable table(s.instances, cfg.contour_width);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = i + 1; j < table.size(); ++j)
            if (table.at(i, j).exceeds_unit())
                steps.push_back({{"step", "interlock"},
                                 {"warning", "U > V"},
                                 {"pair", {s.instances[i].id.value, s.instances[j].id.value}},
                                 {"u", table.at(i, j).u},
                                 {"v", table.at(i, j).v}});

    std::set<InstanceId> in_triplet;
    for (const auto& t : s.triplets)
        if (t.object_id) in_triplet.insert(*t.object_id);

    for (InstanceId id : replaceable_set(table, s.instances, cfg.interlock_threshold)) {
        if (!in_triplet.contains(id)) continue;
        const std::size_t ti = find_index(s.instances, id);
        Instance& target = s.instances[ti];
        const ObjectStateMatrix state = state_matrix(target, s.instances);
        const auto drawn = sample_candidates(*ctx.index, target.category_id, id, cfg.candidate_pool, rng);
        std::vector<std::pair<InstanceId, const ObjectStateMatrix*>> scored;
        for (InstanceId c : drawn)
            if (const auto* e = ctx.index->find(c)) scored.emplace_back(c, &e->state);
        auto best = best_candidate(state, scored);
        if (!best) {
            steps.push_back(skip("loa", id, "no_candidates"));
            continue;
        }
        const Instance* cand = ctx.pool->find_instance(best->id);
        const ImageRecord* cand_rec = cand ? ctx.pool->find_image(cand->image_id) : nullptr;
        if (!cand_rec) {
            steps.push_back(skip("loa", id, "candidate_unresolved"));
            continue;
        }
        std::shared_ptr<const RgbImage> cand_img;
        try {
            cand_img = ctx.images->get(*cand_rec);
        } catch (const Error&) {
            steps.push_back(skip("loa", id, "candidate_image_unavailable"));
            continue;
        }

        const Box site = target.bbox;
        RgbaPatch patch = resize_patch(extract_instance(*cand_img, cand->mask, cfg.feather), site.w, site.h);
        BitMask new_mask(target.mask.width(), target.mask.height());
        for (int y = 0; y < site.h; ++y)
            for (int x = 0; x < site.w; ++x)
                if (patch.alpha_at(x, y) > 0.5f) new_mask.set(site.x + x, site.y + y);
        auto new_box = new_mask.bounds();
        if (!new_box) {
            steps.push_back(skip("loa", id, "degenerate_replacement"));
            continue;
        }
        s.image = inpaint_hole(s.image, morph::dilate(target.mask, 1), cfg.inpaint_radius);
        composite_into(s.image, patch, site.x, site.y);
        target.mask = std::move(new_mask);
        target.bbox = *new_box;
        steps.push_back({{"step", "loa"},
                         {"object", id.value},
                         {"replacement", best->id.value},
                         {"state_distance", best->distance},
                         {"candidates", drawn.size()}});
    }
}

inline void relocate_objects(AugmentedSample& s, const AugmentContext& ctx, Rng& rng, nlohmann::json& steps) {
    const auto& cfg = ctx.cfg;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < s.triplets.size(); ++i)
        if (s.triplets[i].object_id) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s.triplets[a].interaction_id < s.triplets[b].interaction_id;
    });

    std::set<InstanceId> handled;
    for (std::size_t ti : order) {
        const HoiTriplet& t = s.triplets[ti];
        const InstanceId oid = *t.object_id;
        if (!handled.insert(oid).second) {
            steps.push_back(skip("gsc", oid, "already_placed"));
            continue;
        }
        if (!ctx.priors || !ctx.priors->interactions.contains(t.interaction_id)) {
            steps.push_back(skip("gsc", oid, "missing_prior"));
            continue;
        }
        const std::size_t hi = find_index(s.instances, t.human_id);
        const std::size_t oi = find_index(s.instances, oid);
        auto pose = normalize_pose(s.instances[hi]);
        if (!pose) {
            steps.push_back(skip("gsc", oid, "unnormalizable"));
            continue;
        }
        Instance& obj = s.instances[oi];
        const Box box = obj.bbox;
        std::optional<Box> placed;
        OffsetDraw draw;
        Vec2 center;
        int attempts = 0;
        for (; attempts <= cfg.gsc_max_resamples && !placed; ++attempts) {
            draw = sample_offset(*ctx.priors, t.interaction_id, *pose, rng);
            center = pose->to_pixels(draw.offset.v);
            const double fx = center.x - 0.5 * box.w, fy = center.y - 0.5 * box.h;
            if (!std::isfinite(fx) || !std::isfinite(fy) || std::abs(fx) > 1e9 || std::abs(fy) > 1e9) continue;
            Box cand{static_cast<int>(std::lround(fx)), static_cast<int>(std::lround(fy)), box.w, box.h};
            if (cand.inside(s.image.width, s.image.height)) placed = cand;
        }
        if (!placed) {
            steps.push_back(skip("gsc", oid, "out_of_bounds"));
            continue;
        }
        const int dx = placed->x - box.x, dy = placed->y - box.y;
        RgbaPatch patch = extract_instance(s.image, obj.mask, cfg.feather);
        s.image = inpaint_hole(s.image, morph::dilate(obj.mask, 1), cfg.inpaint_radius);
        composite_into(s.image, patch, placed->x, placed->y);
        obj.mask = obj.mask.translated(dx, dy);
        obj.bbox = *placed;
        steps.push_back({{"step", "gsc"},
                         {"object", oid.value},
                         {"human", t.human_id.value},
                         {"interaction", t.interaction_id.value},
                         {"component", draw.component},
                         {"offset", {draw.offset.v.x, draw.offset.v.y}},
                         {"center", {center.x, center.y}},
                         {"shift", {dx, dy}},
                         {"attempts", attempts}});
    }
}

}  // namespace detail

/// Augment one image: a single coin flip gates both strategies; object replacement
/// runs first, then relocation moves the (possibly replaced) pixels. Per-object
/// failures are recorded in the provenance and never abort the sample.
inline AugmentedSample augment_sample(const ImageRecord& rec, const RgbImage& image, std::vector<Instance> instances,
                                      std::vector<HoiTriplet> triplets, const AugmentContext& ctx, Rng& rng,
                                      const std::map<CategoryId, std::string>& categories = {},
                                      const std::map<InteractionId, std::string>& interactions = {}) {
    if (image.width != rec.width || image.height != rec.height)
        throw GeometryError("image " + std::to_string(rec.id.value) + " pixels do not match its annotation size");
    AugmentedSample s;
    s.image_record = rec;
    s.image = image;
    s.instances = std::move(instances);
    s.triplets = std::move(triplets);
    s.categories = categories;
    s.interactions = interactions;
    nlohmann::json steps = nlohmann::json::array();

    const bool augment = uniform01(rng) < ctx.cfg.augment_probability;
    if (augment) {
        if (ctx.cfg.enable_loa && ctx.index && ctx.pool && ctx.images) detail::replace_objects(s, ctx, rng, steps);
        if (ctx.cfg.enable_gsc) detail::relocate_objects(s, ctx, rng, steps);
    }
    s.provenance = {{"image_id", rec.id.value}, {"augmented", augment}, {"steps", std::move(steps)}};
    return s;
}

/// Convenience overload pulling annotations for `rec` out of a dataset.
inline AugmentedSample augment_sample(const Dataset& ds, const ImageRecord& rec, const RgbImage& image,
                                      const AugmentContext& ctx, Rng& rng) {
    std::vector<Instance> instances;
    for (std::size_t i : ds.instances_of(rec.id)) instances.push_back(ds.instances[i]);
    std::vector<HoiTriplet> triplets;
    for (std::size_t i : ds.triplets_of(rec.id)) triplets.push_back(ds.triplets[i]);
    return augment_sample(rec, image, std::move(instances), std::move(triplets), ctx, rng, ds.categories,
                          ds.interactions);
}

// ---------------------------------------------------------------------------------
// Batch execution

struct AugmentReport {
    std::size_t images = 0;
    std::size_t augmented = 0;
    std::map<std::string, std::size_t> applied;                        // step -> count
    std::map<std::string, std::map<std::string, std::size_t>> skipped;  // step -> reason -> count
    std::vector<double> latency_ms;                                     // per image, I/O excluded

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["images"] = images;
        j["augmented"] = augmented;
        j["applied"] = applied;
        j["skipped"] = skipped;
        nlohmann::json lat;
        if (!latency_ms.empty()) {
            auto sorted = latency_ms;
            std::sort(sorted.begin(), sorted.end());
            double sum = 0;
            for (double v : sorted) sum += v;
            lat["mean"] = sum / sorted.size();
            lat["median"] = sorted[sorted.size() / 2];
            lat["max"] = sorted.back();
        }
        j["latency_ms"] = lat;
        return j;
    }

    void add(const AugmentedSample& s, double ms) {
        ++images;
        if (s.provenance.value("augmented", false)) ++augmented;
        for (const auto& step : s.provenance["steps"]) {
            const std::string name = step.value("step", "");
            if (step.contains("skipped")) ++skipped[name][step["skipped"].get<std::string>()];
            else if (!step.contains("warning")) ++applied[name];
        }
        latency_ms.push_back(ms);
    }
};

/// Augment every image of `ds` and write the results to `out_dir`. Each image draws
/// from its own stream keyed by (seed, image id), so output is independent of `workers`.
inline AugmentReport augment_dataset(const Dataset& ds, const AugmentContext& ctx, const std::filesystem::path& out_dir,
                                     int workers = 1) {
    ctx.cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create directory " + out_dir.string());

    const std::size_t n = ds.images.size();
    std::vector<double> latency(n, 0.0);
    std::vector<nlohmann::json> provenance(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                const ImageRecord& rec = ds.images[i];
                auto pixels = ctx.images->get(rec);
                Rng rng = image_rng(ctx.cfg.seed, rec.id);
                const auto t0 = std::chrono::steady_clock::now();
                AugmentedSample s = augment_sample(ds, rec, *pixels, ctx, rng);
                const auto t1 = std::chrono::steady_clock::now();
                latency[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
                provenance[i] = s.provenance;
                save_augmented(s, out_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    AugmentReport report;
    for (std::size_t i = 0; i < n; ++i) {
        AugmentedSample shell;
        shell.provenance = provenance[i];
        report.add(shell, latency[i]);
    }
    return report;
}

// ---------------------------------------------------------------------------------
// In-process engine (for language bindings and dataloaders)

/// Immutable bundle of (pool dataset, index, priors, config). `augment` is const and
/// safe to call concurrently; every call is deterministic given its seed.
class Engine {
public:
    Engine(Dataset pool, SpatialPriorSet priors, AugmentationConfig cfg, std::optional<CategoryIndex> index = std::nullopt)
        : pool_(std::make_shared<const Dataset>(std::move(pool))),
          priors_(std::make_shared<const SpatialPriorSet>(std::move(priors))),
          images_(std::make_shared<ImageStore>()),
          cfg_(cfg) {
        cfg_.validate();
        index_ = std::make_shared<const CategoryIndex>(index ? std::move(*index) : build_index(*pool_));
    }

    const AugmentationConfig& config() const { return cfg_; }
    const Dataset& pool() const { return *pool_; }
    const CategoryIndex& index() const { return *index_; }
    const SpatialPriorSet& priors() const { return *priors_; }
    ImageStore& images() const { return *images_; }

    AugmentContext context() const { return {pool_.get(), index_.get(), priors_.get(), images_.get(), cfg_}; }

    /// Augment a single encoded image described by a one-image coco-hoi-json fragment.
    /// Returns the PNG bytes and the output fragment, byte-identical to what the
    /// batch path writes for the same image and seed.
    std::pair<std::vector<std::uint8_t>, std::string> augment(std::span<const std::uint8_t> image_bytes,
                                                              std::string_view fragment, std::uint64_t seed) const {
        Dataset ds = parse_dataset(fragment, {});
        if (ds.images.size() != 1) throw SchemaError("fragment must describe exactly one image");
        RgbImage image = io::decode_image(image_bytes);
        AugmentContext ctx = context();
        ctx.cfg.seed = seed;
        Rng rng = image_rng(seed, ds.images[0].id);
        AugmentedSample s = augment_sample(ds, ds.images[0], image, ctx, rng);
        return {io::encode_png(s.image), fragment_text(s)};
    }

private:
    std::shared_ptr<const Dataset> pool_;
    std::shared_ptr<const SpatialPriorSet> priors_;
    std::shared_ptr<const CategoryIndex> index_;
    std::shared_ptr<ImageStore> images_;
    AugmentationConfig cfg_;
};

}  // namespace decaug
