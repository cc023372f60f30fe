#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "decaug/annotations.hpp"
#include "decaug/candidate_selection.hpp"
#include "decaug/mask_algebra.hpp"
#include "decaug/pipeline.hpp"
#include "decaug/spatial_prior.hpp"

namespace decaug::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Either an output file or `out`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
            if (!*file_) throw IoError("cannot write " + path);
        }
        stream_ = file_ ? file_.get() : &fallback;
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

inline void histogram(std::ostream& os, const std::vector<double>& values, int bins, double lo, double hi) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
    }
    os << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b)
        os << fmt_double(lo + (hi - lo) * b / bins) << ',' << fmt_double(lo + (hi - lo) * (b + 1) / bins) << ','
           << counts[static_cast<std::size_t>(b)] << '\n';
}

inline std::vector<Instance> image_instances(const Dataset& ds, ImageId id) {
    std::vector<Instance> out;
    for (std::size_t i : ds.instances_of(id)) out.push_back(ds.instances[i]);
    return out;
}

struct FitArgs {
    std::vector<std::string> data;
    std::string out;
    std::uint64_t seed = 0;
    int n_atomic = kDefaultAtomicPoses;
};

struct AugmentArgs {
    std::string data, images, priors, out, report, index_cache;
    std::vector<std::string> pool, pool_images;
    std::uint64_t seed = 0;
    int workers = 1;
    int n_atomic = kDefaultAtomicPoses;
    bool no_loa = false, no_gsc = false;
    AugmentationConfig cfg;
};

struct StatsArgs {
    std::string data, kind = "r", out;
    int w = kDefaultContourWidth;
    double t = kDefaultInterlockThreshold;
    int k = kDefaultCandidatePool;
    std::uint64_t seed = 0;
    int bins = 0;
};

struct MapArgs {
    std::string data, images, priors, out;
    std::int64_t image_id = 0, human_id = 0, interaction = 0;
};

inline int run_fit(const FitArgs& a, std::ostream& out) {
    std::vector<Dataset> parts;
    for (const auto& p : a.data) parts.push_back(load_dataset(p));
    std::vector<const Dataset*> ptrs;
    for (const auto& d : parts) ptrs.push_back(&d);
    PriorConfig cfg;
    cfg.seed = a.seed;
    cfg.n_atomic = a.n_atomic;
    SpatialPriorSet set = fit_prior(std::span<const Dataset* const>(ptrs), cfg);
    save_priors(set, a.out);
    nlohmann::json summary;
    summary["n_atomic"] = set.atomic_poses.size();
    summary["interactions"] = set.interactions.size();
    std::size_t samples = 0;
    for (const auto& [h, p] : set.interactions) samples += p.n_samples;
    summary["samples"] = samples;
    summary["skipped"] = nlohmann::json::array();
    for (auto h : set.skipped) summary["skipped"].push_back(h.value);
    out << summary.dump() << '\n';
    return kExitOk;
}

inline int run_augment(AugmentArgs a, std::ostream& out) {
    if (a.pool.size() != a.pool_images.size())
        throw std::invalid_argument("--pool and --pool-images must be given the same number of times");
    Dataset ds = load_dataset(a.data, a.images);
    std::vector<Dataset> parts;
    parts.push_back(ds);
    for (std::size_t i = 0; i < a.pool.size(); ++i) parts.push_back(load_dataset(a.pool[i], a.pool_images[i]));
    Dataset pool = parts.size() == 1 ? ds : merge_datasets(parts);

    SpatialPriorSet priors;
    if (!a.priors.empty()) {
        priors = load_priors(a.priors);
    } else {
        std::vector<const Dataset*> ptrs;
        for (const auto& d : parts) ptrs.push_back(&d);
        PriorConfig pc;
        pc.seed = a.seed;
        pc.n_atomic = a.n_atomic;
        priors = fit_prior(std::span<const Dataset* const>(ptrs), pc);
    }
    CategoryIndex index = a.index_cache.empty() ? build_index(pool) : index_cache::load_or_build(pool, a.index_cache);

    a.cfg.seed = a.seed;
    a.cfg.enable_loa = !a.no_loa;
    a.cfg.enable_gsc = !a.no_gsc;
    a.cfg.validate();
    ImageStore store;
    AugmentContext ctx{&pool, &index, &priors, &store, a.cfg};
    AugmentReport report = augment_dataset(ds, ctx, a.out, a.workers);
    Sink sink(a.report, out);
    *sink << report.to_json().dump(1) << '\n';
    return kExitOk;
}

inline int run_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
    Dataset ds = load_dataset(a.data);
    Sink sink(a.out, out);
    std::ostream& os = *sink;
    std::vector<double> values;
    const bool raw = a.bins <= 0;

    if (a.kind == "r") {
        if (raw) os << "image_id,instance_a,instance_b,u,v,r\n";
        for (const auto& img : ds.images) {
            auto inst = image_instances(ds, img.id);
            InterlockTable table(inst, a.w);
            for (std::size_t i = 0; i < inst.size(); ++i)
                for (std::size_t j = i + 1; j < inst.size(); ++j) {
                    const auto& c = table.at(i, j);
                    if (c.exceeds_unit())
                        err << "warning: interlock U > V for pair " << inst[i].id << ',' << inst[j].id << '\n';
                    values.push_back(c.ratio());
                    if (raw)
                        os << img.id << ',' << inst[i].id << ',' << inst[j].id << ',' << c.u << ',' << c.v << ','
                           << fmt_double(c.ratio()) << '\n';
                }
        }
        if (!raw) histogram(os, values, a.bins, 0.0, 1.0);
    } else if (a.kind == "d") {
        CategoryIndex index = build_index(ds);
        Rng rng = seeded_rng(a.seed);
        if (raw) os << "image_id,object_id,candidate_id,distance\n";
        for (const auto& [cat, entries] : index.categories())
            for (const auto& e : entries)
                for (InstanceId c : sample_candidates(index, cat, e.id, a.k, rng)) {
                    const double d = state_distance(e.state, index.find(c)->state);
                    values.push_back(d);
                    if (raw) os << e.image_id << ',' << e.id << ',' << c << ',' << fmt_double(d) << '\n';
                }
        if (!raw) histogram(os, values, a.bins, 0.0, 2.0);
    } else if (a.kind == "replaceable") {
        os << "image_id,objects,replaceable\n";
        for (const auto& img : ds.images) {
            auto inst = image_instances(ds, img.id);
            std::size_t objects = 0;
            for (const auto& i : inst) objects += i.is_human ? 0 : 1;
            os << img.id << ',' << objects << ',' << replaceable_set(inst, a.t, a.w).size() << '\n';
        }
    } else {
        throw std::invalid_argument("--kind must be one of r, d, replaceable");
    }
    return kExitOk;
}

inline int run_inspect(const MapArgs& a, std::ostream& out) {
    Dataset ds = load_dataset(a.data, a.images);
    SpatialPriorSet priors = load_priors(a.priors);
    const ImageRecord* rec = ds.find_image(ImageId(a.image_id));
    if (!rec) throw DanglingReference("no image " + std::to_string(a.image_id));
    const Instance* human = ds.find_instance(InstanceId(a.human_id));
    if (!human || human->image_id != rec->id) throw DanglingReference("no human " + std::to_string(a.human_id) + " in that image");
    auto density = probability_map(priors, InteractionId(a.interaction), *human, rec->width, rec->height);
    double peak = 0.0;
    for (double v : density) peak = std::max(peak, v);

    std::vector<std::uint8_t> gray(density.size());
    for (std::size_t i = 0; i < density.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * density[i] / peak));
    {
        std::ostringstream pgm;
        pgm << "P5\n" << rec->width << ' ' << rec->height << "\n255\n";
        std::string s = pgm.str();
        s.append(reinterpret_cast<const char*>(gray.data()), gray.size());
        io::write_file(a.out + ".pgm", s);
    }
    RgbImage base = a.images.empty() ? RgbImage(rec->width, rec->height, 0) : io::load_image(rec->uri);
    for (int y = 0; y < rec->height; ++y)
        for (int x = 0; x < rec->width; ++x) {
            const double v = gray[static_cast<std::size_t>(y) * rec->width + x] / 255.0;
            const double heat[3] = {255.0 * v, 64.0 * v, 255.0 * (1.0 - v)};
            std::uint8_t* p = base.at(x, y);
            for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::lround(0.5 * p[c] + 0.5 * heat[c]));
        }
    io::save_png(a.out + ".png", base);
    nlohmann::json summary{{"pgm", a.out + ".pgm"}, {"png", a.out + ".png"}, {"width", rec->width}, {"height", rec->height}};
    out << summary.dump() << '\n';
    return kExitOk;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Machine-readable results go
/// to `out`; diagnostics are single lines on `err`.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Decomposition-based augmentation for human-object interaction datasets", "decaug"};
    app.require_subcommand(1);

    detail::FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit-prior", "fit per-interaction spatial priors and write priors.json");
    fit_cmd->add_option("--data", fit.data, "coco-hoi-json dataset (repeat to pool datasets)")->required();
    fit_cmd->add_option("--out", fit.out, "output priors.json")->required();
    fit_cmd->add_option("--seed", fit.seed, "k-means++ seed");
    fit_cmd->add_option("--n-atomic", fit.n_atomic, "number of atomic poses")->check(CLI::PositiveNumber);

    detail::AugmentArgs aug;
    auto* aug_cmd = app.add_subcommand("augment", "augment every image of a dataset");
    aug_cmd->add_option("--data", aug.data, "coco-hoi-json dataset")->required();
    aug_cmd->add_option("--images", aug.images, "image directory")->required();
    aug_cmd->add_option("--priors", aug.priors, "priors.json (fitted on the fly when omitted)");
    aug_cmd->add_option("--out", aug.out, "output directory")->required();
    aug_cmd->add_option("--seed", aug.seed, "global seed")->required();
    aug_cmd->add_option("--p", aug.cfg.augment_probability, "augmentation probability")->check(CLI::Range(0.0, 1.0));
    aug_cmd->add_option("--t", aug.cfg.interlock_threshold, "interlocking-ratio threshold")->check(CLI::Range(0.0, 1.0));
    aug_cmd->add_option("--k", aug.cfg.candidate_pool, "replacement candidates per object")->check(CLI::PositiveNumber);
    aug_cmd->add_option("--w", aug.cfg.contour_width, "contour band width (px)")->check(CLI::PositiveNumber);
    aug_cmd->add_option("--feather", aug.cfg.feather, "alpha feather (px)")->check(CLI::NonNegativeNumber);
    aug_cmd->add_option("--inpaint-radius", aug.cfg.inpaint_radius, "inpainting radius (px)")->check(CLI::PositiveNumber);
    aug_cmd->add_option("--max-resamples", aug.cfg.gsc_max_resamples, "placement redraws")->check(CLI::NonNegativeNumber);
    aug_cmd->add_option("--workers", aug.workers, "worker threads")->check(CLI::PositiveNumber);
    aug_cmd->add_option("--report", aug.report, "write the JSON report here instead of stdout");
    aug_cmd->add_option("--pool", aug.pool, "extra candidate-pool dataset (repeatable)");
    aug_cmd->add_option("--pool-images", aug.pool_images, "image directory for each --pool");
    aug_cmd->add_option("--index-cache", aug.index_cache, "binary category-index cache file");
    aug_cmd->add_option("--n-atomic", aug.n_atomic, "atomic poses when fitting on the fly")->check(CLI::PositiveNumber);
    aug_cmd->add_flag("--no-loa", aug.no_loa, "disable object replacement");
    aug_cmd->add_flag("--no-gsc", aug.no_gsc, "disable relocation");

    detail::StatsArgs st;
    auto* stats_cmd = app.add_subcommand("stats", "CSV of interlocking ratios, state distances or replaceability");
    stats_cmd->add_option("--data", st.data, "coco-hoi-json dataset")->required();
    stats_cmd->add_option("--kind", st.kind, "r | d | replaceable")->check(CLI::IsMember({"r", "d", "replaceable"}));
    stats_cmd->add_option("--w", st.w, "contour band width (px)")->check(CLI::PositiveNumber);
    stats_cmd->add_option("--t", st.t, "interlocking-ratio threshold")->check(CLI::Range(0.0, 1.0));
    stats_cmd->add_option("--k", st.k, "candidates per object for --kind d")->check(CLI::PositiveNumber);
    stats_cmd->add_option("--seed", st.seed, "candidate sampling seed");
    stats_cmd->add_option("--histogram", st.bins, "emit a histogram with this many bins")->check(CLI::PositiveNumber);
    stats_cmd->add_option("--out", st.out, "CSV path (stdout when omitted)");

    detail::MapArgs mp;
    auto* map_cmd = app.add_subcommand("inspect-map", "render a pose-guided probability map (PGM + PNG overlay)");
    map_cmd->add_option("--data", mp.data, "coco-hoi-json dataset")->required();
    map_cmd->add_option("--images", mp.images, "image directory (black background when omitted)");
    map_cmd->add_option("--priors", mp.priors, "priors.json")->required();
    map_cmd->add_option("--image-id", mp.image_id, "image id")->required();
    map_cmd->add_option("--human-id", mp.human_id, "human annotation id")->required();
    map_cmd->add_option("--interaction", mp.interaction, "interaction id")->required();
    map_cmd->add_option("--out", mp.out, "output prefix; writes <prefix>.pgm and <prefix>.png")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage-error: " << e.what() << '\n';
        err << "usage: decaug {fit-prior|augment|stats|inspect-map} [options]  (see --help)\n";
        return kExitUsage;
    }

    try {
        if (*fit_cmd) return detail::run_fit(fit, out);
        if (*aug_cmd) return detail::run_augment(aug, out);
        if (*stats_cmd) return detail::run_stats(st, out, err);
        if (*map_cmd) return detail::run_inspect(mp, out);
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace decaug::cli
