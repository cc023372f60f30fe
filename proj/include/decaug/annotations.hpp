#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "decaug/bitmask.hpp"
#include "decaug/errors.hpp"
#include "decaug/ids.hpp"
#include "decaug/image.hpp"
#include "decaug/rle.hpp"

namespace decaug {

inline constexpr int kNumKeypoints = 17;

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    int visibility = 0;  // COCO flag: 0 not labelled, 1 labelled but occluded, 2 visible

    bool visible() const { return visibility > 0; }
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using Keypoints = std::array<Keypoint, kNumKeypoints>;

struct ImageRecord {
    ImageId id;
    int width = 0;
    int height = 0;
    std::string file_name;
    std::filesystem::path uri;  // file_name resolved against the images directory

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Instance {
    InstanceId id;
    ImageId image_id;
    CategoryId category_id;
    Box bbox;      // tight bounds of mask, recomputed at ingest
    BitMask mask;  // image coordinates
    std::optional<Keypoints> keypoints;
    bool is_human = false;

    friend bool operator==(const Instance&, const Instance&) = default;
};

struct HoiTriplet {
    InstanceId human_id;
    std::optional<InstanceId> object_id;  // empty for verbs without an object
    InteractionId interaction_id;

    friend bool operator==(const HoiTriplet&, const HoiTriplet&) = default;
};

/// In-memory dataset. Vectors keep file order; lookups go through the id maps
/// built by `reindex()`.
class Dataset {
public:
    std::vector<ImageRecord> images;
    std::vector<Instance> instances;
    std::vector<HoiTriplet> triplets;
    std::map<CategoryId, std::string> categories;
    std::map<InteractionId, std::string> interactions;

    /// Rebuild the id lookup tables; call after mutating the vectors.
    void reindex() {
        image_index_.clear();
        instance_index_.clear();
        by_image_.clear();
        triplets_by_image_.clear();
        for (std::size_t i = 0; i < images.size(); ++i) image_index_[images[i].id] = i;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            instance_index_[instances[i].id] = i;
            by_image_[instances[i].image_id].push_back(i);
        }
        for (std::size_t i = 0; i < triplets.size(); ++i) {
            auto it = instance_index_.find(triplets[i].human_id);
            if (it != instance_index_.end()) triplets_by_image_[instances[it->second].image_id].push_back(i);
        }
    }

    const ImageRecord* find_image(ImageId id) const {
        auto it = image_index_.find(id);
        return it == image_index_.end() ? nullptr : &images[it->second];
    }
    const Instance* find_instance(InstanceId id) const {
        auto it = instance_index_.find(id);
        return it == instance_index_.end() ? nullptr : &instances[it->second];
    }
    /// Indices into `instances`, in file order.
    const std::vector<std::size_t>& instances_of(ImageId id) const {
        static const std::vector<std::size_t> none;
        auto it = by_image_.find(id);
        return it == by_image_.end() ? none : it->second;
    }
    /// Indices into `triplets`, in file order.
    const std::vector<std::size_t>& triplets_of(ImageId id) const {
        static const std::vector<std::size_t> none;
        auto it = triplets_by_image_.find(id);
        return it == triplets_by_image_.end() ? none : it->second;
    }

    /// Validate every cross-reference and geometric invariant. Throws on the first violation.
    void validate() const;

private:
    std::unordered_map<ImageId, std::size_t> image_index_;
    std::unordered_map<InstanceId, std::size_t> instance_index_;
    std::unordered_map<ImageId, std::vector<std::size_t>> by_image_;
    std::unordered_map<ImageId, std::vector<std::size_t>> triplets_by_image_;
};

inline void Dataset::validate() const {
    std::unordered_map<ImageId, std::size_t> seen_images;
    for (const auto& img : images) {
        if (img.width <= 0 || img.height <= 0)
            throw SchemaError("image " + std::to_string(img.id.value) + " has non-positive dimensions");
        if (!seen_images.emplace(img.id, 0).second)
            throw SchemaError("duplicate image id " + std::to_string(img.id.value));
    }
    std::unordered_map<InstanceId, const Instance*> seen;
    for (const auto& inst : instances) {
        const std::string tag = "annotation " + std::to_string(inst.id.value);
        if (!seen.emplace(inst.id, &inst).second) throw SchemaError("duplicate " + tag);
        const ImageRecord* img = find_image(inst.image_id);
        if (!img) throw DanglingReference(tag + " references missing image " + std::to_string(inst.image_id.value));
        if (!categories.empty() && !categories.contains(inst.category_id))
            throw DanglingReference(tag + " references missing category " + std::to_string(inst.category_id.value));
        if (inst.mask.width() != img->width || inst.mask.height() != img->height)
            throw GeometryError(tag + " mask size does not match its image");
        auto b = inst.mask.bounds();
        if (!b) throw GeometryError(tag + " has an empty mask");
        if (*b != inst.bbox) throw GeometryError(tag + " bbox is not the tight bounds of its mask");
        if (inst.keypoints && !inst.is_human) throw SchemaError(tag + " has keypoints but is not a person");
    }
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        const std::string tag = "hoi_annotations[" + std::to_string(i) + "]";
        auto h = seen.find(t.human_id);
        if (h == seen.end()) throw DanglingReference(tag + " references missing human " + std::to_string(t.human_id.value));
        if (!h->second->is_human) throw SchemaError(tag + " subject is not a person");
        if (t.object_id) {
            auto o = seen.find(*t.object_id);
            if (o == seen.end())
                throw DanglingReference(tag + " references missing object " + std::to_string(t.object_id->value));
            if (o->second->is_human) throw SchemaError(tag + " object is a person");
            if (o->second->image_id != h->second->image_id)
                throw DanglingReference(tag + " links instances from different images");
        }
        if (!interactions.contains(t.interaction_id))
            throw DanglingReference(tag + " references missing interaction " + std::to_string(t.interaction_id.value));
    }
}

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

template <typename T>
T get_as(const json& value, const std::string& where) {
    try {
        return value.get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(where + ": " + e.what());
    }
}

inline BitMask decode_segmentation(const json& seg, int width, int height, const std::string& where) {
    if (seg.is_object()) {
        auto size = get_as<std::vector<int>>(require(seg, "size", where), where + ".size");
        if (size.size() != 2) throw SchemaError(where + ".size must be [h, w]");
        if (size[0] != height || size[1] != width)
            throw GeometryError(where + ": RLE size does not match image dimensions");
        const json& counts = require(seg, "counts", where);
        if (counts.is_string()) return rle::decode_counts(rle::counts_from_string(counts.get<std::string>()), width, height);
        return rle::decode_counts(get_as<std::vector<std::uint64_t>>(counts, where + ".counts"), width, height);
    }
    if (seg.is_array()) return rle::fill_polygons(get_as<std::vector<std::vector<double>>>(seg, where), width, height);
    throw SchemaError(where + ": segmentation must be an RLE object or a polygon list");
}

}  // namespace detail

/// Decode an RLE object or polygon list into a dense mask.
inline BitMask decode_mask(const nlohmann::json& encoded, int width, int height) {
    return detail::decode_segmentation(encoded, width, height, "segmentation");
}

/// Build a validated Dataset from parsed coco-hoi-json. `images_dir` resolves file names.
inline Dataset dataset_from_json(const nlohmann::json& root, const std::filesystem::path& images_dir) {
    using detail::get_as;
    using detail::require;
    using nlohmann::json;
    if (!root.is_object()) throw SchemaError("top level must be an object");

    Dataset ds;

    for (const auto& c : root.value("categories", json::array())) {
        const std::string where = "categories";
        ds.categories[CategoryId(get_as<std::int64_t>(require(c, "id", where), where))] =
            get_as<std::string>(require(c, "name", where), where);
    }
    for (const auto& c : root.value("interaction_categories", json::array())) {
        const std::string where = "interaction_categories";
        ds.interactions[InteractionId(get_as<std::int64_t>(require(c, "id", where), where))] =
            get_as<std::string>(require(c, "name", where), where);
    }

    for (const auto& im : require(root, "images", "root")) {
        const std::string where = "images";
        ImageRecord rec;
        rec.id = ImageId(get_as<std::int64_t>(require(im, "id", where), where));
        rec.width = get_as<int>(require(im, "width", where), where);
        rec.height = get_as<int>(require(im, "height", where), where);
        rec.file_name = im.value("file_name", std::to_string(rec.id.value));
        rec.uri = images_dir / rec.file_name;
        ds.images.push_back(std::move(rec));
    }
    ds.reindex();

    for (const auto& a : require(root, "annotations", "root")) {
        Instance inst;
        inst.id = InstanceId(get_as<std::int64_t>(require(a, "id", "annotations"), "annotations"));
        const std::string where = "annotation " + std::to_string(inst.id.value);
        inst.image_id = ImageId(get_as<std::int64_t>(require(a, "image_id", where), where));
        inst.category_id = CategoryId(get_as<std::int64_t>(require(a, "category_id", where), where));
        const ImageRecord* img = ds.find_image(inst.image_id);
        if (!img)
            throw DanglingReference(where + " references missing image " + std::to_string(inst.image_id.value));
        if (a.contains("bbox")) {
            auto bb = get_as<std::vector<double>>(a.at("bbox"), where + ".bbox");
            if (bb.size() != 4) throw SchemaError(where + ".bbox must have 4 entries");
            constexpr double tol = 1.0;
            if (bb[0] < -tol || bb[1] < -tol || bb[2] < 0 || bb[3] < 0 || bb[0] + bb[2] > img->width + tol ||
                bb[1] + bb[3] > img->height + tol)
                throw GeometryError(where + " bbox lies outside its image");
        }
        inst.mask = detail::decode_segmentation(require(a, "segmentation", where), img->width, img->height,
                                                where + ".segmentation");
        auto bounds = inst.mask.bounds();
        if (!bounds) throw GeometryError(where + " has an empty mask");
        inst.bbox = *bounds;
        auto cat = ds.categories.find(inst.category_id);
        inst.is_human = cat != ds.categories.end() && cat->second == "person";
        if (a.contains("keypoints") && !a.at("keypoints").is_null()) {
            auto kp = get_as<std::vector<double>>(a.at("keypoints"), where + ".keypoints");
            if (!kp.empty()) {
                if (kp.size() != 3 * kNumKeypoints)
                    throw SchemaError(where + ".keypoints must hold 17 (x, y, v) triples");
                Keypoints k{};
                for (int i = 0; i < kNumKeypoints; ++i)
                    k[i] = {kp[3 * i], kp[3 * i + 1], static_cast<int>(std::lround(kp[3 * i + 2]))};
                inst.keypoints = k;
            }
        }
        ds.instances.push_back(std::move(inst));
    }

    for (const auto& t : root.value("hoi_annotations", json::array())) {
        const std::string where = "hoi_annotations";
        HoiTriplet trip;
        trip.human_id = InstanceId(get_as<std::int64_t>(require(t, "human_ann_id", where), where));
        const json& obj = require(t, "object_ann_id", where);
        if (!obj.is_null()) trip.object_id = InstanceId(get_as<std::int64_t>(obj, where));
        trip.interaction_id = InteractionId(get_as<std::int64_t>(require(t, "interaction_id", where), where));
        ds.triplets.push_back(trip);
    }

    ds.reindex();
    ds.validate();
    return ds;
}

inline Dataset parse_dataset(std::string_view text, const std::filesystem::path& images_dir) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    return dataset_from_json(root, images_dir);
}

/// Load a coco-hoi-json file. Image file names resolve against `images_dir`, or the
/// JSON file's directory when empty.
inline Dataset load_dataset(const std::filesystem::path& path, std::filesystem::path images_dir = {}) {
    auto bytes = io::read_file(path);
    if (images_dir.empty()) images_dir = path.parent_path();
    return parse_dataset(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), images_dir);
}

/// Concatenate datasets into one pool. Image and instance ids of the k-th part
/// (k >= 1) are shifted by k << 40 so sources never collide; the first part keeps its
/// ids. Category and interaction tables are unioned, first name wins.
inline Dataset merge_datasets(std::span<const Dataset> parts) {
    Dataset out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::int64_t shift = static_cast<std::int64_t>(k) << 40;
        const Dataset& p = parts[k];
        for (auto img : p.images) {
            img.id = ImageId(img.id.value + shift);
            out.images.push_back(std::move(img));
        }
        for (auto inst : p.instances) {
            inst.id = InstanceId(inst.id.value + shift);
            inst.image_id = ImageId(inst.image_id.value + shift);
            out.instances.push_back(std::move(inst));
        }
        for (auto t : p.triplets) {
            t.human_id = InstanceId(t.human_id.value + shift);
            if (t.object_id) t.object_id = InstanceId(t.object_id->value + shift);
            out.triplets.push_back(t);
        }
        out.categories.insert(p.categories.begin(), p.categories.end());
        out.interactions.insert(p.interactions.begin(), p.interactions.end());
    }
    out.reindex();
    return out;
}

// ---------------------------------------------------------------------------------
// Writing

inline nlohmann::json instance_to_json(const Instance& inst) {
    nlohmann::json a;
    a["id"] = inst.id.value;
    a["image_id"] = inst.image_id.value;
    a["category_id"] = inst.category_id.value;
    a["bbox"] = {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h};
    a["area"] = inst.mask.area();
    a["iscrowd"] = 0;
    a["segmentation"] = {{"size", {inst.mask.height(), inst.mask.width()}},
                         {"counts", rle::counts_to_string(rle::encode_counts(inst.mask))}};
    if (inst.keypoints) {
        auto kp = nlohmann::json::array();
        int labelled = 0;
        for (const auto& k : *inst.keypoints) {
            kp.push_back(k.x);
            kp.push_back(k.y);
            kp.push_back(k.visibility);
            labelled += k.visible() ? 1 : 0;
        }
        a["keypoints"] = std::move(kp);
        a["num_keypoints"] = labelled;
    }
    return a;
}

inline nlohmann::json triplet_to_json(const HoiTriplet& t) {
    nlohmann::json j;
    j["human_ann_id"] = t.human_id.value;
    j["object_ann_id"] = t.object_id ? nlohmann::json(t.object_id->value) : nlohmann::json(nullptr);
    j["interaction_id"] = t.interaction_id.value;
    return j;
}

/// Canonical coco-hoi-json for a subset of images (all when `only` is empty).
inline nlohmann::json dataset_to_json(const Dataset& ds, std::optional<ImageId> only = std::nullopt) {
    nlohmann::json root;
    root["images"] = nlohmann::json::array();
    root["annotations"] = nlohmann::json::array();
    root["hoi_annotations"] = nlohmann::json::array();
    root["categories"] = nlohmann::json::array();
    root["interaction_categories"] = nlohmann::json::array();
    for (const auto& img : ds.images) {
        if (only && img.id != *only) continue;
        root["images"].push_back(
            {{"id", img.id.value}, {"width", img.width}, {"height", img.height}, {"file_name", img.file_name}});
    }
    for (const auto& inst : ds.instances)
        if (!only || inst.image_id == *only) root["annotations"].push_back(instance_to_json(inst));
    for (const auto& t : ds.triplets) {
        const Instance* h = ds.find_instance(t.human_id);
        if (!only || (h && h->image_id == *only)) root["hoi_annotations"].push_back(triplet_to_json(t));
    }
    for (const auto& [id, name] : ds.categories) root["categories"].push_back({{"id", id.value}, {"name", name}});
    for (const auto& [id, name] : ds.interactions)
        root["interaction_categories"].push_back({{"id", id.value}, {"name", name}});
    return root;
}

/// Output of one augmentation call: the new image plus the annotations for that image.
struct AugmentedSample {
    ImageRecord image_record;
    RgbImage image;
    std::vector<Instance> instances;
    std::vector<HoiTriplet> triplets;
    std::map<CategoryId, std::string> categories;
    std::map<InteractionId, std::string> interactions;
    nlohmann::json provenance = nlohmann::json::object();
};

/// Output file stem for an image: its file name without extension.
inline std::string output_stem(const ImageRecord& rec) {
    auto stem = std::filesystem::path(rec.file_name).stem().string();
    return stem.empty() ? std::to_string(rec.id.value) : stem;
}

/// Single-image dataset view of a sample (file_name rewritten to the PNG output name).
inline Dataset sample_dataset(const AugmentedSample& s) {
    Dataset ds;
    ImageRecord rec = s.image_record;
    rec.file_name = output_stem(rec) + ".png";
    ds.images.push_back(rec);
    ds.instances = s.instances;
    ds.triplets = s.triplets;
    ds.categories = s.categories;
    ds.interactions = s.interactions;
    ds.reindex();
    return ds;
}

/// Annotation fragment text: coco-hoi-json for the sample's image plus a `provenance` record.
inline std::string fragment_text(const AugmentedSample& s) {
    auto root = dataset_to_json(sample_dataset(s));
    root["provenance"] = s.provenance;
    return root.dump(1) + "\n";
}

/// Write `<stem>.png` and `<stem>.json` into out_dir.
inline void save_augmented(const AugmentedSample& s, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create directory " + out_dir.string());
    const auto stem = output_stem(s.image_record);
    io::write_file(out_dir / (stem + ".png"), io::encode_png(s.image));
    io::write_file(out_dir / (stem + ".json"), fragment_text(s));
}

}  // namespace decaug
