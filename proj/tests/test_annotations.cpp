#include <gtest/gtest.h>

#include <fstream>

#include "decaug/annotations.hpp"
#include "support.hpp"

using namespace decaug;
using nlohmann::json;

namespace {

json manifest() { return json::parse(support::slurp(support::data_dir() / "manifest.json")); }

json minimal_doc() {
    return json::parse(R"({
      "images": [{"id": 1, "width": 8, "height": 6, "file_name": "a.png"}],
      "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "cup"}],
      "interaction_categories": [{"id": 1, "name": "hold"}],
      "annotations": [
        {"id": 10, "image_id": 1, "category_id": 1, "segmentation": [[0, 0, 3, 0, 3, 5, 0, 5]]},
        {"id": 11, "image_id": 1, "category_id": 2, "segmentation": {"size": [6, 8], "counts": [30, 2, 16]}}
      ],
      "hoi_annotations": [{"human_ann_id": 10, "object_ann_id": 11, "interaction_id": 1}]
    })");
}

Dataset parse(const json& j) { return parse_dataset(j.dump(), {}); }

}  // namespace

TEST(LoadDataset, FixtureMatchesGoldenManifest) {
    const Dataset& ds = support::fixture();
    const json m = manifest();
    EXPECT_EQ(ds.images.size(), m["images"].get<std::size_t>());
    EXPECT_EQ(ds.instances.size(), m["annotations"].get<std::size_t>());
    EXPECT_EQ(ds.triplets.size(), m["triplets"].get<std::size_t>());
    EXPECT_EQ(ds.categories.size(), m["categories"].get<std::size_t>());
    EXPECT_EQ(ds.interactions.size(), m["interactions"].get<std::size_t>());
    std::size_t humans = 0, with_kp = 0, no_object = 0;
    for (const auto& i : ds.instances) {
        humans += i.is_human;
        with_kp += i.keypoints.has_value();
    }
    for (const auto& t : ds.triplets) no_object += !t.object_id;
    EXPECT_EQ(humans, m["humans"].get<std::size_t>());
    EXPECT_EQ(ds.instances.size() - humans, m["objects"].get<std::size_t>());
    EXPECT_EQ(with_kp, m["with_keypoints"].get<std::size_t>());
    EXPECT_EQ(no_object, m["no_object_triplets"].get<std::size_t>());
    for (const auto& i : ds.instances)
        EXPECT_EQ(i.mask.area(), m["mask_area"][std::to_string(i.id.value)].get<std::size_t>()) << "annotation " << i.id;
    EXPECT_NO_THROW(ds.validate());
}

TEST(LoadDataset, EmptyDatasetIsValid) {
    Dataset ds = parse_dataset(R"({"images": [], "annotations": []})", {});
    EXPECT_TRUE(ds.images.empty());
    EXPECT_TRUE(ds.instances.empty());
    EXPECT_TRUE(ds.triplets.empty());
}

TEST(LoadDataset, BboxIsRecomputedFromMask) {
    json j = minimal_doc();
    j["annotations"][1]["bbox"] = {3, 0, 2, 5};  // declared loosely
    Dataset ds = parse(j);
    const Instance* cup = ds.find_instance(InstanceId(11));
    ASSERT_TRUE(cup);
    EXPECT_EQ(cup->bbox, (Box{5, 0, 1, 2}));
    const Instance* person = ds.find_instance(InstanceId(10));
    EXPECT_EQ(person->bbox, (Box{0, 0, 3, 5}));
    EXPECT_TRUE(person->is_human);
    EXPECT_FALSE(cup->is_human);
}

TEST(LoadDataset, Errors) {
    EXPECT_THROW(parse_dataset("{not json", {}), ParseError);
    EXPECT_THROW(parse_dataset(R"({"annotations": []})", {}), SchemaError);

    json dangling = minimal_doc();
    dangling["hoi_annotations"][0]["object_ann_id"] = 99;
    EXPECT_THROW(parse(dangling), DanglingReference);

    json orphan = minimal_doc();
    orphan["annotations"][0]["image_id"] = 7;
    EXPECT_THROW(parse(orphan), DanglingReference);

    json missing = minimal_doc();
    missing["annotations"][0].erase("segmentation");
    EXPECT_THROW(parse(missing), SchemaError);

    json outside = minimal_doc();
    outside["annotations"][1]["bbox"] = {5, 0, 9, 2};
    EXPECT_THROW(parse(outside), GeometryError);

    json overflow = minimal_doc();
    overflow["annotations"][1]["segmentation"]["counts"] = {30, 2, 17};
    EXPECT_THROW(parse(overflow), DecodeError);

    json empty_mask = minimal_doc();
    empty_mask["annotations"][1]["segmentation"]["counts"] = {48};
    EXPECT_THROW(parse(empty_mask), GeometryError);

    json short_kp = minimal_doc();
    short_kp["annotations"][0]["keypoints"] = {1, 2, 2};
    EXPECT_THROW(parse(short_kp), SchemaError);

    json object_kp = minimal_doc();
    object_kp["annotations"][1]["keypoints"] = std::vector<int>(51, 0);
    EXPECT_THROW(parse(object_kp), SchemaError);

    json object_subject = minimal_doc();
    object_subject["hoi_annotations"][0]["human_ann_id"] = 11;
    EXPECT_THROW(parse(object_subject), SchemaError);

    json bad_verb = minimal_doc();
    bad_verb["hoi_annotations"][0]["interaction_id"] = 4;
    EXPECT_THROW(parse(bad_verb), DanglingReference);
}

TEST(LoadDataset, NoObjectTripletsParse) {
    json j = minimal_doc();
    j["hoi_annotations"].push_back({{"human_ann_id", 10}, {"object_ann_id", nullptr}, {"interaction_id", 1}});
    Dataset ds = parse(j);
    ASSERT_EQ(ds.triplets.size(), 2u);
    EXPECT_FALSE(ds.triplets[1].object_id);
}

TEST(RoundTrip, LoadSaveLoadIsStructurallyEqual) {
    const Dataset& ds = support::fixture();
    Dataset again = parse_dataset(dataset_to_json(ds).dump(), support::fixture_images());
    ASSERT_EQ(again.images.size(), ds.images.size());
    EXPECT_EQ(again.images, ds.images);
    EXPECT_EQ(again.instances, ds.instances);
    EXPECT_EQ(again.triplets, ds.triplets);
    EXPECT_EQ(again.categories, ds.categories);
    EXPECT_EQ(again.interactions, ds.interactions);
    EXPECT_EQ(dataset_to_json(again).dump(), dataset_to_json(ds).dump());
}

TEST(SaveAugmented, IdentitySampleReproducesCanonicalAnnotations) {
    const Dataset& ds = support::fixture();
    const ImageRecord& rec = ds.images[3];
    AugmentedSample s;
    s.image_record = rec;
    s.image = io::load_image(rec.uri);
    for (std::size_t i : ds.instances_of(rec.id)) s.instances.push_back(ds.instances[i]);
    for (std::size_t i : ds.triplets_of(rec.id)) s.triplets.push_back(ds.triplets[i]);
    s.categories = ds.categories;
    s.interactions = ds.interactions;

    support::TempDir dir("identity");
    save_augmented(s, dir.path());
    json written = json::parse(support::slurp(dir / "000004.json"));
    written.erase("provenance");
    json expected = dataset_to_json(ds, rec.id);
    EXPECT_EQ(written.dump(), expected.dump());
    EXPECT_EQ(io::load_image(dir / "000004.png").pixels, s.image.pixels);

    Dataset reloaded = load_dataset(dir / "000004.json");
    EXPECT_NO_THROW(reloaded.validate());
    EXPECT_EQ(reloaded.instances, s.instances);
}

TEST(SaveAugmented, MovedMaskReloadsWithTightBbox) {
    const Dataset& ds = support::fixture();
    const ImageRecord& rec = ds.images[1];
    AugmentedSample s;
    s.image_record = rec;
    s.image = RgbImage(rec.width, rec.height, 0);
    for (std::size_t i : ds.instances_of(rec.id)) s.instances.push_back(ds.instances[i]);
    s.categories = ds.categories;
    Instance& obj = s.instances.back();
    ASSERT_FALSE(obj.is_human);
    obj.mask = obj.mask.translated(-17, 9);
    obj.bbox = *obj.mask.bounds();

    support::TempDir dir("moved");
    save_augmented(s, dir.path());
    Dataset back = load_dataset(dir / "000002.json");
    const Instance* moved = back.find_instance(obj.id);
    ASSERT_TRUE(moved);
    EXPECT_EQ(moved->mask, obj.mask);
    EXPECT_EQ(moved->bbox, *moved->mask.bounds());
}

TEST(SaveAugmented, UnwritableDirectoryIsIoError) {
    support::TempDir dir("blocked");
    std::ofstream(dir / "file") << "x";
    AugmentedSample s;
    s.image_record = support::fixture().images[0];
    s.image = RgbImage(s.image_record.width, s.image_record.height, 0);
    EXPECT_THROW(save_augmented(s, dir / "file" / "sub"), IoError);
}

TEST(MergeDatasets, ShiftsIdsOfLaterParts) {
    Dataset a = parse(minimal_doc());
    std::vector<Dataset> parts{a, a};
    Dataset m = merge_datasets(parts);
    EXPECT_EQ(m.images.size(), 2u);
    EXPECT_EQ(m.instances.size(), 4u);
    EXPECT_NO_THROW(m.validate());
    const std::int64_t shift = std::int64_t{1} << 40;
    EXPECT_TRUE(m.find_instance(InstanceId(10 + shift)));
    EXPECT_EQ(m.triplets[1].object_id, InstanceId(11 + shift));
}
