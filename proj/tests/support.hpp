#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "decaug/annotations.hpp"
#include "decaug/rng.hpp"

namespace support {

inline std::filesystem::path data_dir() { return DECAUG_TEST_DATA; }
inline std::filesystem::path fixture_json() { return data_dir() / "fixture.json"; }
inline std::filesystem::path fixture_images() { return data_dir() / "images"; }

inline const decaug::Dataset& fixture() {
    static const decaug::Dataset ds = decaug::load_dataset(fixture_json(), fixture_images());
    return ds;
}

/// Fresh scratch directory, removed when the object dies.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 g(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("decaug-" + tag + "-" + std::to_string(g()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// FNV-1a over every regular file of a tree, in sorted path order, names included.
inline std::uint64_t tree_hash(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = decaug::fnv1a("");
    for (const auto& f : files) {
        h = decaug::fnv1a(std::filesystem::relative(f, root).string(), h);
        h = decaug::fnv1a(slurp(f), h);
    }
    return h;
}

}  // namespace support
