#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "decaug/annotations.hpp"
#include "decaug/mask_algebra.hpp"
#include "decaug/rng.hpp"

namespace decaug {

inline constexpr int kDefaultCandidatePool = 20;

/// Non-human instances grouped by category, each with its object state matrix
/// computed once against its own image's neighbours.
class CategoryIndex {
public:
    struct Entry {
        InstanceId id;
        ImageId image_id;
        ObjectStateMatrix state;

        friend bool operator==(const Entry&, const Entry&) = default;
    };

    void add(CategoryId category, Entry e) {
        lookup_[e.id] = {category, by_category_[category].size()};
        by_category_[category].push_back(std::move(e));
    }

    std::span<const Entry> entries(CategoryId category) const {
        auto it = by_category_.find(category);
        if (it == by_category_.end()) return {};
        return it->second;
    }

    const Entry* find(InstanceId id) const {
        auto it = lookup_.find(id);
        if (it == lookup_.end()) return nullptr;
        return &by_category_.at(it->second.first)[it->second.second];
    }

    const std::map<CategoryId, std::vector<Entry>>& categories() const { return by_category_; }
    bool empty() const { return by_category_.empty(); }

    friend bool operator==(const CategoryIndex& a, const CategoryIndex& b) { return a.by_category_ == b.by_category_; }

private:
    std::map<CategoryId, std::vector<Entry>> by_category_;
    std::unordered_map<InstanceId, std::pair<CategoryId, std::size_t>> lookup_;
};

inline CategoryIndex build_index(const Dataset& ds) {
    CategoryIndex index;
    std::vector<Instance> scratch;
    for (const auto& img : ds.images) {
        scratch.clear();
        for (std::size_t i : ds.instances_of(img.id)) scratch.push_back(ds.instances[i]);
        for (const auto& inst : scratch) {
            if (inst.is_human) continue;
            index.add(inst.category_id, {inst.id, inst.image_id, state_matrix(inst, scratch)});
        }
    }
    return index;
}

/// Up to k distinct same-category instances drawn uniformly without replacement from
/// images other than the excluded instance's image.
inline std::vector<InstanceId> sample_candidates(const CategoryIndex& index, CategoryId category,
                                                 InstanceId exclude, int k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("candidate pool size must be >= 1");
    std::optional<ImageId> home;
    if (const auto* e = index.find(exclude)) home = e->image_id;
    std::vector<InstanceId> pool;
    for (const auto& e : index.entries(category))
        if (e.id != exclude && (!home || e.image_id != *home)) pool.push_back(e.id);
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

struct ScoredCandidate {
    InstanceId id;
    double distance = 0.0;
};

/// Minimum state distance from `target`; ties go to the smallest id.
inline std::optional<ScoredCandidate> best_candidate(
    const ObjectStateMatrix& target, std::span<const std::pair<InstanceId, const ObjectStateMatrix*>> candidates) {
    std::optional<ScoredCandidate> best;
    for (const auto& [id, state] : candidates) {
        const double d = state_distance(target, *state);
        if (!best || d < best->distance || (d == best->distance && id < best->id)) best = ScoredCandidate{id, d};
    }
    return best;
}

// ---------------------------------------------------------------------------------
// On-disk cache

namespace index_cache {

inline constexpr char kMagic[8] = {'D', 'C', 'A', 'I', 'D', 'X', '0', '1'};
inline constexpr std::uint32_t kVersion = 1;

/// Hash of the dataset's canonical JSON; keys the cache file.
inline std::uint64_t content_hash(const Dataset& ds) { return fnv1a(dataset_to_json(ds).dump()); }

namespace detail {
template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DecodeError("truncated index cache");
    return v;
}
}  // namespace detail

inline void save(const CategoryIndex& index, std::uint64_t hash, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write index cache " + path.string());
    out.write(kMagic, sizeof(kMagic));
    detail::put<std::uint32_t>(out, kVersion);
    detail::put<std::uint64_t>(out, hash);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(index.categories().size()));
    for (const auto& [cat, entries] : index.categories()) {
        detail::put<std::int64_t>(out, cat.value);
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            detail::put<std::int64_t>(out, e.id.value);
            detail::put<std::int64_t>(out, e.image_id.value);
            detail::put<std::int32_t>(out, e.state.width);
            detail::put<std::int32_t>(out, e.state.height);
            out.write(reinterpret_cast<const char*>(e.state.cells.data()),
                      static_cast<std::streamsize>(e.state.cells.size()));
        }
    }
    if (!out) throw IoError("short write to index cache " + path.string());
}

/// nullopt when the file is absent, stale, or unreadable.
inline std::optional<CategoryIndex> load(const std::filesystem::path& path, std::uint64_t expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        char magic[8];
        in.read(magic, sizeof(magic));
        if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
        if (detail::take<std::uint32_t>(in) != kVersion) return std::nullopt;
        if (detail::take<std::uint64_t>(in) != expected_hash) return std::nullopt;
        CategoryIndex index;
        const auto ncat = detail::take<std::uint32_t>(in);
        for (std::uint32_t c = 0; c < ncat; ++c) {
            CategoryId cat(detail::take<std::int64_t>(in));
            const auto n = detail::take<std::uint32_t>(in);
            for (std::uint32_t i = 0; i < n; ++i) {
                CategoryIndex::Entry e;
                e.id = InstanceId(detail::take<std::int64_t>(in));
                e.image_id = ImageId(detail::take<std::int64_t>(in));
                e.state.width = detail::take<std::int32_t>(in);
                e.state.height = detail::take<std::int32_t>(in);
                if (e.state.width <= 0 || e.state.height <= 0) return std::nullopt;
                e.state.cells.resize(static_cast<std::size_t>(e.state.width) * e.state.height);
                in.read(reinterpret_cast<char*>(e.state.cells.data()), static_cast<std::streamsize>(e.state.cells.size()));
                if (!in) return std::nullopt;
                index.add(cat, std::move(e));
            }
        }
        return index;
    } catch (const DecodeError&) {
        return std::nullopt;
    }
}

/// Load the cached index for `ds`, rebuilding (and rewriting the cache) on a miss.
inline CategoryIndex load_or_build(const Dataset& ds, const std::filesystem::path& path) {
    const auto hash = content_hash(ds);
    if (auto cached = load(path, hash)) return std::move(*cached);
    CategoryIndex index = build_index(ds);
    try {
        save(index, hash, path);
    } catch (const IoError&) {
        // Cache is optional; an unwritable location just means no reuse next time.
    }
    return index;
}

}  // namespace index_cache
}  // namespace decaug
