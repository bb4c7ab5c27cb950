#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "dift/core/types.hpp"
#include "dift/diffusion/schedule.hpp"

namespace dift {

// Feature file layout (all integers little-endian):
//   "DIFT" | u16 version | u32 C | u32 h | u32 w | C*h*w f32 | u32 meta length | meta (UTF-8 JSON)
// The metadata JSON carries the extraction config plus source_height/source_width.
inline constexpr std::uint16_t kFeatureFileVersion = 1;

std::string encode_feature_file(const FeatureMap& features);
FeatureMap decode_feature_file(std::string_view bytes);
void write_feature_file(const std::filesystem::path& path, const FeatureMap& features);
FeatureMap read_feature_file(const std::filesystem::path& path);

/// Hex SHA-256 over image identity (id and pixel digest), backend id and every config field.
std::string feature_cache_key(const ImageRef& image, std::string_view backend_id, const ExtractionConfig& cfg);

struct FeatureCacheEntry {
    std::string key;
    FeatureMap value;
    std::chrono::system_clock::time_point created_at;
};

/// In-memory feature cache with an optional on-disk mirror. Concurrent readers,
/// single writer. When full, the oldest in-memory entry is evicted; entries are
/// returned by value so eviction never invalidates a caller's copy.
class FeatureCache {
public:
    explicit FeatureCache(std::optional<std::filesystem::path> directory = std::nullopt,
                          std::size_t max_entries = 1024);

    std::optional<FeatureMap> get(const std::string& key) const;
    void put(const std::string& key, const FeatureMap& value);
    std::size_t size() const;
    const std::optional<std::filesystem::path>& directory() const { return directory_; }

private:
    std::filesystem::path file_for(const std::string& key) const;

    std::optional<std::filesystem::path> directory_;
    std::size_t max_entries_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, FeatureCacheEntry> entries_;
};

}  // namespace dift
