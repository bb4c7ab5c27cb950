#include "dift/diffusion/feature_cache.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "dift/core/encoding.hpp"
#include "dift/core/errors.hpp"

namespace dift {
namespace {

constexpr char kMagic[4] = {'D', 'I', 'F', 'T'};

template <typename T>
void put_le(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw DecodeError("feature file truncated");
    T value;
    std::memcpy(&value, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace

std::string encode_feature_file(const FeatureMap& features) {
    nlohmann::ordered_json meta = nlohmann::ordered_json::parse(features.meta_json(), nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) meta = nlohmann::ordered_json::object();
    meta["source_height"] = features.source_dims().height;
    meta["source_width"] = features.source_dims().width;
    const std::string meta_text = meta.dump();

    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint16_t>(out, kFeatureFileVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.channels()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.height()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.width()));
    out += pack_f32(features.data().values());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
    out += meta_text;
    return out;
}

FeatureMap decode_feature_file(std::string_view bytes) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw DecodeError("not a feature file (bad magic)");
    }
    std::size_t pos = sizeof kMagic;
    const auto version = get_le<std::uint16_t>(bytes, pos);
    if (version != kFeatureFileVersion) throw DecodeError("unsupported feature file version " + std::to_string(version));
    const auto c = get_le<std::uint32_t>(bytes, pos);
    const auto h = get_le<std::uint32_t>(bytes, pos);
    const auto w = get_le<std::uint32_t>(bytes, pos);
    const std::size_t count = static_cast<std::size_t>(c) * h * w;
    if (count == 0 || pos + count * 4 > bytes.size()) throw DecodeError("feature file truncated");
    auto values = unpack_f32(bytes.substr(pos, count * 4));
    pos += count * 4;
    const auto meta_len = get_le<std::uint32_t>(bytes, pos);
    if (pos + meta_len != bytes.size()) throw DecodeError("feature file metadata length mismatch");
    const std::string meta_text(bytes.substr(pos, meta_len));

    const auto meta = nlohmann::ordered_json::parse(meta_text, nullptr, false);
    if (meta.is_discarded() || !meta.contains("source_height") || !meta.contains("source_width")) {
        throw DecodeError("feature file metadata lacks source dims");
    }
    const Dims source{meta["source_height"].get<int>(), meta["source_width"].get<int>()};
    auto stripped = meta;
    stripped.erase("source_height");
    stripped.erase("source_width");
    return FeatureMap(Tensor3<float>(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w), std::move(values)),
                      source, stripped.dump());
}

void write_feature_file(const std::filesystem::path& path, const FeatureMap& features) {
    const std::string bytes = encode_feature_file(features);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write feature file " + tmp);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

FeatureMap read_feature_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw NotFoundError("cannot open feature file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return decode_feature_file(ss.str());
}

std::string feature_cache_key(const ImageRef& image, std::string_view backend_id, const ExtractionConfig& cfg) {
    std::ostringstream os;
    os << "image_id_len=" << image.id().size() << ";image_id=" << image.id() << ";digest=" << image.content_digest()
       << ";backend_len=" << backend_id.size() << ";backend=" << backend_id << ";" << cfg.canonical();
    return sha256_hex(os.str());
}

FeatureCache::FeatureCache(std::optional<std::filesystem::path> directory, std::size_t max_entries)
    : directory_(std::move(directory)), max_entries_(std::max<std::size_t>(1, max_entries)) {
    if (directory_) std::filesystem::create_directories(*directory_);
}

std::filesystem::path FeatureCache::file_for(const std::string& key) const {
    return *directory_ / (key + ".dift");
}

std::optional<FeatureMap> FeatureCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) return it->second.value;
    }
    if (directory_) {
        const auto path = file_for(key);
        std::error_code ec;
        if (std::filesystem::exists(path, ec)) {
            try {
                return read_feature_file(path);
            } catch (const DecodeError&) {
                return std::nullopt;  // corrupt entry: treat as a miss, it will be rewritten
            }
        }
    }
    return std::nullopt;
}

void FeatureCache::put(const std::string& key, const FeatureMap& value) {
    std::unique_lock lock(mutex_);
    if (entries_.size() >= max_entries_ && !entries_.contains(key)) {
        auto oldest = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
            return a.second.created_at < b.second.created_at;
        });
        entries_.erase(oldest);
    }
    entries_.insert_or_assign(key, FeatureCacheEntry{key, value, std::chrono::system_clock::now()});
    if (directory_) write_feature_file(file_for(key), value);
}

std::size_t FeatureCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

}  // namespace dift
