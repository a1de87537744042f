#include "scope/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "scope/det_rng.hpp"

namespace scope::io {
namespace {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class ByteReader {
public:
    ByteReader(std::string bytes, std::filesystem::path path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }

    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::vector<std::uint8_t> raw(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> v(n);
        std::memcpy(v.data(), bytes_.data() + pos_, n);
        pos_ += n;
        return v;
    }

    void expect_magic(const char* magic) {
        if (bytes_.size() < 4)
            raise(Errc::truncated_file, path_.string() + ": shorter than a header");
        if (bytes_.compare(0, 4, magic, 4) != 0)
            raise(Errc::bad_magic, path_.string() + ": bad magic, expected " + magic);
        pos_ = 4;
    }

    void expect_version(std::uint32_t wanted) {
        const std::uint32_t v = u32();
        if (v != wanted)
            raise(Errc::bad_version,
                  path_.string() + ": unsupported version " + std::to_string(v));
    }

    void expect_end() const {
        if (pos_ != bytes_.size())
            raise(Errc::truncated_file, path_.string() + ": trailing bytes after payload");
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size())
            raise(Errc::truncated_file, path_.string() + ": payload shorter than header implies");
    }

    std::string bytes_;
    std::filesystem::path path_;
    std::size_t pos_ = 0;
};

ByteReader read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_failure, path.string() + ": cannot open for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) raise(Errc::io_failure, path.string() + ": read failed");
    return ByteReader(std::move(bytes), path);
}

void check_finite(const std::vector<float>& values, const std::filesystem::path& path) {
    for (float v : values)
        if (!std::isfinite(v))
            raise(Errc::non_finite_value, path.string() + ": non-finite value in payload");
}

void check_confidence(float c, const std::filesystem::path& path) {
    if (!(c >= 0.0f && c <= 1.0f))
        raise(Errc::confidence_out_of_range,
              path.string() + ": confidence " + std::to_string(c) + " outside [0,1]");
}

} // namespace

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(Errc::io_failure, tmp.string() + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) raise(Errc::io_failure, tmp.string() + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) raise(Errc::io_failure, path.string() + ": rename failed: " + ec.message());
}

void save_scene(const PointCloudScene& scene, const std::filesystem::path& path) {
    if (scene.points.size() != scene.point_count * scene.feature_dim)
        raise(Errc::dim_mismatch, "save_scene: point buffer does not match M x d0");
    if (!scene.labels.empty() && scene.labels.size() != scene.point_count)
        raise(Errc::length_mismatch, "save_scene: label count does not match M");
    // All-background equals absent labels to the loader; encode it as absent so
    // save∘load is a byte-exact identity.
    const bool labelled =
        std::any_of(scene.labels.begin(), scene.labels.end(),
                    [](std::int32_t l) { return l != kBackgroundLabel; });
    check_finite(scene.points, path);

    std::string out;
    out.reserve(17 + scene.points.size() * 4 + (labelled ? scene.point_count * 4 : 0));
    out.append("SCNB");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(scene.point_count));
    put_u32(out, static_cast<std::uint32_t>(scene.feature_dim));
    put_u8(out, labelled ? 1 : 0);
    for (float v : scene.points) put_f32(out, v);
    if (labelled)
        for (std::int32_t l : scene.labels) put_i32(out, l);
    atomic_write(path, out);
}

PointCloudScene load_scene(const std::filesystem::path& path) {
    ByteReader r = read_file(path);
    r.expect_magic("SCNB");
    r.expect_version(1);
    const std::uint32_t m = r.u32();
    const std::uint32_t d0 = r.u32();
    if (m < 1) raise(Errc::empty_scene, path.string() + ": zero points");
    if (d0 < 3) raise(Errc::dim_mismatch, path.string() + ": d0 below the XYZ minimum");
    const std::uint8_t labelled = r.u8();

    PointCloudScene scene;
    scene.scene_id = path.stem().string();
    scene.point_count = m;
    scene.feature_dim = d0;
    scene.points.resize(static_cast<std::size_t>(m) * d0);
    for (float& v : scene.points) v = r.f32();
    check_finite(scene.points, path);
    scene.labels.resize(m, kBackgroundLabel);
    if (labelled)
        for (std::int32_t& l : scene.labels) l = r.i32();
    r.expect_end();
    return scene;
}

void save_masks(const std::vector<InstanceMask>& masks, std::size_t point_count,
                const std::filesystem::path& path) {
    const std::size_t stride = (point_count + 7) / 8;
    std::string out;
    out.reserve(16 + masks.size() * (4 + stride));
    out.append("MSKB");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(point_count));
    put_u32(out, static_cast<std::uint32_t>(masks.size()));
    for (const InstanceMask& mask : masks) {
        if (mask.selection.size() != point_count)
            raise(Errc::dim_mismatch, "save_masks: mask length does not match M");
        check_confidence(mask.confidence, path);
        put_f32(out, mask.confidence);
        for (std::uint8_t b : mask.selection.bytes()) out.push_back(static_cast<char>(b));
    }
    atomic_write(path, out);
}

std::vector<InstanceMask> load_masks(const std::filesystem::path& path,
                                     std::size_t expected_point_count) {
    ByteReader r = read_file(path);
    r.expect_magic("MSKB");
    r.expect_version(1);
    const std::uint32_t m = r.u32();
    const std::uint32_t q = r.u32();
    if (m != expected_point_count)
        raise(Errc::dim_mismatch, path.string() + ": mask length " + std::to_string(m) +
                                      " does not match scene M " +
                                      std::to_string(expected_point_count));

    const std::size_t stride = (static_cast<std::size_t>(m) + 7) / 8;
    std::vector<InstanceMask> masks;
    masks.reserve(q);
    for (std::uint32_t i = 0; i < q; ++i) {
        InstanceMask mask;
        mask.confidence = r.f32();
        check_confidence(mask.confidence, path);
        mask.selection = Bitset(m, r.raw(stride));
        mask.mask_index = i;
        masks.push_back(std::move(mask));
    }
    r.expect_end();
    return masks;
}

void save_embedding(const EmbeddingMatrix& embedding, const std::filesystem::path& path) {
    if (embedding.data.size() != embedding.point_count * embedding.dim)
        raise(Errc::dim_mismatch, "save_embedding: buffer does not match M x D");
    check_finite(embedding.data, path);
    std::string out;
    out.reserve(16 + embedding.data.size() * 4);
    out.append("EMBB");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(embedding.point_count));
    put_u32(out, static_cast<std::uint32_t>(embedding.dim));
    for (float v : embedding.data) put_f32(out, v);
    atomic_write(path, out);
}

EmbeddingMatrix load_embedding(const std::filesystem::path& path) {
    ByteReader r = read_file(path);
    r.expect_magic("EMBB");
    r.expect_version(1);
    const std::uint32_t m = r.u32();
    const std::uint32_t d = r.u32();
    if (d < 1) raise(Errc::dim_mismatch, path.string() + ": zero embedding dim");

    EmbeddingMatrix emb;
    emb.scene_id = path.stem().string();
    emb.point_count = m;
    emb.dim = d;
    emb.data.resize(static_cast<std::size_t>(m) * d);
    for (float& v : emb.data) v = r.f32();
    check_finite(emb.data, path);
    r.expect_end();
    return emb;
}

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path) {
    if (!bank.frozen()) raise(Errc::bad_config, "save_bank: bank must be frozen first");
    std::string out;
    out.append("IPBB");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(bank.size()));
    put_u32(out, static_cast<std::uint32_t>(bank.dim()));
    for (const Prototype& p : bank.prototypes()) {
        const auto& prov = std::get<BankProvenance>(p.provenance);
        put_u32(out, static_cast<std::uint32_t>(prov.scene_id.size()));
        out.append(prov.scene_id);
        put_u32(out, prov.mask_index);
        for (float v : p.values) put_f32(out, v);
    }
    atomic_write(path, out);
}

PrototypeBank load_bank(const std::filesystem::path& path) {
    ByteReader r = read_file(path);
    r.expect_magic("IPBB");
    r.expect_version(1);
    const std::uint32_t count = r.u32();
    const std::uint32_t d = r.u32();

    PrototypeBank bank(d);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t id_len = r.u32();
        BankProvenance prov;
        prov.scene_id = r.str(id_len);
        prov.mask_index = r.u32();
        Prototype p;
        p.provenance = prov;
        p.values.resize(d);
        for (float& v : p.values) v = r.f32();
        bank.append(std::move(p));
    }
    r.expect_end();
    bank.freeze();
    return bank;
}

std::vector<PointCloudScene> partition_scene(const PointCloudScene& raw, float block_size_m,
                                             int sample_count, std::uint64_t seed) {
    if (raw.point_count == 0) raise(Errc::empty_scene, "partition_scene: empty input");
    if (!(block_size_m > 0.0f)) raise(Errc::bad_config, "partition_scene: block size must be positive");
    if (sample_count < 1) raise(Errc::bad_config, "partition_scene: sample count must be >= 1");

    const std::size_t d0 = raw.feature_dim;
    float min_x = raw.points[0], min_y = raw.points[1];
    float min_z = raw.points[2], max_z = raw.points[2];
    for (std::size_t i = 0; i < raw.point_count; ++i) {
        const float* p = raw.points.data() + i * d0;
        min_x = std::min(min_x, p[0]);
        min_y = std::min(min_y, p[1]);
        min_z = std::min(min_z, p[2]);
        max_z = std::max(max_z, p[2]);
    }
    const float z_extent = max_z - min_z;

    // Bucket point indices by grid cell; the map keeps row-major (row = y)
    // order because the key is (gy, gx).
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> blocks;
    for (std::size_t i = 0; i < raw.point_count; ++i) {
        const float* p = raw.points.data() + i * d0;
        const auto gx = static_cast<std::int64_t>(std::floor((p[0] - min_x) / block_size_m));
        const auto gy = static_cast<std::int64_t>(std::floor((p[1] - min_y) / block_size_m));
        blocks[{gy, gx}].push_back(i);
    }

    std::vector<PointCloudScene> out;
    out.reserve(blocks.size());
    const std::uint64_t scene_key = rng::mix(seed, rng::fnv1a(raw.scene_id));
    std::size_t ordinal = 0;
    for (const auto& [cell, members] : blocks) {
        const auto n = static_cast<std::size_t>(sample_count);
        rng::Stream stream(rng::mix(scene_key, rng::mix(static_cast<std::uint64_t>(cell.first),
                                                        static_cast<std::uint64_t>(cell.second))));
        std::vector<std::size_t> picks;
        picks.reserve(n);
        if (members.size() >= n) {
            // Partial Fisher-Yates: the first n entries of a seeded shuffle.
            std::vector<std::size_t> pool = members;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(
                                              stream.next_below(pool.size() - i));
                std::swap(pool[i], pool[j]);
                picks.push_back(pool[i]);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i)
                picks.push_back(members[stream.next_below(members.size())]);
        }

        PointCloudScene block;
        block.scene_id = raw.scene_id + "#" + std::to_string(ordinal);
        block.point_count = n;
        block.feature_dim = d0 + 3;
        block.points.resize(n * (d0 + 3));
        block.labels.resize(n, kBackgroundLabel);
        const float origin_x = min_x + static_cast<float>(cell.second) * block_size_m;
        const float origin_y = min_y + static_cast<float>(cell.first) * block_size_m;
        for (std::size_t i = 0; i < n; ++i) {
            const float* src = raw.points.data() + picks[i] * d0;
            float* dst = block.points.data() + i * (d0 + 3);
            std::memcpy(dst, src, d0 * sizeof(float));
            dst[d0 + 0] = (src[0] - origin_x) / block_size_m;
            dst[d0 + 1] = (src[1] - origin_y) / block_size_m;
            dst[d0 + 2] = z_extent > 0.0f ? (src[2] - min_z) / z_extent : 0.0f;
            if (!raw.labels.empty()) block.labels[i] = raw.labels[picks[i]];
        }
        out.push_back(std::move(block));
        ++ordinal;
    }
    return out;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_failure, path.string() + ": cannot open for checksum");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) raise(Errc::io_failure, path.string() + ": read failed");
    return rng::fnv1a(bytes);
}

} // namespace scope::io
