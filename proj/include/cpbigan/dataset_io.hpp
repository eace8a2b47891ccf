#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cpbigan/data.hpp"
#include "cpbigan/errors.hpp"
#include "cpbigan/rng.hpp"

// On-disk dataset layout:
//
//   <path>       text manifest, one key per line, then one "r" line per record:
//                r <id> <label> <tp0_present> <tp1_present> <factor mask bits> <blob offset>
//   <path>.bin   little-endian float32 payload; per record 14 factor values,
//                then tp0 pixels, then tp1 pixels (always stored, even if absent)
//
// Normalization stats are written as C99 hex floats so they round-trip exactly.

namespace cpbigan {

inline constexpr const char* kDatasetMagic = "cpbigan-dataset";
inline constexpr int kDatasetVersion = 1;
inline constexpr std::size_t kRecordFloats = kNumFactors + 2 * kImagePixels;

namespace detail {

inline void put_f32(std::string& out, float v) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFu));
}

inline float get_f32(const std::string& in, std::size_t pos) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= std::uint32_t{static_cast<unsigned char>(in[pos + b])} << (8 * b);
    return std::bit_cast<float>(u);
}

inline std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + p.string());
}

} // namespace detail

/// FNV-1a 64 digest rendered as 16 hex digits.
inline std::string digest_hex(std::string_view bytes) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes);
    return os.str();
}

inline std::string file_digest(const std::filesystem::path& p) { return digest_hex(detail::read_file(p)); }

struct SerializedDataset {
    std::string manifest;
    std::string blob;
};

inline SerializedDataset serialize_dataset(const Dataset& d, const std::string& blob_name) {
    SerializedDataset s;
    std::ostringstream m;
    m << kDatasetMagic << ' ' << kDatasetVersion << '\n';
    m << "split " << split_name(d.split) << '\n';
    m << "factors " << kNumFactors << '\n';
    m << "pixels " << kImagePixels << '\n';
    m << "records " << d.records.size() << '\n';
    m << "blob " << blob_name << '\n';
    m << "blob_bytes " << d.records.size() * kRecordFloats * 4 << '\n';
    auto stat_line = [&](const char* key, const std::vector<double>& v) {
        m << key << ' ' << v.size();
        for (double x : v) m << ' ' << detail::hexfloat(x);
        m << '\n';
    };
    stat_line("stats.mean", d.stats.mean);
    stat_line("stats.min", d.stats.min);
    stat_line("stats.max", d.stats.max);
    s.blob.reserve(d.records.size() * kRecordFloats * 4);
    for (const auto& r : d.records) {
        if (r.factors.values.size() != kNumFactors || r.factors.mask.size() != kNumFactors)
            throw DataError("serialize_dataset: record " + std::to_string(r.id) + " has wrong factor count");
        m << "r " << r.id << ' ' << r.label << ' ' << int(r.images.tp0_present) << ' ' << int(r.images.tp1_present)
          << ' ';
        for (auto b : r.factors.mask) m << int(b);
        m << ' ' << s.blob.size() << '\n';
        for (float v : r.factors.values) detail::put_f32(s.blob, v);
        for (float v : r.images.tp0.pixels) detail::put_f32(s.blob, v);
        for (float v : r.images.tp1.pixels) detail::put_f32(s.blob, v);
    }
    s.manifest = m.str();
    return s;
}

inline Dataset deserialize_dataset(const std::string& manifest, const std::string& blob) {
    std::istringstream in(manifest);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) -> void {
        throw DataError("dataset manifest line " + std::to_string(lineno) + ": " + why);
    };
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) fail("unexpected end of manifest");
        ++lineno;
        return std::istringstream(line);
    };
    auto expect_key = [&](std::istringstream& ls, const char* key) {
        std::string k;
        if (!(ls >> k) || k != key) fail(std::string("expected key '") + key + "'");
    };

    Dataset d;
    {
        auto ls = next_line();
        std::string magic;
        int version = 0;
        if (!(ls >> magic >> version) || magic != kDatasetMagic) fail("bad magic");
        if (version != kDatasetVersion) fail("unsupported version " + std::to_string(version));
    }
    {
        auto ls = next_line();
        expect_key(ls, "split");
        std::string s;
        ls >> s;
        if (s == "train") d.split = Split::train;
        else if (s == "validation") d.split = Split::validation;
        else if (s == "test") d.split = Split::test;
        else fail("unknown split '" + s + "'");
    }
    std::size_t nrec = 0, blob_bytes = 0;
    {
        auto ls = next_line();
        expect_key(ls, "factors");
        int f = 0;
        if (!(ls >> f) || f != kNumFactors) fail("factor count mismatch");
    }
    {
        auto ls = next_line();
        expect_key(ls, "pixels");
        int p = 0;
        if (!(ls >> p) || p != kImagePixels) fail("pixel count mismatch");
    }
    {
        auto ls = next_line();
        expect_key(ls, "records");
        if (!(ls >> nrec)) fail("bad record count");
    }
    {
        auto ls = next_line();
        expect_key(ls, "blob");
    }
    {
        auto ls = next_line();
        expect_key(ls, "blob_bytes");
        if (!(ls >> blob_bytes)) fail("bad blob size");
        if (blob_bytes != nrec * kRecordFloats * 4) fail("blob size inconsistent with record count");
    }
    auto read_stats = [&](const char* key, std::vector<double>& out) {
        auto ls = next_line();
        expect_key(ls, key);
        std::size_t n = 0;
        if (!(ls >> n)) fail("bad stats length");
        out.resize(n);
        for (auto& v : out) {
            std::string tok;
            if (!(ls >> tok)) fail("truncated stats");
            char* end = nullptr;
            v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') fail("bad stats value '" + tok + "'");
        }
    };
    read_stats("stats.mean", d.stats.mean);
    read_stats("stats.min", d.stats.min);
    read_stats("stats.max", d.stats.max);

    if (blob.size() < blob_bytes)
        throw DataError("dataset payload truncated at byte " + std::to_string(blob.size()) + " (expected " +
                        std::to_string(blob_bytes) + ")");
    if (blob.size() > blob_bytes)
        throw DataError("dataset payload has trailing bytes from offset " + std::to_string(blob_bytes));

    d.records.reserve(nrec);
    for (std::size_t i = 0; i < nrec; ++i) {
        auto ls = next_line();
        std::string tag, maskbits;
        MultiModalRecord r;
        int tp0 = 0, tp1 = 0;
        std::size_t offset = 0;
        if (!(ls >> tag >> r.id >> r.label >> tp0 >> tp1 >> maskbits >> offset) || tag != "r") fail("bad record line");
        if (r.label != 0 && r.label != 1) fail("label must be 0 or 1");
        if ((tp0 != 0 && tp0 != 1) || (tp1 != 0 && tp1 != 1)) fail("presence flags must be 0 or 1");
        if (maskbits.size() != kNumFactors) fail("mask must have " + std::to_string(kNumFactors) + " bits");
        r.images.tp0_present = tp0 == 1;
        r.images.tp1_present = tp1 == 1;
        for (std::size_t j = 0; j < maskbits.size(); ++j) {
            if (maskbits[j] != '0' && maskbits[j] != '1') fail("mask bit is not 0/1");
            r.factors.mask[j] = static_cast<std::uint8_t>(maskbits[j] - '0');
        }
        if (offset % 4 != 0 || offset + kRecordFloats * 4 > blob.size())
            throw DataError("dataset record " + std::to_string(i) + " payload offset " + std::to_string(offset) +
                            " out of range");
        std::size_t pos = offset;
        for (auto& v : r.factors.values) { v = detail::get_f32(blob, pos); pos += 4; }
        for (auto& v : r.images.tp0.pixels) { v = detail::get_f32(blob, pos); pos += 4; }
        for (auto& v : r.images.tp1.pixels) { v = detail::get_f32(blob, pos); pos += 4; }
        d.records.push_back(std::move(r));
    }
    if (std::getline(in, line) && !line.empty()) {
        ++lineno;
        fail("unexpected trailing content");
    }
    return d;
}

inline std::filesystem::path blob_path(const std::filesystem::path& manifest) {
    auto p = manifest;
    p += ".bin";
    return p;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    auto s = serialize_dataset(d, blob_path(path).filename().string());
    detail::write_file(path, s.manifest);
    detail::write_file(blob_path(path), s.blob);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    return deserialize_dataset(detail::read_file(path), detail::read_file(blob_path(path)));
}

} // namespace cpbigan
