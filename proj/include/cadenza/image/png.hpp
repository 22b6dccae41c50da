#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/image/raster.hpp"

namespace cadenza::image {

// Self-contained PNG writer: RGBA8, no interlace, filter 0 rows, and an
// in-house fixed-Huffman deflate. Owning the encoder keeps golden-image
// byte equality stable across environments.

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n,
                           std::uint32_t crc = 0xffffffffu) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

inline std::uint32_t adler32(const std::uint8_t* data, std::size_t n) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

class BitWriter {
public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    /// LSB-first bit packing (deflate's base order).
    void bits(std::uint32_t value, int count) {
        for (int i = 0; i < count; ++i) {
            acc_ |= ((value >> i) & 1u) << nbits_;
            if (++nbits_ == 8) flush_byte();
        }
    }

    /// Huffman codes go most-significant-bit first.
    void huff(std::uint32_t code, int count) {
        for (int i = count - 1; i >= 0; --i) {
            acc_ |= ((code >> i) & 1u) << nbits_;
            if (++nbits_ == 8) flush_byte();
        }
    }

    void align() {
        if (nbits_) flush_byte();
    }

private:
    void flush_byte() {
        out_.push_back(std::uint8_t(acc_));
        acc_ = 0;
        nbits_ = 0;
    }
    std::vector<std::uint8_t>& out_;
    std::uint32_t acc_ = 0;
    int nbits_ = 0;
};

inline void put_fixed_litlen(BitWriter& bw, int sym) {
    if (sym < 144) bw.huff(std::uint32_t(0x30 + sym), 8);
    else if (sym < 256) bw.huff(std::uint32_t(0x190 + sym - 144), 9);
    else if (sym < 280) bw.huff(std::uint32_t(sym - 256), 7);
    else bw.huff(std::uint32_t(0xc0 + sym - 280), 8);
}

struct LenCode {
    int code, extra_bits, extra_val;
};

inline LenCode length_code(int len) { // len in 3..258
    static const int base[] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                               31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
    static const int extra[] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                                2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
    int i = 28;
    while (base[i] > len) --i;
    return {257 + i, extra[i], len - base[i]};
}

inline LenCode distance_code(int dist) { // dist in 1..32768
    static const int base[] = {1,    2,    3,    4,    5,    7,     9,     13,    17,  25,
                               33,   49,   65,   97,   129,  193,   257,   385,   513, 769,
                               1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
    static const int extra[] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                                6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};
    int i = 29;
    while (base[i] > dist) --i;
    return {i, extra[i], dist - base[i]};
}

} // namespace detail

/// zlib stream (fixed-Huffman deflate with greedy single-chain LZ77).
inline std::vector<std::uint8_t> zlib_compress(const std::uint8_t* data, std::size_t n) {
    std::vector<std::uint8_t> out;
    out.push_back(0x78);
    out.push_back(0x9c);

    detail::BitWriter bw(out);
    bw.bits(1, 1); // final block
    bw.bits(1, 2); // fixed huffman

    constexpr std::size_t kHashSize = 1 << 15;
    std::vector<std::int64_t> head(kHashSize, -1);
    auto hash3 = [&](std::size_t i) {
        const std::uint32_t v = (std::uint32_t(data[i]) << 16) | (std::uint32_t(data[i + 1]) << 8) |
                                std::uint32_t(data[i + 2]);
        return std::size_t((v * 2654435761u) >> 17) & (kHashSize - 1);
    };

    std::size_t i = 0;
    while (i < n) {
        int match_len = 0;
        std::size_t match_dist = 0;
        if (i + 2 < n) {
            const std::size_t h = hash3(i);
            const std::int64_t cand = head[h];
            head[h] = std::int64_t(i);
            if (cand >= 0 && i - std::size_t(cand) <= 32768) {
                const std::size_t dist = i - std::size_t(cand);
                const std::size_t max_len = std::min<std::size_t>(258, n - i);
                std::size_t len = 0;
                while (len < max_len && data[std::size_t(cand) + len] == data[i + len]) ++len;
                if (len >= 3) {
                    match_len = int(len);
                    match_dist = dist;
                }
            }
        }
        if (match_len >= 3) {
            const auto lc = detail::length_code(match_len);
            detail::put_fixed_litlen(bw, lc.code);
            if (lc.extra_bits) bw.bits(std::uint32_t(lc.extra_val), lc.extra_bits);
            const auto dc = detail::distance_code(int(match_dist));
            bw.huff(std::uint32_t(dc.code), 5);
            if (dc.extra_bits) bw.bits(std::uint32_t(dc.extra_val), dc.extra_bits);
            // keep the hash chain warm across the match
            const std::size_t stop = std::min(i + std::size_t(match_len), n - 3);
            for (std::size_t j = i + 1; j < stop; ++j) head[hash3(j)] = std::int64_t(j);
            i += std::size_t(match_len);
        } else {
            detail::put_fixed_litlen(bw, data[i]);
            ++i;
        }
    }
    detail::put_fixed_litlen(bw, 256); // end of block
    bw.align();

    const std::uint32_t adler = detail::adler32(data, n);
    out.push_back(std::uint8_t(adler >> 24));
    out.push_back(std::uint8_t(adler >> 16));
    out.push_back(std::uint8_t(adler >> 8));
    out.push_back(std::uint8_t(adler));
    return out;
}

namespace detail {

inline void png_chunk(std::vector<std::uint8_t>& out, const char* tag,
                      const std::vector<std::uint8_t>& payload) {
    const auto len = std::uint32_t(payload.size());
    out.push_back(std::uint8_t(len >> 24));
    out.push_back(std::uint8_t(len >> 16));
    out.push_back(std::uint8_t(len >> 8));
    out.push_back(std::uint8_t(len));
    std::vector<std::uint8_t> body(tag, tag + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    const std::uint32_t crc = crc32(body.data(), body.size()) ^ 0xffffffffu;
    out.push_back(std::uint8_t(crc >> 24));
    out.push_back(std::uint8_t(crc >> 16));
    out.push_back(std::uint8_t(crc >> 8));
    out.push_back(std::uint8_t(crc));
}

} // namespace detail

/// Encode as 8-bit RGBA PNG. Deterministic: identical rasters give identical bytes.
inline std::vector<std::uint8_t> png_encode(const Raster& img) {
    if (img.width == 0 || img.height == 0) throw ConfigError("png: empty raster");

    std::vector<std::uint8_t> raw;
    raw.reserve(img.height * (1 + img.width * 4));
    for (std::size_t y = 0; y < img.height; ++y) {
        raw.push_back(0); // filter: none
        const std::uint8_t* row = img.rgba.data() + y * img.width * 4;
        raw.insert(raw.end(), row, row + img.width * 4);
    }

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    auto be32 = [&](std::vector<std::uint8_t>& v, std::uint32_t x) {
        v.push_back(std::uint8_t(x >> 24));
        v.push_back(std::uint8_t(x >> 16));
        v.push_back(std::uint8_t(x >> 8));
        v.push_back(std::uint8_t(x));
    };
    be32(ihdr, std::uint32_t(img.width));
    be32(ihdr, std::uint32_t(img.height));
    ihdr.insert(ihdr.end(), {8, 6, 0, 0, 0}); // 8-bit RGBA
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", zlib_compress(raw.data(), raw.size()));
    detail::png_chunk(out, "IEND", {});
    return out;
}

inline void png_write_file(const Raster& img, const std::string& path) {
    const auto bytes = png_encode(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open png for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw IoError("failed writing png: " + path);
}

} // namespace cadenza::image
