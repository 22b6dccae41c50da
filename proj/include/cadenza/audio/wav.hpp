#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cadenza/audio/buffer.hpp"
#include "cadenza/core/error.hpp"

namespace cadenza::audio {

// RIFF/WAVE reader and writer. PCM 16/24-bit and IEEE float32; multi-channel
// input is downmixed by channel average. Write quantization: full scale maps
// to the integer maximum (32767 at 16-bit), read divides by the same, so a
// round trip stays within half an LSB.

namespace detail {

inline std::uint32_t rd_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t rd_u16(const std::uint8_t* p) {
    return std::uint16_t(p[0] | (p[1] << 8));
}
inline void wr_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}
inline void wr_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

} // namespace detail

inline AudioBuffer read_wav(const std::vector<std::uint8_t>& bytes) {
    using namespace detail;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw ParseError("wav: not a RIFF/WAVE file");

    std::size_t pos = 12;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const std::uint8_t* data = nullptr;
    std::size_t data_len = 0;

    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = rd_u32(bytes.data() + pos + 4);
        pos += 8;
        if (pos + len > bytes.size())
            throw ParseError("wav: chunk '" + std::string(tag, 4) + "' overruns file at byte " +
                             std::to_string(pos));
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (len < 16) throw ParseError("wav: fmt chunk too short");
            format = rd_u16(bytes.data() + pos);
            channels = rd_u16(bytes.data() + pos + 2);
            sample_rate = rd_u32(bytes.data() + pos + 4);
            bits = rd_u16(bytes.data() + pos + 14);
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = bytes.data() + pos;
            data_len = len;
        }
        pos += len + (len & 1); // chunks are word aligned
    }
    if (!channels || !sample_rate) throw ParseError("wav: missing fmt chunk");
    if (!data) throw ParseError("wav: missing data chunk");
    if (format != 1 && format != 3)
        throw ParseError("wav: unsupported compression format " + std::to_string(format) +
                         " (PCM and IEEE float only)");
    if (format == 1 && bits != 16 && bits != 24)
        throw ParseError("wav: unsupported PCM bit depth " + std::to_string(bits));
    if (format == 3 && bits != 32)
        throw ParseError("wav: unsupported float bit depth " + std::to_string(bits));

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_size = bytes_per_sample * channels;
    const std::size_t frames = data_len / frame_size;

    AudioBuffer buf;
    buf.sample_rate = double(sample_rate);
    buf.samples.reserve(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = data + f * frame_size + c * bytes_per_sample;
            double v = 0.0;
            if (format == 3) {
                float fv;
                std::memcpy(&fv, p, 4);
                v = double(fv);
            } else if (bits == 16) {
                const auto raw = std::int16_t(rd_u16(p));
                v = double(raw) / 32767.0;
            } else { // 24-bit
                std::int32_t raw = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) |
                                   (std::int32_t(p[2]) << 16);
                if (raw & 0x800000) raw |= ~0xffffff; // sign extend
                v = double(raw) / 8388607.0;
            }
            acc += v;
        }
        buf.samples.push_back(std::clamp(acc / double(channels), -1.0, 1.0));
    }
    return buf;
}

struct LoopPoints {
    std::uint32_t start = 0;
    std::uint32_t end = 0; // inclusive sample index
};

inline std::vector<std::uint8_t> write_wav(const AudioBuffer& buf, int bit_depth = 16,
                                           std::optional<LoopPoints> loop = std::nullopt) {
    using namespace detail;
    buf.validate();
    if (bit_depth != 16 && bit_depth != 24 && bit_depth != 32)
        throw ConfigError("wav: bit depth must be 16, 24 or 32 (float)");

    std::vector<std::uint8_t> pcm;
    pcm.reserve(buf.samples.size() * std::size_t(bit_depth / 8));
    for (double s : buf.samples) {
        const double x = std::clamp(s, -1.0, 1.0);
        if (bit_depth == 16) {
            const auto q = std::int16_t(std::llround(x * 32767.0));
            wr_u16(pcm, std::uint16_t(q));
        } else if (bit_depth == 24) {
            const auto q = std::int32_t(std::llround(x * 8388607.0));
            pcm.push_back(std::uint8_t(q));
            pcm.push_back(std::uint8_t(q >> 8));
            pcm.push_back(std::uint8_t(q >> 16));
        } else {
            const float f = float(x);
            std::uint32_t raw;
            std::memcpy(&raw, &f, 4);
            wr_u32(pcm, raw);
        }
    }

    std::vector<std::uint8_t> smpl;
    if (loop) {
        // minimal sampler chunk carrying one forward loop
        wr_u32(smpl, 0); // manufacturer
        wr_u32(smpl, 0); // product
        wr_u32(smpl, std::uint32_t(std::llround(1e9 / buf.sample_rate))); // sample period ns
        wr_u32(smpl, 60); // unity note
        wr_u32(smpl, 0);  // pitch fraction
        wr_u32(smpl, 0);  // smpte format
        wr_u32(smpl, 0);  // smpte offset
        wr_u32(smpl, 1);  // loop count
        wr_u32(smpl, 0);  // sampler data
        wr_u32(smpl, 0);  // loop id
        wr_u32(smpl, 0);  // loop type forward
        wr_u32(smpl, loop->start);
        wr_u32(smpl, loop->end);
        wr_u32(smpl, 0); // fraction
        wr_u32(smpl, 0); // play count (infinite)
    }

    const std::uint16_t fmt_tag = (bit_depth == 32) ? 3 : 1;
    const std::uint16_t block_align = std::uint16_t(bit_depth / 8);
    const std::uint32_t data_pad = pcm.size() & 1; // chunks are word aligned
    const std::uint32_t riff_len = 4 + (8 + 16) + (smpl.empty() ? 0 : 8 + std::uint32_t(smpl.size())) +
                                   (8 + std::uint32_t(pcm.size()) + data_pad);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    wr_u32(out, riff_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    wr_u32(out, 16);
    wr_u16(out, fmt_tag);
    wr_u16(out, 1); // mono
    wr_u32(out, std::uint32_t(std::llround(buf.sample_rate)));
    wr_u32(out, std::uint32_t(std::llround(buf.sample_rate)) * block_align);
    wr_u16(out, block_align);
    wr_u16(out, std::uint16_t(bit_depth));
    if (!smpl.empty()) {
        out.insert(out.end(), {'s', 'm', 'p', 'l'});
        wr_u32(out, std::uint32_t(smpl.size()));
        out.insert(out.end(), smpl.begin(), smpl.end());
    }
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    wr_u32(out, std::uint32_t(pcm.size()));
    out.insert(out.end(), pcm.begin(), pcm.end());
    if (data_pad) out.push_back(0);
    return out;
}

inline AudioBuffer read_wav_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open wav file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    return read_wav(bytes);
}

inline void write_wav_file(const AudioBuffer& buf, const std::string& path, int bit_depth = 16,
                           std::optional<LoopPoints> loop = std::nullopt) {
    const auto bytes = write_wav(buf, bit_depth, loop);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open wav file for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw IoError("failed writing wav file: " + path);
}

} // namespace cadenza::audio
