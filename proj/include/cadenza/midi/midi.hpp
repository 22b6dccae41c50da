#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"

namespace cadenza::midi {

/// One note: onset/duration in seconds, MIDI pitch and velocity.
struct NoteEvent {
    double onset = 0.0;    // seconds >= 0
    double duration = 0.0; // seconds > 0
    int pitch = 0;         // 0..127
    int velocity = 0;      // 1..127

    bool operator==(const NoteEvent&) const = default;
};

/// Time-ordered note table with a per-event source tag.
struct NoteDataset {
    std::vector<NoteEvent> events;
    std::vector<std::string> source_labels; // parallel to events
    std::size_t unterminated_notes = 0;     // closed at track end with a warning

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }

    double end_time() const {
        double t = 0.0;
        for (const auto& e : events) t = std::max(t, e.onset + e.duration);
        return t;
    }

    /// Append another dataset shifted to start after this one ends, so the
    /// sorted-onsets invariant survives concatenation.
    void append_shifted(const NoteDataset& other) {
        const double offset = end_time();
        for (std::size_t i = 0; i < other.events.size(); ++i) {
            NoteEvent e = other.events[i];
            e.onset += offset;
            events.push_back(e);
            source_labels.push_back(other.source_labels[i]);
        }
        unterminated_notes += other.unterminated_notes;
    }
};

inline void sort_dataset(NoteDataset& d) {
    std::vector<std::size_t> idx(d.events.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (d.events[a].onset != d.events[b].onset) return d.events[a].onset < d.events[b].onset;
        return d.events[a].pitch < d.events[b].pitch;
    });
    NoteDataset out;
    out.unterminated_notes = d.unterminated_notes;
    for (std::size_t i : idx) {
        out.events.push_back(d.events[i]);
        out.source_labels.push_back(d.source_labels[i]);
    }
    d = std::move(out);
}

namespace detail {

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t offset() const { return pos_; }
    bool eof() const { return pos_ >= size_; }
    std::size_t remaining() const { return size_ - pos_; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint8_t peek() const {
        if (pos_ >= size_) throw ParseError("midi: unexpected end of data at byte " +
                                            std::to_string(pos_));
        return data_[pos_];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = (std::uint32_t(data_[pos_]) << 24) | (std::uint32_t(data_[pos_ + 1]) << 16) |
                          (std::uint32_t(data_[pos_ + 2]) << 8) | std::uint32_t(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }
    /// Variable-length quantity, at most 4 bytes.
    std::uint32_t varint() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7f);
            if (!(b & 0x80)) return v;
        }
        throw ParseError("midi: varint longer than 4 bytes at byte " + std::to_string(pos_));
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    void expect_tag(const char* tag) {
        need(4);
        if (std::memcmp(data_ + pos_, tag, 4) != 0)
            throw ParseError(std::string("midi: expected chunk '") + tag + "' at byte " +
                             std::to_string(pos_));
        pos_ += 4;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_)
            throw ParseError("midi: unexpected end of data at byte " + std::to_string(pos_));
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

/// Piecewise-constant tempo map: (tick, microseconds per quarter note).
class TempoMap {
public:
    void add(std::uint64_t tick, std::uint32_t us_per_quarter) {
        points_[tick] = us_per_quarter;
    }

    double seconds_at(std::uint64_t tick, std::uint32_t ticks_per_quarter) const {
        double seconds = 0.0;
        std::uint64_t prev_tick = 0;
        std::uint32_t current = 500000; // 120 bpm default
        for (const auto& [t, us] : points_) {
            if (t >= tick) break;
            seconds += double(t - prev_tick) * double(current) / (1e6 * ticks_per_quarter);
            prev_tick = t;
            current = us;
        }
        seconds += double(tick - prev_tick) * double(current) / (1e6 * ticks_per_quarter);
        return seconds;
    }

private:
    std::map<std::uint64_t, std::uint32_t> points_;
};

struct RawNote {
    std::uint64_t on_tick, off_tick;
    int pitch, velocity;
};

} // namespace detail

/// Parse a Standard MIDI File (format 0 or 1) into a NoteDataset.
/// Note-on with velocity 0 counts as note-off; overlapping same-pitch notes
/// pair FIFO per pitch; notes still open at track end are closed there and
/// counted in `unterminated_notes`.
inline NoteDataset parse_midi(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes.data(), bytes.size());
    r.expect_tag("MThd");
    const std::uint32_t header_len = r.u32();
    if (header_len < 6)
        throw ParseError("midi: header chunk too short at byte " + std::to_string(r.offset()));
    const std::uint16_t format = r.u16();
    const std::uint16_t ntrks = r.u16();
    const std::uint16_t division = r.u16();
    r.skip(header_len - 6);
    if (format > 1)
        throw ParseError("midi: unsupported format " + std::to_string(format) +
                         " (only 0 and 1)");
    if (division & 0x8000)
        throw ParseError("midi: SMPTE time division is not supported");
    if (division == 0) throw ParseError("midi: zero ticks per quarter");

    detail::TempoMap tempo;
    std::vector<detail::RawNote> notes;
    std::size_t unterminated = 0;

    for (std::uint16_t trk = 0; trk < ntrks; ++trk) {
        r.expect_tag("MTrk");
        const std::uint32_t track_len = r.u32();
        const std::size_t track_end = r.offset() + track_len;
        std::uint64_t tick = 0;
        std::uint8_t running_status = 0;
        std::array<std::deque<std::pair<std::uint64_t, int>>, 128> open; // FIFO per pitch

        while (r.offset() < track_end) {
            tick += r.varint();
            std::uint8_t status = r.peek();
            if (status & 0x80) {
                r.u8();
                if (status < 0xf0) running_status = status;
            } else {
                if (!(running_status & 0x80))
                    throw ParseError("midi: data byte without running status at byte " +
                                     std::to_string(r.offset()));
                status = running_status;
            }

            if (status == 0xff) { // meta
                const std::uint8_t type = r.u8();
                const std::uint32_t len = r.varint();
                if (type == 0x51 && len == 3) {
                    const std::uint32_t us = (std::uint32_t(r.u8()) << 16) |
                                             (std::uint32_t(r.u8()) << 8) | r.u8();
                    tempo.add(tick, us);
                } else {
                    r.skip(len);
                    if (type == 0x2f) break; // end of track
                }
            } else if (status == 0xf0 || status == 0xf7) { // sysex
                r.skip(r.varint());
            } else {
                const std::uint8_t kind = status & 0xf0;
                switch (kind) {
                case 0x80: { // note off
                    const int pitch = r.u8() & 0x7f;
                    r.u8(); // release velocity
                    if (!open[std::size_t(pitch)].empty()) {
                        auto [on_tick, vel] = open[std::size_t(pitch)].front();
                        open[std::size_t(pitch)].pop_front();
                        notes.push_back({on_tick, tick, pitch, vel});
                    }
                    break;
                }
                case 0x90: { // note on (velocity 0 means off)
                    const int pitch = r.u8() & 0x7f;
                    const int vel = r.u8() & 0x7f;
                    if (vel > 0) {
                        open[std::size_t(pitch)].push_back({tick, vel});
                    } else if (!open[std::size_t(pitch)].empty()) {
                        auto [on_tick, v] = open[std::size_t(pitch)].front();
                        open[std::size_t(pitch)].pop_front();
                        notes.push_back({on_tick, tick, pitch, v});
                    }
                    break;
                }
                case 0xa0:
                case 0xb0:
                case 0xe0:
                    r.skip(2);
                    break;
                case 0xc0:
                case 0xd0:
                    r.skip(1);
                    break;
                default:
                    throw ParseError("midi: unknown status byte " + std::to_string(status) +
                                     " at byte " + std::to_string(r.offset()));
                }
            }
        }
        // close dangling notes at track end
        for (int pitch = 0; pitch < 128; ++pitch) {
            while (!open[std::size_t(pitch)].empty()) {
                auto [on_tick, vel] = open[std::size_t(pitch)].front();
                open[std::size_t(pitch)].pop_front();
                const std::uint64_t off = std::max<std::uint64_t>(tick, on_tick + 1);
                notes.push_back({on_tick, off, pitch, vel});
                ++unterminated;
            }
        }
        if (r.offset() < track_end) r.skip(track_end - r.offset());
    }

    NoteDataset out;
    out.unterminated_notes = unterminated;
    for (const auto& n : notes) {
        const double onset = tempo.seconds_at(n.on_tick, division);
        const double offset = tempo.seconds_at(n.off_tick, division);
        out.events.push_back({onset, offset - onset, n.pitch, std::max(1, n.velocity)});
        out.source_labels.emplace_back();
    }
    if (out.empty()) throw DataError("midi: file contains no notes");
    sort_dataset(out);
    return out;
}

inline NoteDataset parse_midi_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open midi file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    NoteDataset d = parse_midi(bytes);
    for (auto& label : d.source_labels) label = path;
    return d;
}

namespace detail {

inline void put_varint(std::vector<std::uint8_t>& out, std::uint32_t v) {
    std::uint8_t buf[4];
    int n = 0;
    buf[n++] = v & 0x7f;
    while (v >>= 7) buf[n++] = std::uint8_t(0x80 | (v & 0x7f));
    while (n--) out.push_back(buf[n]);
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

} // namespace detail

/// Serialize as a format-0 SMF with a single fixed tempo. Re-parsing
/// reproduces the dataset within one tick of time quantization.
inline std::vector<std::uint8_t> emit_midi(const NoteDataset& dataset,
                                           std::uint16_t ticks_per_quarter, double tempo_bpm) {
    if (dataset.empty()) throw DataError("emit_midi: empty dataset");
    if (tempo_bpm <= 0.0) throw ConfigError("emit_midi: tempo must be positive");
    if (ticks_per_quarter == 0) throw ConfigError("emit_midi: ticks_per_quarter must be >= 1");
    for (const auto& e : dataset.events) {
        if (e.pitch < 0 || e.pitch > 127 || e.velocity < 1 || e.velocity > 127 ||
            e.onset < 0.0 || e.duration <= 0.0)
            throw DataError("emit_midi: note event violates MIDI ranges");
    }

    const double ticks_per_second = tempo_bpm / 60.0 * ticks_per_quarter;
    struct Ev {
        std::uint64_t tick;
        int type; // 0 = off, 1 = on
        int pitch, velocity;
    };
    std::vector<Ev> evs;
    for (const auto& e : dataset.events) {
        const auto on = std::uint64_t(std::llround(e.onset * ticks_per_second));
        auto off = std::uint64_t(std::llround((e.onset + e.duration) * ticks_per_second));
        if (off <= on) off = on + 1;
        evs.push_back({on, 1, e.pitch, e.velocity});
        evs.push_back({off, 0, e.pitch, 0});
    }
    std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        if (a.type != b.type) return a.type < b.type; // offs before ons
        return a.pitch < b.pitch;
    });

    std::vector<std::uint8_t> track;
    // tempo meta
    detail::put_varint(track, 0);
    track.push_back(0xff);
    track.push_back(0x51);
    track.push_back(0x03);
    const auto us = std::uint32_t(std::llround(60e6 / tempo_bpm));
    track.push_back(std::uint8_t(us >> 16));
    track.push_back(std::uint8_t(us >> 8));
    track.push_back(std::uint8_t(us));

    std::uint64_t prev = 0;
    for (const auto& ev : evs) {
        detail::put_varint(track, std::uint32_t(ev.tick - prev));
        prev = ev.tick;
        track.push_back(ev.type ? 0x90 : 0x80);
        track.push_back(std::uint8_t(ev.pitch));
        track.push_back(std::uint8_t(ev.type ? ev.velocity : 0));
    }
    // end of track
    detail::put_varint(track, 0);
    track.push_back(0xff);
    track.push_back(0x2f);
    track.push_back(0x00);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    detail::put_u32(out, 6);
    detail::put_u16(out, 0); // format 0
    detail::put_u16(out, 1);
    detail::put_u16(out, ticks_per_quarter);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    detail::put_u32(out, std::uint32_t(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

inline void emit_midi_file(const NoteDataset& dataset, const std::string& path,
                           std::uint16_t ticks_per_quarter = 480, double tempo_bpm = 120.0) {
    const auto bytes = emit_midi(dataset, ticks_per_quarter, tempo_bpm);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open midi file for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw IoError("failed writing midi file: " + path);
}

/// Corpus manifest: one `path<TAB>composer` per line, `#` comments.
/// Relative paths are resolved against the manifest's directory.
struct CorpusManifest {
    struct Entry {
        std::string path;
        std::string composer;
    };
    std::vector<Entry> entries;
    std::string root;
};

inline CorpusManifest load_manifest(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest: " + manifest_path);
    CorpusManifest m;
    m.root = std::filesystem::path(manifest_path).parent_path().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError("manifest " + manifest_path + ":" + std::to_string(line_no) +
                             ": expected 'path<TAB>composer'");
        CorpusManifest::Entry e;
        e.path = line.substr(0, tab);
        e.composer = line.substr(tab + 1);
        while (!e.composer.empty() && (e.composer.back() == '\r' || e.composer.back() == ' '))
            e.composer.pop_back();
        if (e.composer.empty())
            throw ParseError("manifest " + manifest_path + ":" + std::to_string(line_no) +
                             ": empty composer name");
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = std::filesystem::path(m.root) / p;
        e.path = p.string();
        if (!std::filesystem::exists(p))
            throw DataError("manifest " + manifest_path + ":" + std::to_string(line_no) +
                            ": file does not exist: " + e.path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

namespace detail {

inline std::string fold(const std::string& s) {
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

} // namespace detail

/// Load every manifest file whose composer matches any requested name
/// (exact match after case-folding and whitespace trim). Files are
/// concatenated sequentially in time.
inline NoteDataset get_data_for_composer(const CorpusManifest& manifest,
                                         const std::vector<std::string>& composers) {
    if (composers.empty()) throw ConfigError("get_data_for_composer: no composers requested");
    std::vector<std::string> wanted;
    for (const auto& c : composers) wanted.push_back(detail::fold(c));

    NoteDataset out;
    for (const auto& entry : manifest.entries) {
        const std::string folded = detail::fold(entry.composer);
        if (std::find(wanted.begin(), wanted.end(), folded) == wanted.end()) continue;
        NoteDataset file = parse_midi_file(entry.path);
        for (auto& label : file.source_labels) label = entry.composer;
        out.append_shifted(file);
    }
    if (out.empty()) {
        std::string available;
        std::vector<std::string> seen;
        for (const auto& e : manifest.entries) {
            if (std::find(seen.begin(), seen.end(), e.composer) != seen.end()) continue;
            seen.push_back(e.composer);
            if (!available.empty()) available += ", ";
            available += e.composer;
        }
        throw DataError("no manifest entries match the requested composers; available: " +
                        available);
    }
    return out;
}

} // namespace cadenza::midi
