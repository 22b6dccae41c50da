#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"

namespace cadenza::sampler {

/// ADSR envelope in seconds (sustain is a level in [0,1]).
struct Envelope {
    double attack = 0.01;
    double decay = 0.1;
    double sustain = 0.8;
    double release = 0.2;

    void validate() const {
        auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
        if (!ok(attack) || !ok(decay) || !ok(release))
            throw ConfigError("envelope: attack/decay/release must be finite and >= 0");
        if (!std::isfinite(sustain) || sustain < 0.0 || sustain > 1.0)
            throw ConfigError("envelope: sustain must be in [0,1]");
    }

    bool operator==(const Envelope&) const = default;
};

struct SampleZone {
    std::string path; // relative, forward slashes
    int root_note = 60;
    int lo_note = 0;
    int hi_note = 127;
    bool loop_enabled = false;
    std::uint32_t loop_start = 0;
    std::uint32_t loop_end = 0;

    bool operator==(const SampleZone&) const = default;
};

/// Keyboard mapping plus envelope for one emitted instrument.
struct SamplerInstrumentSpec {
    std::string name = "instrument";
    std::vector<SampleZone> entries;
    Envelope envelope;

    bool operator==(const SamplerInstrumentSpec&) const = default;

    /// Zones must sit inside MIDI range, not overlap, and jointly cover the
    /// mapped span without gaps.
    void validate() const {
        if (entries.empty()) throw ConfigError("instrument: no sample zones");
        envelope.validate();
        std::vector<SampleZone> sorted = entries;
        std::sort(sorted.begin(), sorted.end(),
                  [](const SampleZone& a, const SampleZone& b) { return a.lo_note < b.lo_note; });
        for (const auto& z : sorted) {
            if (z.lo_note < 0 || z.hi_note > 127 || z.lo_note > z.hi_note)
                throw ConfigError("instrument: zone range " + std::to_string(z.lo_note) + ".." +
                                  std::to_string(z.hi_note) + " is not a valid MIDI range");
            if (z.root_note < 0 || z.root_note > 127)
                throw ConfigError("instrument: root note out of MIDI range");
            if (z.path.empty()) throw ConfigError("instrument: zone with empty sample path");
        }
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i].lo_note <= sorted[i - 1].hi_note)
                throw ConfigError("instrument: overlapping zones at note " +
                                  std::to_string(sorted[i].lo_note));
            if (sorted[i].lo_note != sorted[i - 1].hi_note + 1)
                throw ConfigError("instrument: gap between zones at note " +
                                  std::to_string(sorted[i - 1].hi_note + 1));
        }
    }
};

enum class MapStrategy { RoundRobinChromatic, EvenSplit };

inline MapStrategy map_strategy_from_string(const std::string& s) {
    if (s == "evensplit") return MapStrategy::EvenSplit;
    if (s == "roundrobin") return MapStrategy::RoundRobinChromatic;
    throw ConfigError("unknown mapping strategy '" + s + "' (expected evensplit|roundrobin)");
}

/// Build keyboard zones for a list of sample paths.
/// EvenSplit partitions MIDI 0..127 into contiguous zones (one per sample,
/// root at the zone center; a single sample roots at middle C).
/// RoundRobinChromatic assigns consecutive semitones cyclically.
inline std::vector<SampleZone> map_samples(const std::vector<std::string>& paths,
                                           MapStrategy strategy) {
    if (paths.empty()) throw ConfigError("map_samples: no sample paths");
    std::vector<SampleZone> zones;
    if (strategy == MapStrategy::EvenSplit) {
        const std::size_t k = paths.size();
        const int base = int(128 / k);
        if (base == 0) throw ConfigError("map_samples: more than 128 samples cannot split evenly");
        int extra = int(128 % k);
        int lo = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const int width = base + (int(i) < extra ? 1 : 0);
            const int hi = lo + width - 1;
            SampleZone z;
            z.path = paths[i];
            z.lo_note = lo;
            z.hi_note = hi;
            z.root_note = (k == 1) ? 60 : lo + (hi - lo) / 2;
            zones.push_back(std::move(z));
            lo = hi + 1;
        }
    } else {
        for (int note = 0; note < 128; ++note) {
            SampleZone z;
            z.path = paths[std::size_t(note) % paths.size()];
            z.lo_note = z.hi_note = z.root_note = note;
            zones.push_back(std::move(z));
        }
    }
    return zones;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

/// Shortest round-trip decimal representation.
inline std::string fmtd(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

} // namespace detail

/// Serialize as a Decent Sampler preset. Schema subset: a `DecentSampler`
/// root, a `groups` container, one `group` carrying the instrument name and
/// the ADSR attributes, and one `sample` element per zone. UTF-8, LF line
/// endings, fixed attribute order, so equal specs give identical bytes.
inline std::string emit_preset(const SamplerInstrumentSpec& spec) {
    spec.validate();
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<DecentSampler>\n";
    out += "  <groups>\n";
    out += "    <group name=\"" + detail::xml_escape(spec.name) + "\" attack=\"" +
           detail::fmtd(spec.envelope.attack) + "\" decay=\"" + detail::fmtd(spec.envelope.decay) +
           "\" sustain=\"" + detail::fmtd(spec.envelope.sustain) + "\" release=\"" +
           detail::fmtd(spec.envelope.release) + "\">\n";
    for (const auto& z : spec.entries) {
        out += "      <sample path=\"" + detail::xml_escape(z.path) + "\" rootNote=\"" +
               std::to_string(z.root_note) + "\" loNote=\"" + std::to_string(z.lo_note) +
               "\" hiNote=\"" + std::to_string(z.hi_note) + "\"";
        if (z.loop_enabled) {
            out += " loopEnabled=\"true\" loopStart=\"" + std::to_string(z.loop_start) +
                   "\" loopEnd=\"" + std::to_string(z.loop_end) + "\"";
        }
        out += "/>\n";
    }
    out += "    </group>\n";
    out += "  </groups>\n";
    out += "</DecentSampler>\n";
    return out;
}

// --- strict parser for the schema subset above ------------------------------

namespace detail {

struct XmlElement {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    std::vector<XmlElement> children;

    const std::string* attr(const std::string& key) const {
        for (const auto& kv : attrs)
            if (kv.first == key) return &kv.second;
        return nullptr;
    }
};

class XmlParser {
public:
    explicit XmlParser(const std::string& text) : s_(text) {}

    XmlElement parse_document() {
        skip_ws();
        if (peek_starts("<?")) { // declaration
            const auto end = s_.find("?>", pos_);
            if (end == std::string::npos) err("unterminated xml declaration");
            pos_ = end + 2;
        }
        skip_ws();
        XmlElement root = parse_element();
        skip_ws();
        if (pos_ != s_.size()) err("trailing content after root element");
        return root;
    }

private:
    [[noreturn]] void err(const std::string& msg) const {
        throw ParseError("xml: " + msg + " at offset " + std::to_string(pos_));
    }

    bool peek_starts(const char* prefix) const {
        return s_.compare(pos_, std::strlen(prefix), prefix) == 0;
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::string parse_name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                s_[pos_] == '-' || s_[pos_] == ':'))
            ++pos_;
        if (pos_ == start) err("expected a name");
        return s_.substr(start, pos_ - start);
    }

    std::string parse_attr_value() {
        if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) err("expected quote");
        const char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != quote) {
            if (s_[pos_] == '&') {
                if (peek_starts("&amp;")) { out += '&'; pos_ += 5; }
                else if (peek_starts("&lt;")) { out += '<'; pos_ += 4; }
                else if (peek_starts("&gt;")) { out += '>'; pos_ += 4; }
                else if (peek_starts("&quot;")) { out += '"'; pos_ += 6; }
                else if (peek_starts("&apos;")) { out += '\''; pos_ += 6; }
                else err("unknown entity");
            } else {
                out += s_[pos_++];
            }
        }
        if (pos_ >= s_.size()) err("unterminated attribute value");
        ++pos_;
        return out;
    }

    XmlElement parse_element() {
        if (pos_ >= s_.size() || s_[pos_] != '<') err("expected '<'");
        ++pos_;
        XmlElement el;
        el.name = parse_name();
        while (true) {
            skip_ws();
            if (pos_ >= s_.size()) err("unterminated tag");
            if (s_[pos_] == '/') {
                ++pos_;
                if (pos_ >= s_.size() || s_[pos_] != '>') err("expected '>'");
                ++pos_;
                return el; // self-closing
            }
            if (s_[pos_] == '>') {
                ++pos_;
                break;
            }
            std::string key = parse_name();
            skip_ws();
            if (pos_ >= s_.size() || s_[pos_] != '=') err("expected '='");
            ++pos_;
            skip_ws();
            el.attrs.emplace_back(std::move(key), parse_attr_value());
        }
        // children until the closing tag
        while (true) {
            skip_ws();
            if (peek_starts("</")) {
                pos_ += 2;
                const std::string closing = parse_name();
                if (closing != el.name) err("mismatched closing tag '" + closing + "'");
                skip_ws();
                if (pos_ >= s_.size() || s_[pos_] != '>') err("expected '>'");
                ++pos_;
                return el;
            }
            if (pos_ >= s_.size()) err("missing closing tag for '" + el.name + "'");
            if (s_[pos_] == '<') {
                el.children.push_back(parse_element());
            } else {
                err("unexpected text content");
            }
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

inline double attr_double(const XmlElement& el, const std::string& key) {
    const std::string* v = el.attr(key);
    if (!v) throw ParseError("preset: missing attribute '" + key + "' on <" + el.name + ">");
    return std::strtod(v->c_str(), nullptr);
}

inline int attr_int(const XmlElement& el, const std::string& key) {
    const std::string* v = el.attr(key);
    if (!v) throw ParseError("preset: missing attribute '" + key + "' on <" + el.name + ">");
    return std::atoi(v->c_str());
}

} // namespace detail

/// Parse a preset produced by emit_preset back into a spec.
inline SamplerInstrumentSpec parse_preset(const std::string& xml) {
    detail::XmlParser parser(xml);
    const detail::XmlElement root = parser.parse_document();
    if (root.name != "DecentSampler") throw ParseError("preset: root element must be DecentSampler");
    if (root.children.size() != 1 || root.children[0].name != "groups")
        throw ParseError("preset: expected a single <groups> container");
    const auto& groups = root.children[0];
    if (groups.children.size() != 1 || groups.children[0].name != "group")
        throw ParseError("preset: expected a single <group>");
    const auto& group = groups.children[0];

    SamplerInstrumentSpec spec;
    if (const std::string* n = group.attr("name")) spec.name = *n;
    spec.envelope.attack = detail::attr_double(group, "attack");
    spec.envelope.decay = detail::attr_double(group, "decay");
    spec.envelope.sustain = detail::attr_double(group, "sustain");
    spec.envelope.release = detail::attr_double(group, "release");
    for (const auto& child : group.children) {
        if (child.name != "sample")
            throw ParseError("preset: unexpected element <" + child.name + "> in group");
        SampleZone z;
        const std::string* p = child.attr("path");
        if (!p) throw ParseError("preset: sample without path");
        z.path = *p;
        z.root_note = detail::attr_int(child, "rootNote");
        z.lo_note = detail::attr_int(child, "loNote");
        z.hi_note = detail::attr_int(child, "hiNote");
        if (const std::string* loop = child.attr("loopEnabled"); loop && *loop == "true") {
            z.loop_enabled = true;
            z.loop_start = std::uint32_t(detail::attr_int(child, "loopStart"));
            z.loop_end = std::uint32_t(detail::attr_int(child, "loopEnd"));
        }
        spec.entries.push_back(std::move(z));
    }
    spec.validate();
    return spec;
}

inline void write_preset_file(const SamplerInstrumentSpec& spec, const std::string& path) {
    const std::string xml = emit_preset(spec);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open preset for writing: " + path);
    os << xml;
    if (!os) throw IoError("failed writing preset: " + path);
}

} // namespace cadenza::sampler
