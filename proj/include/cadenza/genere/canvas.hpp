#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/image/font5x7.hpp"
#include "cadenza/image/png.hpp"
#include "cadenza/image/raster.hpp"

namespace cadenza::genere {

enum class PageSize { A4, Letter };
enum class PageOrientation { Portrait, Landscape };
enum class Accidental { None, Sharp, Flat };
enum class NoteheadType { Normal, X, Diamond, Square, Triangle };
enum class TextKind { Title, Composer, Instrument };

inline PageSize page_size_from_string(const std::string& s) {
    if (s == "A4" || s == "a4") return PageSize::A4;
    if (s == "Letter" || s == "letter") return PageSize::Letter;
    throw ConfigError("unknown page size '" + s + "' (expected A4|Letter)");
}

inline PageOrientation orientation_from_string(const std::string& s) {
    if (s == "portrait") return PageOrientation::Portrait;
    if (s == "landscape") return PageOrientation::Landscape;
    throw ConfigError("unknown orientation '" + s + "' (expected portrait|landscape)");
}

inline Accidental accidental_from_string(const std::string& s) {
    if (s == "none") return Accidental::None;
    if (s == "sharp") return Accidental::Sharp;
    if (s == "flat") return Accidental::Flat;
    throw ConfigError("unknown accidental '" + s + "' (expected none|sharp|flat)");
}

inline NoteheadType notehead_from_string(const std::string& s) {
    if (s == "normal") return NoteheadType::Normal;
    if (s == "x") return NoteheadType::X;
    if (s == "diamond") return NoteheadType::Diamond;
    if (s == "square") return NoteheadType::Square;
    if (s == "triangle") return NoteheadType::Triangle;
    throw ConfigError("unknown notehead '" + s + "' (expected normal|x|diamond|square|triangle)");
}

struct PlacedNote {
    std::size_t system = 0;
    double hpos = 0.0;
    int pitch = 60;
    Accidental accidental = Accidental::None;
    NoteheadType notehead = NoteheadType::Normal;
    long x = 0, y = 0; // pixel anchor (notehead center)
};

/// Fractional page margins; the per-page hook for data-driven layouts
/// (e.g. larger margins on odd page numbers).
struct Margins {
    double left = 0.08;
    double right = 0.08;
    double top = 0.10;
    double bottom = 0.08;
};

struct ScoreCanvas {
    image::Raster raster;
    double dpi = 150.0;
    bool indentation = false;
    long staff_gap = 8; // distance between adjacent staff lines, always even
    std::vector<std::array<long, 5>> staff_lines; // per system, top line first
    std::vector<long> system_left;                // staff start x per system
    long content_right = 0;
    std::vector<PlacedNote> placed_notes;

    std::size_t systems() const { return staff_lines.size(); }

    long middle_line_y(std::size_t system) const { return staff_lines[system][2]; }

    /// x span available for note placement on a system.
    std::pair<long, long> note_span(std::size_t system) const {
        const long left = system_left[system] + 3 * staff_gap; // clef zone
        return {left, content_right};
    }
};

namespace detail {

inline std::pair<double, double> page_size_mm(PageSize p) {
    return p == PageSize::A4 ? std::pair{210.0, 297.0} : std::pair{215.9, 279.4};
}

} // namespace detail

/// White canvas with `systems` five-line staves and recorded line
/// coordinates. Indentation shifts the first system's left edge.
inline ScoreCanvas create_canvas(PageSize page, PageOrientation orientation, std::size_t systems,
                                 bool indentation, double dpi = 150.0,
                                 const Margins& margins = {}) {
    if (systems < 1) throw ConfigError("canvas: need at least 1 system");
    if (dpi < 36.0 || dpi > 1200.0) throw ConfigError("canvas: dpi out of range");

    auto [wmm, hmm] = detail::page_size_mm(page);
    if (orientation == PageOrientation::Landscape) std::swap(wmm, hmm);
    const auto width = std::size_t(std::lround(wmm / 25.4 * dpi));
    const auto height = std::size_t(std::lround(hmm / 25.4 * dpi));

    ScoreCanvas c;
    c.raster = image::Raster(width, height, image::kWhite);
    c.dpi = dpi;
    c.indentation = indentation;
    c.staff_gap = 2 * std::max<long>(2, std::lround(dpi / 36.0));

    const long margin_l = std::lround(margins.left * double(width));
    const long margin_r = std::lround(margins.right * double(width));
    const long margin_t = std::lround(margins.top * double(height));
    const long margin_b = std::lround(margins.bottom * double(height));
    const long content_h = long(height) - margin_t - margin_b;
    const long slot = content_h / long(systems);
    if (slot < 6 * c.staff_gap)
        throw ConfigError("canvas: " + std::to_string(systems) +
                          " systems do not fit the page at this size");
    c.content_right = long(width) - margin_r;

    const long indent = std::lround(0.09 * double(width));
    for (std::size_t s = 0; s < systems; ++s) {
        const long top = margin_t + long(s) * slot + (slot - 4 * c.staff_gap) / 2;
        std::array<long, 5> lines{};
        for (int l = 0; l < 5; ++l) lines[std::size_t(l)] = top + l * c.staff_gap;
        c.staff_lines.push_back(lines);
        const long left = margin_l + ((s == 0 && indentation) ? indent : 0);
        c.system_left.push_back(left);
        for (long y : lines) c.raster.hline(left, c.content_right, y, 1, image::kBlack);
        // system barlines
        c.raster.vline(left, lines[0], lines[4], 1, image::kBlack);
        c.raster.vline(c.content_right, lines[0], lines[4], 1, image::kBlack);
    }
    return c;
}

namespace detail {

// Diatonic step index (octave * 7 + letter). Black keys spell downward as
// sharps by default and upward as flats when requested.
inline int diatonic_index(int pitch, Accidental acc) {
    static constexpr int letter_of_pc[12] = {0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6};
    static constexpr bool black[12] = {false, true,  false, true,  false, false,
                                       true,  false, true,  false, true,  false};
    const int pc = pitch % 12;
    const int octave = pitch / 12 - 1; // MIDI 60 is C4
    int letter = letter_of_pc[pc];
    if (black[pc] && acc == Accidental::Flat) ++letter;
    return octave * 7 + letter;
}

inline constexpr int kDiatonicB4 = 4 * 7 + 6; // the treble middle line

} // namespace detail

/// Vertical anchor of a pitch on a treble staff. Pure function of
/// (pitch, accidental, system geometry).
inline long staff_y(const ScoreCanvas& c, std::size_t system, int pitch, Accidental acc) {
    const long half = c.staff_gap / 2;
    const int di = detail::diatonic_index(pitch, acc);
    return c.middle_line_y(system) - long(di - detail::kDiatonicB4) * half;
}

/// Stylized treble clef from geometric strokes in the clef zone.
inline void apply_treble_clef(ScoreCanvas& c, std::size_t system, bool on_all = false) {
    if (system >= c.systems()) throw ConfigError("clef: system index out of range");
    const std::size_t first = on_all ? 0 : system;
    const std::size_t last = on_all ? c.systems() - 1 : system;
    for (std::size_t s = first; s <= last; ++s) {
        const long g = c.staff_gap;
        const long x = c.system_left[s] + g + g / 2;
        const auto& lines = c.staff_lines[s];
        c.raster.vline(x, lines[0] - g, lines[4] + g / 2, 2, image::kBlack);
        // the G curl sits on the second line from the bottom
        c.raster.ellipse_outline(x, lines[3], g, g - 1, image::kBlack, 2);
        c.raster.ellipse_outline(x, lines[1], (2 * g) / 3, g / 2, image::kBlack, 2);
        c.raster.fill_ellipse(x, lines[4] + g, g / 3, g / 3, image::kBlack);
    }
}

namespace detail {

inline void draw_notehead_glyph(image::Raster& img, long cx, long cy, long g, NoteheadType type,
                                image::Color color) {
    const long rx = (g * 5) / 8, ry = g / 2;
    switch (type) {
    case NoteheadType::Normal:
        img.fill_ellipse(cx, cy, rx, ry, color);
        break;
    case NoteheadType::X:
        img.line(cx - rx, cy - ry, cx + rx, cy + ry, color, 2);
        img.line(cx - rx, cy + ry, cx + rx, cy - ry, color, 2);
        break;
    case NoteheadType::Diamond:
        for (long dy = -ry; dy <= ry; ++dy) {
            const long half_w = rx - std::labs(dy) * rx / std::max<long>(1, ry);
            img.hline(cx - half_w, cx + half_w, cy + dy, 1, color);
        }
        break;
    case NoteheadType::Square:
        img.fill_rect(cx - rx, cy - ry, 2 * rx + 1, 2 * ry + 1, color);
        break;
    case NoteheadType::Triangle:
        for (long dy = -ry; dy <= ry; ++dy) {
            const long t = dy + ry;                       // 0 at apex row
            const long half_w = t * rx / std::max<long>(1, 2 * ry);
            img.hline(cx - half_w, cx + half_w, cy + dy, 1, color);
        }
        break;
    }
}

inline void draw_accidental_glyph(image::Raster& img, long cx, long cy, long g, Accidental acc,
                                  image::Color color) {
    const long h = (g * 3) / 4;
    if (acc == Accidental::Sharp) {
        img.vline(cx - 2, cy - h, cy + h, 1, color);
        img.vline(cx + 2, cy - h, cy + h, 1, color);
        img.hline(cx - 4, cx + 4, cy - g / 3, 2, color);
        img.hline(cx - 4, cx + 4, cy + g / 3, 2, color);
    } else if (acc == Accidental::Flat) {
        img.vline(cx - 2, cy - h - g / 3, cy + h / 2, 1, color);
        img.ellipse_outline(cx, cy + h / 4, 3, h / 3 + 1, color, 1);
    }
}

} // namespace detail

/// Draw a notehead at a fractional horizontal position; ledger lines appear
/// automatically outside the staff. The placement lands in the registry and
/// its index is returned.
inline std::size_t place_notehead(ScoreCanvas& c, std::size_t system, double hpos, int pitch,
                                  Accidental accidental = Accidental::None,
                                  NoteheadType notehead = NoteheadType::Normal) {
    if (system >= c.systems())
        throw ConfigError("notehead: system " + std::to_string(system) + " out of range (" +
                          std::to_string(c.systems()) + " systems)");
    if (hpos < 0.0 || hpos > 1.0)
        throw ConfigError("notehead: horizontal position " + std::to_string(hpos) +
                          " outside [0,1]");
    if (pitch < 0 || pitch > 127) throw ConfigError("notehead: pitch outside MIDI range");

    const auto [left, right] = c.note_span(system);
    const long x = left + std::lround(hpos * double(right - left));
    const long y = staff_y(c, system, pitch, accidental);
    const long g = c.staff_gap;

    // ledger lines below and above the staff
    const auto& lines = c.staff_lines[system];
    for (long ly = lines[4] + g; ly <= y; ly += g)
        c.raster.hline(x - g, x + g, ly, 1, image::kBlack);
    for (long ly = lines[0] - g; ly >= y; ly -= g)
        c.raster.hline(x - g, x + g, ly, 1, image::kBlack);

    detail::draw_notehead_glyph(c.raster, x, y, g, notehead, image::kBlack);
    const int pc = pitch % 12;
    static constexpr bool black[12] = {false, true,  false, true,  false, false,
                                       true,  false, true,  false, true,  false};
    if (black[pc] && accidental != Accidental::None)
        detail::draw_accidental_glyph(c.raster, x - g - g / 2, y, g, accidental, image::kBlack);

    c.placed_notes.push_back({system, hpos, pitch, accidental, notehead, x, y});
    return c.placed_notes.size() - 1;
}

/// Conventional text zones: title top-center, composer top-right at an
/// alignment value in sixths of the page width, instrument left of a system.
inline void add_text(ScoreCanvas& c, TextKind kind, const std::string& text,
                     double align_value = 4.75, std::size_t system = 0) {
    if (text.empty()) throw ConfigError("text: empty string");
    const long g = c.staff_gap;
    switch (kind) {
    case TextKind::Title: {
        const long scale = std::max<long>(2, g / 3);
        const long w = image::text_width(text, scale);
        const long x = (long(c.raster.width) - w) / 2;
        const long y = c.staff_lines[0][0] / 3;
        image::draw_text(c.raster, x, y, text, scale, image::kBlack);
        break;
    }
    case TextKind::Composer: {
        const long scale = std::max<long>(1, g / 4);
        const long w = image::text_width(text, scale);
        const long cx = std::lround(double(c.raster.width) * align_value / 6.0);
        const long y = (c.staff_lines[0][0] * 2) / 3;
        image::draw_text(c.raster, cx - w / 2, y, text, scale, image::kBlack);
        break;
    }
    case TextKind::Instrument: {
        if (system >= c.systems()) throw ConfigError("text: system index out of range");
        const long scale = std::max<long>(1, g / 4);
        const long w = image::text_width(text, scale);
        const long x = c.system_left[system] - w - g;
        const long y = c.middle_line_y(system) - image::text_height(scale) / 2;
        image::draw_text(c.raster, std::max<long>(2, x), y, text, scale, image::kBlack);
        break;
    }
    }
}

/// Polyline through previously placed notes, in the given order.
inline void draw_line_across_notes(ScoreCanvas& c, const std::vector<std::size_t>& note_indices,
                                   image::Color color, long line_width = 1) {
    if (note_indices.size() < 2)
        throw ConfigError("line: need at least 2 placed notes, got " +
                          std::to_string(note_indices.size()));
    for (std::size_t idx : note_indices)
        if (idx >= c.placed_notes.size())
            throw ConfigError("line: note index " + std::to_string(idx) +
                              " not in the placed-note registry");
    for (std::size_t i = 0; i + 1 < note_indices.size(); ++i) {
        const PlacedNote& a = c.placed_notes[note_indices[i]];
        const PlacedNote& b = c.placed_notes[note_indices[i + 1]];
        c.raster.line(a.x, a.y, b.x, b.y, color, line_width);
    }
}

inline std::vector<std::uint8_t> render_png(const ScoreCanvas& c) {
    return image::png_encode(c.raster);
}

} // namespace cadenza::genere
