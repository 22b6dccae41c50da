#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/genere/canvas.hpp"

namespace cadenza::genere {

// Declarative scene scripts, one command per line, `#` comments:
//
//   canvas A4 portrait systems=9 dpi=96 indentation=on
//   clef all
//   title This Kind of Graphic Score
//   composer align=4.75 You
//   instrument system=0 Instrument Name
//   note system=0 hpos=0.41 pitch=73 acc=sharp head=normal
//   line color=blue width=1 notes=0,5,12
//
// `key=value` tokens are options; remaining tokens join into free text.

namespace detail {

struct SceneLine {
    std::string command;
    std::map<std::string, std::string> opts;
    std::string text;
};

inline SceneLine parse_scene_line(const std::string& line, std::size_t line_no) {
    SceneLine out;
    std::istringstream is(line);
    std::string tok;
    if (!(is >> out.command))
        throw ParseError("scene line " + std::to_string(line_no) + ": empty command");
    std::string text;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos && eq > 0) {
            out.opts[tok.substr(0, eq)] = tok.substr(eq + 1);
        } else {
            if (!text.empty()) text += ' ';
            text += tok;
        }
    }
    out.text = text;
    return out;
}

inline double opt_double(const SceneLine& l, const std::string& key, double fallback) {
    auto it = l.opts.find(key);
    return it == l.opts.end() ? fallback : std::strtod(it->second.c_str(), nullptr);
}

inline long opt_long(const SceneLine& l, const std::string& key, long fallback) {
    auto it = l.opts.find(key);
    return it == l.opts.end() ? fallback : std::strtol(it->second.c_str(), nullptr, 10);
}

inline std::string opt_str(const SceneLine& l, const std::string& key,
                           const std::string& fallback) {
    auto it = l.opts.find(key);
    return it == l.opts.end() ? fallback : it->second;
}

inline bool opt_flag(const SceneLine& l, const std::string& key, bool fallback) {
    auto it = l.opts.find(key);
    if (it == l.opts.end()) return fallback;
    return it->second == "on" || it->second == "true" || it->second == "1";
}

} // namespace detail

/// Execute a scene script and return the finished canvas.
inline ScoreCanvas run_scene(const std::string& script) {
    std::optional<ScoreCanvas> canvas;
    std::istringstream is(script);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto l = detail::parse_scene_line(line, line_no);

        if (l.command == "canvas") {
            std::istringstream ts(l.text);
            std::string page = "A4", orient = "portrait";
            ts >> page >> orient;
            canvas = create_canvas(page_size_from_string(page), orientation_from_string(orient),
                                   std::size_t(detail::opt_long(l, "systems", 1)),
                                   detail::opt_flag(l, "indentation", false),
                                   detail::opt_double(l, "dpi", 150.0));
            continue;
        }
        if (!canvas)
            throw ParseError("scene line " + std::to_string(line_no) +
                             ": '" + l.command + "' before any canvas command");

        if (l.command == "clef") {
            const bool all = l.text == "all";
            apply_treble_clef(*canvas, std::size_t(detail::opt_long(l, "system", 0)), all);
        } else if (l.command == "title") {
            add_text(*canvas, TextKind::Title, l.text);
        } else if (l.command == "composer") {
            add_text(*canvas, TextKind::Composer, l.text, detail::opt_double(l, "align", 4.75));
        } else if (l.command == "instrument") {
            add_text(*canvas, TextKind::Instrument, l.text, 0.0,
                     std::size_t(detail::opt_long(l, "system", 0)));
        } else if (l.command == "note") {
            place_notehead(*canvas, std::size_t(detail::opt_long(l, "system", 0)),
                           detail::opt_double(l, "hpos", 0.5),
                           int(detail::opt_long(l, "pitch", 60)),
                           accidental_from_string(detail::opt_str(l, "acc", "none")),
                           notehead_from_string(detail::opt_str(l, "head", "normal")));
        } else if (l.command == "line") {
            std::vector<std::size_t> idx;
            std::istringstream ns(detail::opt_str(l, "notes", ""));
            std::string part;
            while (std::getline(ns, part, ','))
                if (!part.empty()) idx.push_back(std::size_t(std::strtoul(part.c_str(), nullptr, 10)));
            draw_line_across_notes(*canvas, idx,
                                   image::color_from_name(detail::opt_str(l, "color", "black")),
                                   detail::opt_long(l, "width", 1));
        } else {
            throw ParseError("scene line " + std::to_string(line_no) + ": unknown command '" +
                             l.command + "'");
        }
    }
    if (!canvas) throw ParseError("scene script has no canvas command");
    return std::move(*canvas);
}

} // namespace cadenza::genere
