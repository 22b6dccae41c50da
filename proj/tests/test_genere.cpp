#include <doctest.h>

#include <cmath>

#include "cadenza/genere/canvas.hpp"
#include "cadenza/genere/markov.hpp"
#include "cadenza/genere/scene.hpp"
#include "png_oracle.hpp"

using namespace cadenza;
using namespace cadenza::genere;

namespace {

// Independent staff-position oracle: diatonic letters per pitch class, sharps
// spelled on the lower letter, flats on the upper one. Written against
// engraving convention, not against the implementation.
long oracle_staff_y(const ScoreCanvas& c, std::size_t system, int pitch, Accidental acc) {
    static const int letters_sharp[12] = {0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6};
    static const bool black[12] = {false, true,  false, true,  false, false,
                                   true,  false, true,  false, true,  false};
    const int pc = pitch % 12;
    int letter = letters_sharp[pc];
    if (black[pc] && acc == Accidental::Flat) letter += 1;
    const int steps_from_c4 = (pitch / 12 - 5) * 7 + letter; // diatonic steps from C4
    // B4 (middle line) is 6 diatonic steps above C4
    const long half_gap = c.staff_gap / 2;
    return c.middle_line_y(system) - (steps_from_c4 - 6) * half_gap;
}

bool row_has_black(const image::Raster& img, long y, long x0, long x1) {
    for (long x = x0; x <= x1; ++x)
        if (img.get(x, y) == image::kBlack) return true;
    return false;
}

} // namespace

TEST_CASE("create_canvas") {
    SUBCASE("nine A4 portrait systems give 45 strictly increasing line coords") {
        ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 9, true, 96.0);
        REQUIRE(c.systems() == 9);
        std::vector<long> flat;
        for (const auto& lines : c.staff_lines)
            for (long y : lines) flat.push_back(y);
        REQUIRE(flat.size() == 45);
        for (std::size_t i = 1; i < flat.size(); ++i) CHECK(flat[i] > flat[i - 1]);
    }
    SUBCASE("indentation shifts only the first system") {
        ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 3, true, 96.0);
        CHECK(c.system_left[0] > c.system_left[1]);
        CHECK(c.system_left[1] == c.system_left[2]);
        ScoreCanvas d = create_canvas(PageSize::A4, PageOrientation::Portrait, 3, false, 96.0);
        CHECK(d.system_left[0] == d.system_left[1]);
    }
    SUBCASE("zero systems is an error") {
        CHECK_THROWS_AS(create_canvas(PageSize::A4, PageOrientation::Portrait, 0, false),
                        ConfigError);
    }
    SUBCASE("too many systems for the page height is a layout error") {
        CHECK_THROWS_AS(create_canvas(PageSize::A4, PageOrientation::Portrait, 200, false, 96.0),
                        ConfigError);
    }
    SUBCASE("per-page margin rules are data-driven") {
        auto margin_for_page = [](std::size_t page_index) {
            Margins m;
            if (page_index % 2 == 1) { // odd pages get larger margins
                m.left = m.right = 0.14;
            }
            return m;
        };
        ScoreCanvas even = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, false, 96.0,
                                         margin_for_page(0));
        ScoreCanvas odd = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, false, 96.0,
                                        margin_for_page(1));
        CHECK(odd.system_left[0] > even.system_left[0]);
        CHECK(odd.content_right < even.content_right);
    }
}

TEST_CASE("place_notehead") {
    ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, false, 96.0);

    SUBCASE("B4 sits exactly on the middle line") {
        const std::size_t idx = place_notehead(c, 0, 0.5, 71);
        CHECK(c.placed_notes[idx].y == c.middle_line_y(0));
    }
    SUBCASE("the staff-position map matches the oracle for all 128 pitches") {
        for (int pitch = 0; pitch < 128; ++pitch) {
            for (Accidental acc : {Accidental::None, Accidental::Sharp, Accidental::Flat}) {
                CHECK(staff_y(c, 0, pitch, acc) == oracle_staff_y(c, 0, pitch, acc));
            }
        }
    }
    SUBCASE("middle C gets one ledger line below the staff") {
        const std::size_t idx = place_notehead(c, 0, 0.25, 60);
        const PlacedNote& n = c.placed_notes[idx];
        const long ledger_y = c.staff_lines[0][4] + c.staff_gap;
        CHECK(n.y == ledger_y); // C4 sits on the first ledger line
        CHECK(row_has_black(c.raster, ledger_y, n.x - c.staff_gap, n.x + c.staff_gap));
    }
    SUBCASE("out-of-range positions and systems are rejected") {
        CHECK_THROWS_AS(place_notehead(c, 0, 1.5, 60), ConfigError);
        CHECK_THROWS_AS(place_notehead(c, 5, 0.5, 60), ConfigError);
    }
    SUBCASE("placements accumulate in the registry") {
        ScoreCanvas c2 = create_canvas(PageSize::A4, PageOrientation::Portrait, 1, false, 96.0);
        place_notehead(c2, 0, 0.2, 64);
        place_notehead(c2, 0, 0.4, 67, Accidental::Sharp, NoteheadType::Diamond);
        REQUIRE(c2.placed_notes.size() == 2);
        CHECK(c2.placed_notes[1].notehead == NoteheadType::Diamond);
    }
}

TEST_CASE("add_text") {
    ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, true, 96.0);

    SUBCASE("the title is centered within one pixel") {
        add_text(c, TextKind::Title, "SCORE");
        long min_x = long(c.raster.width), max_x = -1;
        for (long y = 0; y < c.staff_lines[0][0] - c.staff_gap; ++y)
            for (long x = 0; x < long(c.raster.width); ++x)
                if (c.raster.get(x, y) == image::kBlack) {
                    min_x = std::min(min_x, x);
                    max_x = std::max(max_x, x);
                }
        REQUIRE(max_x >= 0);
        const long center = (min_x + max_x) / 2;
        CHECK(std::labs(center - long(c.raster.width) / 2) <= 2);
    }
    SUBCASE("composer text lands at the align fraction of the page width") {
        ScoreCanvas c2 = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, true, 96.0);
        add_text(c2, TextKind::Composer, "You", 4.75);
        long min_x = long(c2.raster.width), max_x = -1;
        for (long y = 0; y < c2.staff_lines[0][0] - c2.staff_gap; ++y)
            for (long x = 0; x < long(c2.raster.width); ++x)
                if (c2.raster.get(x, y) == image::kBlack) {
                    min_x = std::min(min_x, x);
                    max_x = std::max(max_x, x);
                }
        REQUIRE(max_x >= 0);
        const long expected = std::lround(double(c2.raster.width) * 4.75 / 6.0);
        CHECK(std::labs((min_x + max_x) / 2 - expected) <= 3);
        CHECK((min_x + max_x) / 2 > long(c2.raster.width) / 2); // top-right zone
    }
    SUBCASE("empty text is rejected") {
        CHECK_THROWS_AS(add_text(c, TextKind::Title, ""), ConfigError);
    }
}

TEST_CASE("draw_line_across_notes") {
    ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, false, 96.0);
    const std::size_t a = place_notehead(c, 0, 0.2, 72);
    const std::size_t b = place_notehead(c, 1, 0.8, 60);

    SUBCASE("a segment connects the two anchors") {
        draw_line_across_notes(c, {a, b}, image::color_from_name("blue"), 1);
        const PlacedNote& na = c.placed_notes[a];
        const PlacedNote& nb = c.placed_notes[b];
        const long mx = (na.x + nb.x) / 2, my = (na.y + nb.y) / 2;
        bool found = false;
        const image::Color blue = image::color_from_name("blue");
        for (long dy = -2; dy <= 2 && !found; ++dy)
            for (long dx = -2; dx <= 2 && !found; ++dx)
                if (c.raster.get(mx + dx, my + dy) == blue) found = true;
        CHECK(found);
    }
    SUBCASE("fewer than two notes is an error") {
        CHECK_THROWS_AS(draw_line_across_notes(c, {a}, image::kBlack, 1), ConfigError);
    }
    SUBCASE("duplicate anchors draw without error") {
        CHECK_NOTHROW(draw_line_across_notes(c, {a, a}, image::kBlack, 1));
    }
}

TEST_CASE("markov learn_from_midi") {
    SUBCASE("an alternating two-note chain is deterministic") {
        midi::NoteDataset d;
        for (int i = 0; i < 8; ++i) {
            d.events.push_back({double(i) * 0.5, 0.5, (i % 2) ? 64 : 60, 100});
            d.source_labels.emplace_back();
        }
        TransitionTable t = learn_from_midi(d);
        CHECK(t.pitch.at(0, 4) == doctest::Approx(1.0));  // C always to E
        CHECK(t.pitch.at(4, 0) == doctest::Approx(1.0));  // E always to C
    }
    SUBCASE("counts match a by-hand bigram tally on a five-note line") {
        // C4 D4 C4 E4 C4: bigrams C->D, D->C, C->E, E->C
        midi::NoteDataset d;
        const int pitches[5] = {60, 62, 60, 64, 60};
        for (int i = 0; i < 5; ++i) {
            d.events.push_back({double(i) * 0.5, 0.5, pitches[i], 100});
            d.source_labels.emplace_back();
        }
        TransitionTable t = learn_from_midi(d);
        CHECK(t.pitch.at(0, 2) == doctest::Approx(0.5)); // C -> D half the time
        CHECK(t.pitch.at(0, 4) == doctest::Approx(0.5)); // C -> E the other half
        CHECK(t.pitch.at(2, 0) == doctest::Approx(1.0)); // D -> C
        CHECK(t.pitch.at(4, 0) == doctest::Approx(1.0)); // E -> C
        // initial distribution is the unigram frequency
        CHECK(t.pitch_init.data[0] == doctest::Approx(3.0 / 5.0));
    }
    SUBCASE("every row is a probability distribution") {
        Rng rng(12);
        midi::NoteDataset d;
        for (int i = 0; i < 200; ++i) {
            d.events.push_back({double(i) * 0.25, 0.1 + rng.uniform() * 0.8,
                                int(rng.below(128)), 80});
            d.source_labels.emplace_back();
        }
        sort_dataset(d);
        TransitionTable t = learn_from_midi(d);
        CHECK_NOTHROW(t.validate());
    }
    SUBCASE("fewer than two events is a data error") {
        midi::NoteDataset d;
        d.events.push_back({0.0, 0.5, 60, 100});
        d.source_labels.emplace_back();
        CHECK_THROWS_AS(learn_from_midi(d), DataError);
    }
}

TEST_CASE("markov sampler") {
    SUBCASE("a deterministic chain is forced") {
        midi::NoteDataset d;
        for (int i = 0; i < 6; ++i) {
            d.events.push_back({double(i) * 0.5, 0.5, (i % 2) ? 64 : 60, 100});
            d.source_labels.emplace_back();
        }
        TransitionTable t = learn_from_midi(d);
        MarkovSampler s(t, 7);
        auto first = s.next();
        auto second = s.next();
        CHECK(first.pitch_class != second.pitch_class);
        CHECK((first.pitch_class == 0 || first.pitch_class == 4));
    }
    SUBCASE("seeded runs reproduce exactly") {
        midi::NoteDataset d;
        Rng rng(3);
        for (int i = 0; i < 50; ++i) {
            d.events.push_back({double(i) * 0.3, 0.25, 50 + int(rng.below(24)), 90});
            d.source_labels.emplace_back();
        }
        TransitionTable t = learn_from_midi(d);
        MarkovSampler a(t, 99), b(t, 99);
        for (int i = 0; i < 40; ++i) {
            auto ea = a.next(), eb = b.next();
            CHECK(ea.pitch_class == eb.pitch_class);
            CHECK(ea.rhythm_class == eb.rhythm_class);
            CHECK(ea.octave == eb.octave);
        }
    }
    SUBCASE("empirical frequencies approach the row probabilities") {
        // two-state pitch chain with known asymmetric probabilities
        TransitionTable t;
        for (std::size_t r = 0; r < kPitchStates; ++r)
            for (std::size_t c2 = 0; c2 < kPitchStates; ++c2)
                t.pitch.at(r, c2) = (c2 == 0) ? 0.7 : (c2 == 1 ? 0.3 : 0.0);
        for (std::size_t r = 0; r < t.rhythm.rows(); ++r) t.rhythm.at(r, 0) = 1.0;
        for (std::size_t r = 0; r < t.octave.rows(); ++r) t.octave.at(r, 5) = 1.0;
        t.pitch_init.data[0] = 1.0;
        t.rhythm_init.data[0] = 1.0;
        t.octave_init.data[5] = 1.0;
        t.validate();

        MarkovSampler s(t, 4242);
        std::size_t zero_count = 0;
        const std::size_t draws = 100000;
        for (std::size_t i = 0; i < draws; ++i)
            if (s.next().pitch_class == 0) ++zero_count;
        const double freq = double(zero_count) / double(draws);
        CHECK(freq > 0.69);
        CHECK(freq < 0.71);
    }
}

TEST_CASE("scene scripts and png rendering") {
    SUBCASE("a blank canvas decodes to an all-white page") {
        ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 1, false, 72.0);
        // wipe the staff lines to get a truly blank page
        c.raster = image::Raster(c.raster.width, c.raster.height, image::kWhite);
        auto decoded = oracle::png_decode(render_png(c));
        CHECK(decoded.width == c.raster.width);
        for (std::size_t i = 0; i < decoded.rgba.size(); i += 4) CHECK(decoded.rgba[i] == 255);
    }
    SUBCASE("rendering is deterministic") {
        auto build = [] {
            ScoreCanvas c = create_canvas(PageSize::A4, PageOrientation::Portrait, 3, true, 72.0);
            apply_treble_clef(c, 0, true);
            add_text(c, TextKind::Title, "Same Bytes");
            place_notehead(c, 0, 0.3, 67, Accidental::Sharp, NoteheadType::X);
            return render_png(c);
        };
        CHECK(build() == build());
    }
    SUBCASE("the scene runner reproduces direct API calls") {
        const std::string script = R"(# demo scene
canvas A4 portrait systems=2 dpi=72 indentation=on
clef all
title Scripted Score
composer align=4.75 Someone
note system=0 hpos=0.30 pitch=71 acc=none head=normal
note system=1 hpos=0.60 pitch=61 acc=sharp head=diamond
line color=blue width=1 notes=0,1
)";
        ScoreCanvas scripted = run_scene(script);

        ScoreCanvas direct = create_canvas(PageSize::A4, PageOrientation::Portrait, 2, true, 72.0);
        apply_treble_clef(direct, 0, true);
        add_text(direct, TextKind::Title, "Scripted Score");
        add_text(direct, TextKind::Composer, "Someone", 4.75);
        place_notehead(direct, 0, 0.30, 71, Accidental::None, NoteheadType::Normal);
        place_notehead(direct, 1, 0.60, 61, Accidental::Sharp, NoteheadType::Diamond);
        draw_line_across_notes(direct, {0, 1}, image::color_from_name("blue"), 1);

        CHECK(render_png(scripted) == render_png(direct));
    }
    SUBCASE("scene errors carry line numbers") {
        CHECK_THROWS_AS(run_scene("note system=0\n"), ParseError);
        CHECK_THROWS_AS(run_scene("canvas A4 portrait systems=1\nwobble\n"), ParseError);
    }
}
