#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "penergy/fractal.hpp"

using namespace penergy;

TEST_CASE("level sizes: interval and gasket") {
    PcfStructure iv = preset_interval(2.0);
    LevelHierarchy hi(iv);
    for (int k = 0; k <= 6; ++k)
        CHECK(hi.level(k).vertices->size() == (1 << k) + 1);

    PcfStructure sg = preset_sg();
    LevelHierarchy hs(sg);
    CHECK(hs.level(0).vertices->size() == 3);
    CHECK(hs.level(1).vertices->size() == 6);   // three glued triangles
    CHECK(hs.level(2).vertices->size() == 15);  // 3(3^n+1)/2
    CHECK(hs.level(3).vertices->size() == 42);
    CHECK(hs.level(1).num_words() == 3);
    CHECK(hs.level(4).num_words() == 81);
}

TEST_CASE("level 0 is V0 with the empty word") {
    PcfStructure sg = preset_sg();
    LevelGraph g0 = build_level(sg, 0);
    CHECK(g0.vertices->size() == 3);
    CHECK(g0.num_words() == 1);
    CHECK(g0.cells[0] == std::vector<int>{0, 1, 2});
    CHECK(g0.word_weights[0] == 1.0);
}

TEST_CASE("word weights multiply") {
    PcfStructure sg = preset_sg();
    sg.r = {0.5, 1.0, 2.0};
    LevelHierarchy h(sg);
    const LevelGraph& g2 = h.level(2);
    for (int w1 = 0; w1 < 3; ++w1)
        for (int w2 = 0; w2 < 3; ++w2)
            CHECK(g2.word_weights[w1 * 3 + w2] == doctest::Approx(sg.r[w1] * sg.r[w2]));
    for (const auto& cell : g2.cells) CHECK(cell.size() == 3);
}

TEST_CASE("embeddings are injective and stable") {
    PcfStructure sg = preset_sg();
    LevelHierarchy h(sg);
    for (int n = 1; n <= 4; ++n) {
        const LevelGraph& g = h.level(n);
        std::set<int> image(g.prev_embed.begin(), g.prev_embed.end());
        CHECK(static_cast<int>(image.size()) == h.level(n - 1).vertices->size());
    }
    LevelHierarchy h2(sg);
    CHECK(h2.level(3).vertices->labels() == h.level(3).vertices->labels());
}

TEST_CASE("refine_form: interval dyadic energy") {
    for (double p : {1.5, 2.0, 3.0}) {
        PcfStructure iv = preset_interval(p);
        LevelHierarchy h(iv);
        StandardForm e0(iv.boundary, p, {{0, 1, 1.0}});
        StandardForm e1 = refine_form(e0, h, 0);
        const LevelGraph& g1 = h.level(1);
        const double w = std::pow(2.0, p - 1.0);
        int count = 0;
        for (const Edge& e : e1.edges()) {
            CHECK(e.c == doctest::Approx(w));
            ++count;
        }
        CHECK(count == 2);
        CHECK(g1.vertices->size() == 3);
    }
}

TEST_CASE("refine_form rejects a level mismatch") {
    PcfStructure sg = preset_sg();
    LevelHierarchy h(sg);
    StandardForm e0(sg.boundary, 2.0, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    CHECK_THROWS_AS(refine_form(e0, h, 1), DomainError);
}

TEST_CASE("refine_form linearity and zero form") {
    PcfStructure sg = preset_sg();
    sg.r = {0.7, 1.1, 1.9};
    LevelHierarchy h(sg);
    StandardForm zero(sg.boundary, 2.0, {});
    CHECK(refine_form(zero, h, 0).edges().empty());

    StandardForm a(sg.boundary, 2.2, {{0, 1, 1.0}, {1, 2, 0.5}});
    StandardForm b(sg.boundary, 2.2, {{0, 2, 2.0}});
    StandardForm lhs = refine_form(sum_forms(a, b), h, 0);
    StandardForm rhs = sum_forms(refine_form(a, h, 0), refine_form(b, h, 0));
    for (int u = 0; u < 6; ++u)
        for (int v = u + 1; v < 6; ++v) CHECK(lhs.coeff(u, v) == doctest::Approx(rhs.coeff(u, v)));
}

TEST_CASE("energy identity for the refinement operator") {
    PcfStructure sg = preset_sg();
    sg.r = {0.6, 1.0, 1.4};
    LevelHierarchy h(sg);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        StandardForm e(sg.boundary, 1.7, {{0, 1, 0.5 + (t % 3)}, {1, 2, 1.0}, {0, 2, 0.3}});
        StandardForm le = refine_form(e, h, 0);
        const LevelGraph& g1 = h.level(1);
        auto g = oracles::random_function(rng, g1.vertices->size());
        double manual = 0.0;
        for (int i = 0; i < 3; ++i) {
            std::vector<double> pullback(3);
            for (int b = 0; b < 3; ++b) pullback[b] = g[g1.cells[i][b]];
            manual += e.eval(pullback) / sg.r[i];
        }
        CHECK(le.eval(g) == doctest::Approx(manual).epsilon(1e-13));
    }
}

TEST_CASE("iterated refinement agrees with single steps") {
    PcfStructure sg = preset_sg();
    sg.r = {0.8, 1.0, 1.3};
    LevelHierarchy h(sg);
    StandardForm e(sg.boundary, 2.4, {{0, 1, 1.0}, {1, 2, 2.0}, {0, 2, 0.25}});
    StandardForm two_steps = refine_form(refine_form(e, h, 0), h, 1);
    StandardForm direct = refine_form_iter(e, h, 0, 2);
    CHECK(refine_form_iter(e, h, 0, 0).edges().size() == e.edges().size());
    for (int u = 0; u < 15; ++u)
        for (int v = u + 1; v < 15; ++v)
            CHECK(two_steps.coeff(u, v) == doctest::Approx(direct.coeff(u, v)));
    // each level-2 cell scales its private edges by (r_{w1} r_{w2})^{-1}
    const LevelGraph& g2 = h.level(2);
    int exact = 0;
    for (size_t w = 0; w < g2.cells.size(); ++w) {
        const double expect = 1.0 / g2.word_weights[w];
        const double got = direct.coeff(g2.cells[w][0], g2.cells[w][1]) / e.coeff(0, 1);
        if (std::fabs(got - expect) < 1e-12 * expect) ++exact;
    }
    CHECK(exact >= 7);  // a couple of shared edges accumulate two cells
}

TEST_CASE("symmetry checks on the gasket") {
    PcfStructure sg = preset_sg();
    LevelHierarchy h(sg);
    SymmetryReport rep = check_symmetry(sg, h, 2);
    CHECK(rep.valid);
    CHECK(rep.vertex_perms.size() == 2);
    for (const auto& perm : rep.vertex_perms) {
        std::set<int> image(perm.begin(), perm.end());
        CHECK(static_cast<int>(image.size()) == h.level(2).vertices->size());
    }

    StandardForm e0(sg.boundary, 2.0, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}});
    StandardForm le = refine_form(e0, h, 0);
    SymmetryReport rep1 = check_symmetry(sg, h, 1);
    std::mt19937_64 rng(5);
    for (const auto& perm : rep1.vertex_perms) {
        auto f = oracles::random_function(rng, 6);
        std::vector<double> fs(6);
        for (int v = 0; v < 6; ++v) fs[perm[v]] = f[v];
        CHECK(le.eval(fs) == doctest::Approx(le.eval(f)).epsilon(1e-12));
    }

    PcfStructure bad = preset_sg();
    bad.group[0].cell_perm = {2, 1, 0};  // swap q1,q2 on V0 but cells 1,3
    CHECK_THROWS_AS(bad.validate(), StructureError);
}

TEST_CASE("trivial group is always valid") {
    PcfStructure p3 = preset_path3();
    LevelHierarchy h(p3);
    SymmetryReport rep = check_symmetry(p3, h, 2);
    CHECK(rep.valid);
}

TEST_CASE("structure validation catches malformed input") {
    PcfStructure s = preset_sg();
    s.r = {1.0, 1.0};
    CHECK_THROWS_AS(s.validate(), StructureError);

    s = preset_sg();
    s.cell_images[0][1] = s.cell_images[0][0];  // non-injective cell map
    CHECK_THROWS_AS(s.validate(), StructureError);

    s = preset_sg();
    s.group.clear();
    s.geometry.clear();
    s.fixed_words.clear();
    s.cell_images = {{"q1", "a", "b"}, {"c", "q2", "d"}, {"e", "f", "q3"}};  // disconnected
    CHECK_THROWS_AS(s.validate(), StructureError);

    s = preset_sg();
    s.group.clear();
    s.cell_images[0][0] = "z1";  // q1 no longer appears among the images
    CHECK_THROWS_AS(s.validate(), StructureError);
}

TEST_CASE("strict zero walks") {
    PcfStructure sg = preset_sg();
    ZeroWalkReport rep = strict_zero_walk(sg);
    CHECK(rep.all_connected);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(rep.walks[i][j].size() == 2);

    // unit square corners: opposite corners connect along the sides
    PcfStructure sq;
    sq.boundary = make_vertex_set({"a", "b", "c", "d"});
    sq.cell_images = {{"a", "ab", "x1", "ad"},
                      {"ab", "b", "bc", "x2"},
                      {"x3", "bc", "c", "cd"},
                      {"ad", "x4", "cd", "d"}};
    sq.r = {1, 1, 1, 1};
    sq.geometry = {{"a", {0, 0}}, {"b", {1, 0}}, {"c", {1, 1}}, {"d", {0, 1}}};
    ZeroWalkReport rq = strict_zero_walk(sq);
    CHECK(rq.all_connected);
    CHECK(rq.walks[0][2].size() == 3);  // a -> b or d -> c

    // collinear points with unequal gaps: the far pair has no strict 0-walk
    PcfStructure line;
    line.boundary = make_vertex_set({"u", "v", "w"});
    line.cell_images = {{"u", "m", "z"}, {"m", "v", "w"}};
    line.r = {1, 1};
    line.geometry = {{"u", {0.0}}, {"v", {1.0}}, {"w", {3.0}}};
    ZeroWalkReport rl = strict_zero_walk(line);
    CHECK_FALSE(rl.all_connected);
    CHECK(rl.walks[0][1].size() == 2);
    CHECK(rl.walks[0][2].empty());

    PcfStructure nogeo = preset_sg();
    nogeo.geometry.clear();
    CHECK_THROWS_AS(strict_zero_walk(nogeo), DomainError);
}

TEST_CASE("level coordinates propagate through the cell maps") {
    PcfStructure sg = preset_sg();
    LevelHierarchy h(sg);
    auto coords = level_coordinates(sg, h, 2);
    REQUIRE_FALSE(coords.empty());
    const LevelGraph& g2 = h.level(2);
    CHECK(coords.size() == static_cast<size_t>(g2.vertices->size()));
    for (int b = 0; b < 3; ++b) {
        auto want = sg.geometry.at(sg.boundary->label(b));
        auto got = coords[g2.boundary_ids[b]];
        CHECK(got[0] == doctest::Approx(want[0]));
        CHECK(got[1] == doctest::Approx(want[1]));
    }
    const auto& cell = g2.cells[0];
    const double dx = coords[cell[0]][0] - coords[cell[1]][0];
    const double dy = coords[cell[0]][1] - coords[cell[1]][1];
    CHECK(std::sqrt(dx * dx + dy * dy) == doctest::Approx(0.25).epsilon(1e-9));

    PcfStructure partial = preset_sg();
    partial.geometry.erase("a12");
    LevelHierarchy hp(partial);
    CHECK(level_coordinates(partial, hp, 1).empty());
}

TEST_CASE("preset fixed words fix their boundary points") {
    PcfStructure sg = preset_sg();
    LevelHierarchy h(sg);
    for (const auto& [label, word] : sg.fixed_words) {
        const int b = sg.boundary->require_index(label);
        const LevelGraph& g1 = h.level(1);
        CHECK(g1.cells[word[0]][b] == g1.boundary_ids[b]);
    }
}
