#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>
#include <sstream>

#include "mgl/datasets.hpp"
#include "mgl/solver.hpp"

using namespace mgl;
using Catch::Approx;

namespace {

SimilarityGraph empty_graph(std::size_t n) {
    auto g = symmetrize(n, std::vector<WeightEntry>{});
    g.degrees.assign(n, 1.0);
    return g;
}

// Star around vertex 0 with hand-set normalized weights.
SimilarityGraph star(std::vector<double> norm_weights) {
    const std::size_t leaves = norm_weights.size();
    std::vector<WeightEntry> e;
    for (std::size_t j = 1; j <= leaves; ++j) e.push_back({0, j, 1.0});
    auto g = symmetrize(leaves + 1, e);
    g.degrees.assign(leaves + 1, 1.0);
    g.norm_weights.assign(g.weights.size(), 0.0);
    for (std::size_t e2 = 0; e2 < leaves; ++e2) g.norm_weights[e2] = norm_weights[e2]; // row 0 comes first
    for (std::size_t j = 1; j <= leaves; ++j) g.norm_weights[g.row_offsets[j]] = norm_weights[j - 1];
    return g;
}

SolverConfig config(int K) {
    SolverConfig c;
    c.num_classes = K;
    return c;
}

} // namespace

TEST_CASE("init state is seeded and respects anchors") {
    auto c = config(3);
    c.seed = 42;
    FidelitySet f{{{1, 2, 30.0}, {4, 0, 30.0}}};
    auto a = init_state(10, c, f);
    auto b = init_state(10, c, f);
    CHECK(std::memcmp(a.values.data(), b.values.data(), 10 * sizeof(double)) == 0);
    CHECK(a.values[1] == 2.0);
    CHECK(a.values[4] == 0.0);
    for (double v : a.values) CHECK((v >= a.lower() && v <= a.upper()));

    c.seed = 43;
    CHECK(init_state(10, c, f).values != a.values);
}

TEST_CASE("init state with every vertex anchored") {
    auto c = config(4);
    FidelitySet f;
    for (std::size_t i = 0; i < 12; ++i) f.entries.push_back({i, static_cast<int>(i % 4), 1.0});
    auto s = init_state(12, c, f);
    for (std::size_t i = 0; i < 12; ++i) CHECK(s.values[i] == static_cast<double>(i % 4));
}

TEST_CASE("init state is uniform on (-1/2, K-1/2)") {
    auto s = init_state(10000, config(3), FidelitySet{});
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= 10000.0;
    // uniform on (-0.5, 2.5): mean 1, sd of the mean sqrt(9/12/1e4) ~ 0.009
    CHECK(std::abs(mean - 1.0) < 0.05);
    std::array<int, 3> counts{};
    for (int y : s.labels()) ++counts[static_cast<std::size_t>(y)];
    for (int c : counts) CHECK(std::abs(c - 3333) < 200);
}

TEST_CASE("sweep leaves a flat integer state unchanged") {
    auto g = build_graph(gen_three_moons(1, 0.02, 20, 5).points, GraphConfig{5, 5});
    StateVector s{std::vector<double>(g.size(), 1.0), 3};
    auto next = gradient_sweep(s, g, FidelityField(FidelitySet{}, g.size()), 1.0, 0.01);
    CHECK(next.values == s.values);
}

TEST_CASE("single anchored vertex update") {
    auto g = empty_graph(1);
    FidelitySet f{{{0, 2, 30.0}}};
    StateVector s{{2.25}, 3};
    auto next = gradient_sweep(s, g, FidelityField(f, 1), 1.0, 0.01);
    // independent scalar evaluation: f = 0.25, well slope 2f^3 - 3f^2 + f
    const double fr = 0.25;
    const double slope = 2 * fr * fr * fr - 3 * fr * fr + fr;
    const double expect = 2.25 - 0.01 * (slope + 30.0 * (2.25 - 2.0));
    CHECK(next.values[0] == Approx(expect).epsilon(1e-15));
    CHECK(next.values[0] == Approx(2.1741).margin(5e-5)); // 2.1740625, rounded
}

TEST_CASE("sweep displacement is linear in dt") {
    auto g = build_graph(gen_three_moons(2, 0.02, 30, 5).points, GraphConfig{5, 5});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> off(0.1, 0.4);
    StateVector s{std::vector<double>(g.size()), 3};
    for (auto& v : s.values) v = 1.0 + off(rng); // one class, away from kinks
    FidelityField none(FidelitySet{}, g.size());
    auto a = gradient_sweep(s, g, none, 1.0, 0.01);
    auto b = gradient_sweep(s, g, none, 1.0, 0.02);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(b.values[i] - s.values[i] == Approx(2.0 * (a.values[i] - s.values[i])).margin(1e-15));
}

TEST_CASE("sweep clamps to the state domain") {
    auto g = empty_graph(1);
    FidelitySet f{{{0, 0, 1000.0}}};
    StateVector s{{2.4}, 3};
    auto next = gradient_sweep(s, g, FidelityField(f, 1), 1.0, 0.01);
    CHECK(next.values[0] == s.lower());
}

TEST_CASE("non-finite update names the vertex") {
    auto g = empty_graph(3);
    FidelitySet f{{{2, 0, 1e300}}};
    StateVector s{{0.0, 0.0, 2.0}, 3};
    CHECK_THROWS_WITH(gradient_sweep(s, g, FidelityField(f, 3), 1.0, 1e10),
                      Catch::Matchers::ContainsSubstring("vertex 2"));
}

TEST_CASE("relabel is a no-op when no label changed") {
    auto g = star({1.0, 1.0});
    StateVector s{{0.2, 1.1, 2.3}, 3};
    auto out = greedy_relabel_pass(s, s.labels(), g);
    CHECK(out.values == s.values);
}

TEST_CASE("relabel follows the neighbors' class") {
    auto g = star({1.0, 1.0, 1.0});
    StateVector s{{0.1, 2.0, 2.0, 2.0}, 3};
    std::vector<int> before{1, 2, 2, 2};
    auto out = greedy_relabel_pass(s, before, g);
    CHECK(out.values[0] == Approx(2.1));
    // rho(2.1, 2) = 0.1 against rho(0.1, 2) = 0.9
    CHECK(local_smoothing_cost(out.values, g, 0, 2.1, 3) == Approx(3 * 0.01));
}

TEST_CASE("relabel ties go to the smallest class") {
    auto g = star({1.0, 1.0});
    StateVector s{{0.25, 0.0, 1.0}, 3};
    std::vector<int> before{1, 0, 1};
    // costs: k=0 0.25^2+0.75^2, k=1 0.75^2+0.25^2, k=2 0.75^2+0.75^2
    std::vector<double> expect{0.625, 0.625, 1.125};
    for (int k = 0; k < 3; ++k) CHECK(local_smoothing_cost(s.values, g, 0, k + 0.25, 3) == Approx(expect[static_cast<std::size_t>(k)]));
    auto out = greedy_relabel_pass(s, before, g);
    CHECK(out.values[0] == 0.25);
}

TEST_CASE("relabel uses values already updated in the pass") {
    // 0 - 1 - 2 path: vertex 1 relabels first, then 2 sees its new value
    std::vector<WeightEntry> e{{0, 1, 1.0}, {1, 2, 1.0}};
    auto g = symmetrize(3, e);
    g.degrees.assign(3, 1.0);
    g.norm_weights.assign(g.weights.size(), 1.0);
    StateVector s{{2.0, 0.1, 1.45}, 3};
    std::vector<int> before{2, 1, 2};
    auto out = greedy_relabel_pass(s, before, g);
    CHECK(out.values[1] == Approx(2.1));
    CHECK(label_of(out.values[2], 3) == 2);
}

TEST_CASE("relabel never increases the local smoothing cost of a moved vertex") {
    std::mt19937_64 rng(4);
    auto ds = gen_three_moons(3, 0.02, 40, 5);
    auto g = build_graph(ds.points, GraphConfig{6, 6});
    std::uniform_real_distribution<double> U(-0.5, 2.5);
    for (int t = 0; t < 50; ++t) {
        StateVector s{std::vector<double>(g.size()), 3};
        for (auto& v : s.values) v = U(rng);
        auto before = s.labels();
        // flip labels of a few vertices by one class
        StateVector moved = s;
        for (std::size_t i = 0; i < g.size(); i += 7) moved.values[i] = moved.clamp(moved.values[i] + 1.0);
        auto out = greedy_relabel_pass(moved, before, g);
        // replay sequentially: at each moved vertex the chosen class is the argmin given the working state
        StateVector work = moved;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (out.values[i] != work.values[i]) {
                const double chosen = local_smoothing_cost(work.values, g, i, out.values[i], 3);
                CHECK(chosen <= local_smoothing_cost(work.values, g, i, work.values[i], 3) + 1e-12);
            }
            work.values[i] = out.values[i];
        }
        for (double v : out.values) CHECK((v >= out.lower() && v <= out.upper()));
    }
}

TEST_CASE("epsilon schedules") {
    CHECK(epsilon_values(FixedEpsilon{1.5}) == std::vector<double>{1.5});
    auto v = epsilon_values(AdaptiveEpsilon{2.0, 0.01, 0.1});
    // 2 * 0.9^k >= 0.01  <=>  k <= log(0.005) / log(0.9) = 50.29
    CHECK(v.size() == 51);
    CHECK(v.front() == 2.0);
    CHECK(v.back() >= 0.01);
    CHECK(v.back() * 0.9 < 0.01);
}

TEST_CASE("solver config validation") {
    auto c = config(3);
    c.mu = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config(3);
    c.schedule = AdaptiveEpsilon{0.01, 2.0, 0.1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.schedule = AdaptiveEpsilon{2.0, 0.01, 1.5};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config(1);
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("full fidelity with large mu reproduces the anchors") {
    auto ds = gen_three_moons(5, 0.02, 50, 10);
    auto g = build_graph(ds.points, GraphConfig{});
    auto f = sample_fidelity(*ds.labels, 3, FidelitySpec{Fraction{1.0}, 0}, 1e4);
    auto c = config(3);
    c.mu = 1e4;
    c.n_max = 50;
    auto r = run(g, f, c);
    CHECK(r.labels == *ds.labels);
}

TEST_CASE("run trace and determinism") {
    auto ds = gen_three_moons(6, 0.02, 60, 10);
    auto g = build_graph(ds.points, GraphConfig{});
    auto f = sample_fidelity(*ds.labels, 3, FidelitySpec{PerClassCount{5}, 1}, 30.0);
    auto c = config(3);
    c.n_max = 60;
    c.seed = 9;
#ifdef _OPENMP
    setenv("GLM_THREADS", "1", 1);
#endif
    auto a = run(g, f, c);
#ifdef _OPENMP
    setenv("GLM_THREADS", "3", 1);
#endif
    auto b = run(g, f, c);
    unsetenv("GLM_THREADS");
    CHECK(std::memcmp(a.state.values.data(), b.state.values.data(), a.state.size() * sizeof(double)) == 0);
    CHECK(a.labels == b.labels);
    REQUIRE(a.trace.rows.size() == 60);
    CHECK(a.trace.rows.front().iter == 1);
    CHECK(a.trace.rows.back().iter == 60);
    for (const auto& row : a.trace.rows) {
        CHECK(row.energy.total == Approx(row.energy.smoothing + row.energy.potential + row.energy.fidelity).epsilon(1e-12));
        CHECK(row.epsilon == 1.0);
    }
    for (double v : a.state.values) CHECK((v >= a.state.lower() && v <= a.state.upper()));

    std::ostringstream csv;
    a.trace.write_csv(csv);
    const auto text = csv.str();
    CHECK(text.rfind("iter,epsilon,smoothing,potential,fidelity,total,label_changes\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 61);
}

TEST_CASE("adaptive run traces every epsilon block") {
    auto ds = gen_three_moons(7, 0.02, 30, 10);
    auto g = build_graph(ds.points, GraphConfig{});
    auto f = sample_fidelity(*ds.labels, 3, FidelitySpec{PerClassCount{5}, 1}, 30.0);
    auto c = config(3);
    c.schedule = AdaptiveEpsilon{2.0, 0.5, 0.5};
    c.n_max = 4;
    auto r = run(g, f, c);
    REQUIRE(r.trace.rows.size() == 12);
    CHECK(r.trace.rows[0].epsilon == 2.0);
    CHECK(r.trace.rows[4].epsilon == 1.0);
    CHECK(r.trace.rows[11].epsilon == 0.5);
}

TEST_CASE("early stop ends each block once updates are small") {
    auto ds = gen_three_moons(8, 0.02, 30, 10);
    auto g = build_graph(ds.points, GraphConfig{});
    auto f = sample_fidelity(*ds.labels, 3, FidelitySpec{Fraction{1.0}, 0}, 30.0);
    auto c = config(3);
    c.n_max = 500;
    c.early_stop_tol = 1e-6;
    auto r = run(g, f, c);
    CHECK(r.trace.rows.size() < 500);
}

TEST_CASE("empty fidelity warns") {
    auto ds = gen_three_moons(9, 0.02, 20, 5);
    auto g = build_graph(ds.points, GraphConfig{5, 5});
    int warnings = 0;
    auto prev = set_warning_handler([&](std::string_view) { ++warnings; });
    auto c = config(3);
    c.n_max = 2;
    run(g, FidelitySet{}, c);
    set_warning_handler(prev);
    CHECK(warnings >= 1);
}

TEST_CASE("single-sided smoothing scale is selectable") {
    auto ds = gen_three_moons(10, 0.02, 40, 10);
    auto g = build_graph(ds.points, GraphConfig{});
    auto f = sample_fidelity(*ds.labels, 3, FidelitySpec{PerClassCount{5}, 1}, 30.0);
    auto c = config(3);
    c.n_max = 5;
    auto exact = run(g, f, c);
    c.smoothing_scale = 1.0;
    auto single = run(g, f, c);
    CHECK(exact.state.values != single.state.values);
    c.smoothing_scale = 0.0;
    CHECK_THROWS_AS(run(g, f, c), ConfigError);
}
