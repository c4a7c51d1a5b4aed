#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "mgl/eval.hpp"

using namespace mgl;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "mgl_test_eval";
    fs::create_directories(dir);
    return dir / name;
}

RunTrace make_trace(std::size_t len, bool flat) {
    RunTrace t;
    for (std::size_t i = 0; i < len; ++i) {
        const double s = flat ? 3.0 : 10.0 / static_cast<double>(i + 1);
        t.rows.push_back({i + 1, 1.0, {s, 0.5, 0.25, s + 0.75}, 0});
    }
    return t;
}

} // namespace

TEST_CASE("accuracy counts matches") {
    std::vector<int> truth(1500);
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(i % 3);
    CHECK(accuracy(truth, truth) == 1.0);
    std::vector<int> wrong(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) wrong[i] = (truth[i] + 1) % 3;
    CHECK(accuracy(wrong, truth) == 0.0);
    auto some = truth;
    for (std::size_t i = 0; i < 73; ++i) some[i * 20] = (some[i * 20] + 2) % 3;
    CHECK(accuracy(some, truth) == Approx(1427.0 / 1500.0).epsilon(1e-15));
    CHECK(accuracy(some, truth) == Approx(0.9513).margin(1e-4));
    CHECK_THROWS_AS(accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), ContractError);
}

TEST_CASE("accuracy is invariant under a shared relabeling") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> cls(0, 3);
    std::vector<int> pred(200), truth(200);
    for (auto& v : pred) v = cls(rng);
    for (auto& v : truth) v = cls(rng);
    std::vector<int> perm{2, 0, 3, 1};
    CHECK(accuracy(apply_permutation(pred, perm), apply_permutation(truth, perm)) == accuracy(pred, truth));
}

TEST_CASE("accuracy can exclude masked points") {
    std::vector<int> truth{0, 1, 2, 0};
    std::vector<int> pred{0, 1, 0, 1};
    std::vector<char> mask{1, 1, 0, 0};
    CHECK(accuracy(pred, truth) == 0.5);
    CHECK(accuracy(pred, truth, mask) == 0.0);
}

TEST_CASE("confusion matrix rows are true classes") {
    std::vector<int> truth{0, 0, 0, 1, 1, 2};
    std::vector<int> pred{0, 1, 1, 1, 1, 0};
    auto c = confusion_matrix(pred, truth, 3);
    CHECK(c == ConfusionMatrix{{1, 2, 0}, {0, 2, 0}, {1, 0, 0}});
    std::int64_t total = 0;
    for (const auto& row : c)
        for (auto v : row) total += v;
    CHECK(total == 6);
}

TEST_CASE("aggregate statistics") {
    std::vector<double> one{0.8};
    auto r1 = aggregate(one, std::vector<double>{2.0});
    CHECK(r1.stddev == 0.0);
    CHECK(r1.accuracy == 0.8);
    CHECK(r1.mean_runtime_s == 2.0);

    std::vector<double> two{0.9, 1.0};
    auto r2 = aggregate(two, {});
    CHECK(r2.accuracy == Approx(0.95));
    CHECK(r2.stddev == Approx(std::sqrt(0.005)).epsilon(1e-12));
    CHECK(r2.stddev == Approx(0.0707).margin(1e-4));

    // two-pass statistics in long double as the oracle
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.8, 1.0);
    std::vector<double> acc(100), rt(100);
    for (auto& v : acc) v = U(rng);
    for (auto& v : rt) v = U(rng);
    long double mean = 0;
    for (double v : acc) mean += v;
    mean /= 100;
    long double ss = 0;
    for (double v : acc) ss += (v - mean) * (v - mean);
    const double sd = static_cast<double>(std::sqrt(ss / 99));
    auto r = aggregate(acc, rt);
    CHECK(r.runs == 100);
    CHECK(std::abs(r.accuracy - static_cast<double>(mean)) < 1e-12);
    CHECK(std::abs(r.stddev - sd) < 1e-12);
    CHECK_THROWS_AS(aggregate(std::vector<double>{}, {}), ContractError);
}

TEST_CASE("scatter svg element counts") {
    std::vector<double> xs{0.0, 1.0, 2.0}, ys{0.0, 1.0, 0.5};
    std::vector<int> labels{0, 1, 2};
    auto svg = scatter_svg(xs, ys, labels, 3);
    CHECK(count_of(svg, "<circle") == 3);
    CHECK(count_of(svg, "class=\"legend-entry\"") == 3);
    std::regex fill("fill=\"(#[0-9a-f]{6})\"");
    std::set<std::string> fills;
    for (std::sregex_iterator it(svg.begin(), svg.end(), fill), end; it != end; ++it) fills.insert((*it)[1]);
    CHECK(fills.size() == 3);
    CHECK(svg == scatter_svg(xs, ys, labels, 3));

    auto empty = scatter_svg({}, {}, {}, 0);
    CHECK(count_of(empty, "<circle") == 0);
    CHECK(empty.rfind("<svg", 0) == 0);
    CHECK(empty.find("</svg>") != std::string::npos);
}

TEST_CASE("scatter file is byte deterministic") {
    PointMatrix p(4, 3);
    p << 0, 0, 9, 1, 1, 9, 2, 0, 9, 3, 1, 9;
    std::vector<int> labels{0, 0, 1, 1};
    auto a = scratch("a.svg"), b = scratch("b.svg");
    emit_scatter_svg(p, labels, 2, a);
    emit_scatter_svg(p, labels, 2, b);
    CHECK(slurp(a) == slurp(b));
    CHECK(count_of(slurp(a), "<circle") == 4);
}

TEST_CASE("energy plot has four series") {
    auto svg = energy_svg(make_trace(20, false));
    CHECK(count_of(svg, "<polyline") == 4);
    auto single = energy_svg(make_trace(1, false));
    CHECK(count_of(single, "<polyline") == 4);
    CHECK(single.find("</svg>") != std::string::npos);
    CHECK(single.find("nan") == std::string::npos);
    CHECK_THROWS_AS(energy_svg(RunTrace{}), ContractError);
}

TEST_CASE("flat energy trace draws flat lines") {
    auto svg = energy_svg(make_trace(5, true));
    std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
    std::size_t lines = 0;
    for (std::sregex_iterator it(svg.begin(), svg.end(), poly), end; it != end; ++it) {
        ++lines;
        std::istringstream pts((*it)[1]);
        std::string xy;
        std::set<std::string> ys;
        while (pts >> xy) ys.insert(xy.substr(xy.find(',') + 1));
        CHECK(ys.size() == 1);
    }
    CHECK(lines == 4);
}

TEST_CASE("energy plot writes svg and csv") {
    auto svg = scratch("e.svg"), csv = scratch("e.csv");
    emit_energy_plot(make_trace(3, false), svg, csv);
    auto text = slurp(csv);
    CHECK(text.rfind("iter,epsilon,smoothing,potential,fidelity,total,label_changes\n", 0) == 0);
    CHECK(count_of(text, "\n") == 4);
}

TEST_CASE("class masks") {
    const int w = 4, h = 3;
    std::vector<int> one(static_cast<std::size_t>(w * h), 1);
    auto paths = emit_class_masks(one, w, h, 3, scratch("one").string());
    REQUIRE(paths.size() == 3);
    for (int k = 0; k < 3; ++k) {
        auto img = read_image(paths[static_cast<std::size_t>(k)]);
        CHECK(img.width == w);
        CHECK(img.height == h);
        for (auto px : img.pixels) CHECK(px == (k == 1 ? 255 : 0));
    }

    std::vector<int> checker(static_cast<std::size_t>(w * h));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) checker[static_cast<std::size_t>(y * w + x)] = (x + y) % 2;
    auto cp = emit_class_masks(checker, w, h, 2, scratch("checker").string());
    auto m0 = read_image(cp[0]), m1 = read_image(cp[1]);
    for (std::size_t i = 0; i < m0.pixels.size(); ++i) CHECK(m0.pixels[i] + m1.pixels[i] == 255);
    CHECK(m0.at(0, 0, 0) == 255);
    CHECK(m0.at(1, 0, 0) == 0);

    CHECK_THROWS_AS(emit_class_masks(checker, 5, 3, 2, scratch("bad").string()), ContractError);
}
