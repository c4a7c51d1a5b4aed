#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mgl/dataset.hpp"
#include "mgl/error.hpp"
#include "mgl/gl_model.hpp"
#include "mgl/image.hpp"
#include "mgl/rng.hpp"

namespace mgl {

// ---------------------------------------------------------------------------
// Synthetic generators

// Three half circles in the plane, embedded in R^100 with Gaussian noise of
// variance `noise_variance` on every coordinate. 500 points per class.
inline DataSet gen_three_moons(std::uint64_t seed, double noise_variance = 0.02,
                               std::size_t per_class = 500, std::size_t dim = 100) {
    DataSet ds;
    ds.num_classes = 3;
    ds.points = PointMatrix::Zero(static_cast<Eigen::Index>(3 * per_class), static_cast<Eigen::Index>(dim));
    ds.labels = Labels(3 * per_class);
    auto rng = make_rng(seed, Stream::ThreeMoons);
    std::uniform_real_distribution<double> upper(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> lower(std::numbers::pi, 2.0 * std::numbers::pi);

    Eigen::Index row = 0;
    for (int c = 0; c < 3; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            double x = 0.0, y = 0.0;
            if (c == 2) {
                const double t = lower(rng);
                x = 1.5 + 1.5 * std::cos(t);
                y = 0.4 + 1.5 * std::sin(t);
            } else {
                const double t = upper(rng);
                x = (c == 0 ? 0.0 : 3.0) + std::cos(t);
                y = std::sin(t);
            }
            ds.points(row, 0) = x;
            ds.points(row, 1) = y;
            (*ds.labels)[static_cast<std::size_t>(row)] = c;
        }
    }
    if (noise_variance > 0.0) {
        std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
        for (Eigen::Index i = 0; i < ds.points.rows(); ++i)
            for (Eigen::Index j = 0; j < ds.points.cols(); ++j) ds.points(i, j) += noise(rng);
    }
    return ds;
}

// Four unit-covariance Gaussians in the plane, mapped onto a Swiss roll by
// (x, y) -> (x cos x, y, x sin x). 400 points per class.
inline DataSet gen_swiss_roll(std::uint64_t seed, std::size_t per_class = 400) {
    static constexpr double kMeans[4][2] = {{7.5, 7.5}, {7.5, 12.5}, {12.5, 7.5}, {12.5, 12.5}};
    DataSet ds;
    ds.num_classes = 4;
    ds.points = PointMatrix(static_cast<Eigen::Index>(4 * per_class), 3);
    ds.labels = Labels(4 * per_class);
    auto rng = make_rng(seed, Stream::SwissRoll);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Index row = 0;
    for (int c = 0; c < 4; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            const double x = kMeans[c][0] + gauss(rng);
            const double y = kMeans[c][1] + gauss(rng);
            ds.points(row, 0) = x * std::cos(x);
            ds.points(row, 1) = y;
            ds.points(row, 2) = x * std::sin(x);
            (*ds.labels)[static_cast<std::size_t>(row)] = c;
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Image patch features

struct ImageSpec {
    int patch = 5;

    void validate(const Image& image) const {
        if (patch < 1 || patch % 2 == 0) throw ConfigError("patch size must be odd and >= 1");
        if (patch > std::min(image.width, image.height))
            throw ConfigError("patch size " + std::to_string(patch) + " exceeds image size " +
                              std::to_string(image.width) + "x" + std::to_string(image.height));
    }
};

// One point per pixel (row-major), feature = patch intensities per channel,
// channels concatenated in order, replicate padding, scaled to [0, 1].
inline DataSet image_patch_features(const Image& image, const ImageSpec& spec = {}) {
    image.validate();
    spec.validate(image);
    const int r = spec.patch / 2;
    const auto n = static_cast<Eigen::Index>(image.width) * image.height;
    const auto d = static_cast<Eigen::Index>(spec.patch) * spec.patch * image.channels;
    DataSet ds;
    ds.points = PointMatrix(n, d);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const Eigen::Index row = static_cast<Eigen::Index>(y) * image.width + x;
            Eigen::Index col = 0;
            for (int c = 0; c < image.channels; ++c)
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sy = std::clamp(y + dy, 0, image.height - 1);
                        const int sx = std::clamp(x + dx, 0, image.width - 1);
                        ds.points(row, col++) = image.at(sx, sy, c) / 255.0;
                    }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// IDX (MNIST) loader

namespace detail {
inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    const auto offset = static_cast<long long>(in.tellg());
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError(path + ": truncated IDX header at offset " + std::to_string(offset));
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}
} // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Pixels scaled to [0, 1]; one row per image.
inline PointMatrix load_idx_images(const std::filesystem::path& path) {
    auto in = detail::open_binary(path);
    const auto name = path.string();
    const auto magic = detail::read_be32(in, name);
    if (magic != kIdxImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), ": bad IDX image magic 0x%08x at offset 0", magic);
        throw DataError(name + buf);
    }
    const auto count = detail::read_be32(in, name);
    const auto rows = detail::read_be32(in, name);
    const auto cols = detail::read_be32(in, name);
    const std::size_t pixels = std::size_t{rows} * cols;
    PointMatrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    std::vector<unsigned char> buffer(pixels);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto offset = static_cast<long long>(in.tellg());
        if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(pixels)))
            throw DataError(name + ": truncated IDX image data at offset " + std::to_string(offset) +
                            " (image " + std::to_string(i) + " of " + std::to_string(count) + ")");
        for (std::size_t p = 0; p < pixels; ++p)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = buffer[p] / 255.0;
    }
    return out;
}

inline Labels load_idx_labels(const std::filesystem::path& path) {
    auto in = detail::open_binary(path);
    const auto name = path.string();
    const auto magic = detail::read_be32(in, name);
    if (magic != kIdxLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), ": bad IDX label magic 0x%08x at offset 0", magic);
        throw DataError(name + buf);
    }
    const auto count = detail::read_be32(in, name);
    std::vector<unsigned char> buffer(count);
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(count)))
        throw DataError(name + ": truncated IDX label data at offset 8");
    return Labels(buffer.begin(), buffer.end());
}

// Concatenates image/label file pairs (e.g. train + test) into one dataset.
inline DataSet load_idx_dataset(const std::vector<std::filesystem::path>& image_files,
                                const std::vector<std::filesystem::path>& label_files) {
    if (image_files.size() != label_files.size() || image_files.empty())
        throw ConfigError("IDX loading needs matching, non-empty image and label file lists");
    std::vector<PointMatrix> blocks;
    Labels labels;
    Eigen::Index rows = 0, cols = -1;
    for (std::size_t f = 0; f < image_files.size(); ++f) {
        auto block = load_idx_images(image_files[f]);
        auto lab = load_idx_labels(label_files[f]);
        if (static_cast<std::size_t>(block.rows()) != lab.size())
            throw DataError("IDX image/label count mismatch for " + image_files[f].string());
        if (cols >= 0 && block.cols() != cols) throw DataError("IDX files disagree on image size");
        cols = block.cols();
        rows += block.rows();
        labels.insert(labels.end(), lab.begin(), lab.end());
        blocks.push_back(std::move(block));
    }
    DataSet ds;
    ds.points.resize(rows, cols);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        ds.points.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    ds.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    ds.labels = std::move(labels);
    return ds;
}

// Per-class proportional subsample (largest remainder), seeded. Row order
// of the original dataset is preserved.
inline DataSet stratified_subsample(const DataSet& ds, std::size_t total, std::uint64_t seed) {
    if (!ds.labels) throw ConfigError("stratified subsample needs labels");
    if (total > ds.size()) throw ConfigError("subsample larger than dataset");
    const auto counts = class_counts(*ds.labels, ds.num_classes);
    const std::size_t K = counts.size();
    std::vector<std::size_t> quota(K);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const double exact = static_cast<double>(counts[k]) * static_cast<double>(total) / static_cast<double>(ds.size());
        quota[k] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[k];
        remainders.emplace_back(exact - std::floor(exact), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++quota[remainders[r % K].second];

    auto rng = make_rng(seed, Stream::Subsample);
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if ((*ds.labels)[i] == static_cast<int>(k)) members.push_back(i);
        for (std::size_t s = 0; s < quota[k]; ++s) {
            std::uniform_int_distribution<std::size_t> pick(s, members.size() - 1);
            std::swap(members[s], members[pick(rng)]);
        }
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[k]));
    }
    std::sort(keep.begin(), keep.end());
    DataSet out;
    out.num_classes = ds.num_classes;
    out.points.resize(static_cast<Eigen::Index>(keep.size()), ds.points.cols());
    out.labels = Labels(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.points.row(static_cast<Eigen::Index>(r)) = ds.points.row(static_cast<Eigen::Index>(keep[r]));
        (*out.labels)[r] = (*ds.labels)[keep[r]];
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV datasets: optional header, numeric cells, optional integer label column.

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ' || cell.back() == '\t')) cell.pop_back();
        const auto first = cell.find_first_not_of(" \t");
        cells.push_back(first == std::string::npos ? std::string{} : cell.substr(first));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}
} // namespace detail

// `label_column` selects the label by header name or zero-based index. When
// unset, a header column named "label" is used if present.
inline DataSet load_csv_dataset(const std::filesystem::path& path,
                                std::optional<std::string> label_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(detail::split_csv_line(line));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) throw DataError(path.string() + ": empty CSV file");

    std::vector<std::string> header;
    bool has_header = false;
    for (const auto& cell : rows.front())
        if (!detail::parse_number(cell)) has_header = true;
    if (has_header) {
        header = rows.front();
        rows.erase(rows.begin());
        line_numbers.erase(line_numbers.begin());
    }
    if (rows.empty()) throw DataError(path.string() + ": CSV has a header but no data rows");
    const std::size_t width = has_header ? header.size() : rows.front().size();

    std::optional<std::size_t> label_idx;
    if (!label_column && has_header) {
        auto it = std::find(header.begin(), header.end(), "label");
        if (it != header.end()) label_idx = static_cast<std::size_t>(it - header.begin());
    } else if (label_column) {
        auto it = std::find(header.begin(), header.end(), *label_column);
        if (it != header.end()) {
            label_idx = static_cast<std::size_t>(it - header.begin());
        } else if (auto v = detail::parse_number(*label_column); v && *v >= 0 && std::floor(*v) == *v) {
            label_idx = static_cast<std::size_t>(*v);
        } else {
            throw ConfigError(path.string() + ": no label column '" + *label_column + "'");
        }
        if (*label_idx >= width) throw ConfigError("label column index out of range");
    }

    const std::size_t d = width - (label_idx ? 1 : 0);
    if (d == 0) throw DataError(path.string() + ": CSV has no feature columns");
    DataSet ds;
    ds.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    Labels labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != width)
            throw DataError(path.string() + ":" + std::to_string(line_numbers[r]) + ": expected " +
                            std::to_string(width) + " cells, found " + std::to_string(cells.size()));
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            auto v = detail::parse_number(cells[c]);
            if (!v)
                throw DataError(path.string() + ":" + std::to_string(line_numbers[r]) +
                                ": non-numeric cell '" + cells[c] + "'");
            if (label_idx && c == *label_idx) {
                if (std::floor(*v) != *v || *v < 0)
                    throw DataError(path.string() + ":" + std::to_string(line_numbers[r]) +
                                    ": label must be a non-negative integer");
                labels.push_back(static_cast<int>(*v));
            } else {
                ds.points(static_cast<Eigen::Index>(r), col++) = *v;
            }
        }
    }
    if (label_idx) {
        ds.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
        ds.labels = std::move(labels);
    }
    return ds;
}

inline void write_csv_dataset(const DataSet& ds, std::ostream& out) {
    for (Eigen::Index j = 0; j < ds.points.cols(); ++j) out << (j ? "," : "") << 'x' << j;
    if (ds.labels) out << ",label";
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < ds.points.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.points.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.points(i, j));
            out << (j ? "," : "") << buf;
        }
        if (ds.labels) out << ',' << (*ds.labels)[static_cast<std::size_t>(i)];
        out << '\n';
    }
}

inline void write_csv_dataset(const DataSet& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_csv_dataset(ds, out);
}

// ---------------------------------------------------------------------------
// Fidelity sampling

struct PerClassCount {
    std::size_t count = 25;
};
struct Fraction {
    double fraction = 0.05;
};

struct FidelitySpec {
    std::variant<PerClassCount, Fraction> mode = PerClassCount{};
    std::uint64_t seed = 0;
};

// Entries are returned sorted by vertex.
inline FidelitySet sample_fidelity(const Labels& labels, int num_classes, const FidelitySpec& spec, double mu) {
    if (!(mu > 0.0)) throw ConfigError("fidelity weight mu must be positive");
    auto rng = make_rng(spec.seed, Stream::Fidelity);
    auto partial_shuffle = [&rng](std::vector<std::size_t>& v, std::size_t take) {
        for (std::size_t s = 0; s < take; ++s) {
            std::uniform_int_distribution<std::size_t> pick(s, v.size() - 1);
            std::swap(v[s], v[pick(rng)]);
        }
        v.resize(take);
    };

    std::vector<std::size_t> chosen;
    if (auto* pc = std::get_if<PerClassCount>(&spec.mode)) {
        if (pc->count < 1) throw ConfigError("per-class fidelity count must be >= 1");
        for (int k = 0; k < num_classes; ++k) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == k) members.push_back(i);
            if (pc->count > members.size())
                throw ConfigError("class " + std::to_string(k) + " has " + std::to_string(members.size()) +
                                  " points, fewer than the requested " + std::to_string(pc->count));
            partial_shuffle(members, pc->count);
            chosen.insert(chosen.end(), members.begin(), members.end());
        }
    } else {
        const double f = std::get<Fraction>(spec.mode).fraction;
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fidelity fraction must be in (0, 1]");
        const auto take = static_cast<std::size_t>(std::floor(f * static_cast<double>(labels.size())));
        if (take == 0) throw ConfigError("fidelity fraction selects no points");
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        partial_shuffle(all, take);
        chosen = std::move(all);
    }
    std::sort(chosen.begin(), chosen.end());
    FidelitySet set;
    for (auto i : chosen) set.entries.push_back({i, labels[i], mu});
    return set;
}

} // namespace mgl
