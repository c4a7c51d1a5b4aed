#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgl/error.hpp"

namespace mgl {

// n x d feature matrix, one point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Labels = std::vector<int>;

struct DataSet {
    PointMatrix points;
    std::optional<Labels> labels;
    int num_classes = 0;

    std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }

    // Throws DataError when the dataset invariants do not hold.
    void validate() const {
        if (points.rows() < 2) throw DataError("dataset needs at least 2 points");
        if (points.cols() < 1) throw DataError("dataset needs at least 1 feature");
        for (Eigen::Index i = 0; i < points.rows(); ++i)
            for (Eigen::Index j = 0; j < points.cols(); ++j)
                if (!std::isfinite(points(i, j)))
                    throw DataError("non-finite feature at row " + std::to_string(i) +
                                    ", column " + std::to_string(j));
        if (!labels) return;
        if (num_classes < 2) throw DataError("labelled dataset needs K >= 2");
        if (labels->size() != size())
            throw DataError("label count does not match point count");
        std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
        for (std::size_t i = 0; i < labels->size(); ++i) {
            int c = (*labels)[i];
            if (c < 0 || c >= num_classes)
                throw DataError("label " + std::to_string(c) + " at row " + std::to_string(i) +
                                " outside [0, " + std::to_string(num_classes) + ")");
            ++counts[static_cast<std::size_t>(c)];
        }
        for (std::size_t k = 0; k < counts.size(); ++k)
            if (counts[k] == 0) throw DataError("class " + std::to_string(k) + " has no points");
    }
};

// Per-class point counts for labels in [0, K).
inline std::vector<std::size_t> class_counts(const Labels& labels, int num_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int c : labels)
        if (c >= 0 && c < num_classes) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

} // namespace mgl
