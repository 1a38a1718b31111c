#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gradid/point_cloud.hpp"

namespace gradid {

// Per-point ascending neighbor distances and indices; row i excludes point i
// itself. Ties in distance break toward the lower index.
struct NeighborTable {
    std::size_t m = 0;
    std::vector<double> dist;         // rows() * m
    std::vector<std::size_t> index;   // rows() * m

    std::size_t rows() const { return m == 0 ? 0 : dist.size() / m; }
    std::span<const double> row_dist(std::size_t i) const { return {dist.data() + i * m, m}; }
    std::span<const std::size_t> row_index(std::size_t i) const { return {index.data() + i * m, m}; }
};

// Exact brute-force Euclidean m-nearest-neighbor search, O(N^2) distances.
// Requires m >= 1 and m < cloud.size(); duplicate points (zero distances)
// must have been removed upstream.
NeighborTable knn(const PointCloud& cloud, std::size_t m);

}  // namespace gradid
