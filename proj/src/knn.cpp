#include "gradid/knn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradid/errors.hpp"

namespace gradid {

NeighborTable knn(const PointCloud& cloud, std::size_t m) {
    const std::size_t n = cloud.size();
    if (m == 0) throw ParameterError("neighbor count must be positive");
    if (m >= n) {
        throw ParameterError("neighbor count " + std::to_string(m) + " requires more than " +
                             std::to_string(m) + " points, found " + std::to_string(n));
    }

    NeighborTable table;
    table.m = m;
    table.dist.resize(n * m);
    table.index.resize(n * m);

    std::vector<std::pair<double, std::size_t>> row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = cloud.point(i);
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            row[w++] = {point_distance_squared(p, cloud.point(j)), j};
        }
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(m), row.end());
        for (std::size_t k = 0; k < m; ++k) {
            const double d = std::sqrt(row[k].first);
            if (d <= 0.0) {
                throw ParameterError("duplicate points in neighbor search; dedupe the cloud first");
            }
            table.dist[i * m + k] = d;
            table.index[i * m + k] = row[k].second;
        }
    }
    return table;
}

}  // namespace gradid
