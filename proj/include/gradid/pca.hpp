#pragma once

#include <cstddef>
#include <vector>

#include "gradid/point_cloud.hpp"

namespace gradid {

struct PcaProjection {
    std::size_t dim = 0;          // ambient dimension
    std::size_t target_dims = 0;
    std::vector<double> mean;     // dim
    std::vector<double> components;  // target_dims x dim, row-major, orthonormal
    std::vector<double> explained_variance;  // descending
    std::size_t padded = 0;       // components appended past the covariance rank
};

// Centered principal components by deflated power iteration (tolerance
// 1e-10). Component signs are fixed so the largest-magnitude entry of each
// component is positive. When the covariance rank falls short of
// target_dims, the basis is padded with zero-variance orthonormal directions
// and `padded` records how many.
PcaProjection pca_fit(const PointCloud& cloud, std::size_t target_dims);

PointCloud pca_apply(const PcaProjection& proj, const PointCloud& cloud);

}  // namespace gradid
