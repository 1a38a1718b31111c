#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gradid {

// Ordered collection of same-dimension real vectors, stored flat row-major.
// The substrate for all intrinsic-dimension estimation.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::size_t dim) : dim_(dim) {}
    PointCloud(std::size_t dim, std::vector<double> flat);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : flat_.size() / dim_; }

    std::span<const double> point(std::size_t i) const { return {flat_.data() + i * dim_, dim_}; }

    void add(std::span<const double> p);

    const std::vector<double>& flat() const { return flat_; }

    PointCloud scaled(double factor) const;

private:
    std::size_t dim_ = 0;
    std::vector<double> flat_;
};

struct DedupeResult {
    PointCloud cloud;
    std::size_t removed = 0;
};

// Drops every point lying within Euclidean distance tol of an earlier point.
DedupeResult dedupe(const PointCloud& cloud, double tol = 1e-12);

// Lexicographic row sort; gives estimators a point order that depends only on
// the multiset of points, so shuffled clouds produce bit-identical estimates.
PointCloud canonical_order(const PointCloud& cloud);

// Euclidean distance; switches to compensated accumulation above 10^4 dims.
double point_distance(std::span<const double> a, std::span<const double> b);
double point_distance_squared(std::span<const double> a, std::span<const double> b);

}  // namespace gradid
