#include "gradid/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gradid/errors.hpp"

namespace gradid {

namespace {
constexpr std::size_t kCompensatedDimThreshold = 10000;
}

PointCloud::PointCloud(std::size_t dim, std::vector<double> flat) : dim_(dim), flat_(std::move(flat)) {
    if (dim_ == 0) throw DimensionError("point cloud dimension must be positive");
    if (flat_.size() % dim_ != 0) {
        throw DimensionError("flat payload length is not a multiple of the dimension");
    }
    for (double v : flat_) {
        if (!std::isfinite(v)) throw ValueError("point cloud entries must be finite");
    }
}

void PointCloud::add(std::span<const double> p) {
    if (dim_ == 0) dim_ = p.size();
    if (p.size() != dim_) throw DimensionError("point dimension mismatch");
    for (double v : p) {
        if (!std::isfinite(v)) throw ValueError("point cloud entries must be finite");
    }
    flat_.insert(flat_.end(), p.begin(), p.end());
}

PointCloud PointCloud::scaled(double factor) const {
    std::vector<double> out(flat_.size());
    for (std::size_t i = 0; i < flat_.size(); ++i) out[i] = flat_[i] * factor;
    return PointCloud(dim_, std::move(out));
}

double point_distance_squared(std::span<const double> a, std::span<const double> b) {
    if (a.size() >= kCompensatedDimThreshold) {
        // Kahan-compensated accumulation; gradient embeddings can reach
        // 10^4+ dimensions and the estimators divide by log-distance ratios.
        double sum = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            const double term = d * d - comp;
            const double next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        return sum;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

double point_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(point_distance_squared(a, b));
}

DedupeResult dedupe(const PointCloud& cloud, double tol) {
    if (tol < 0.0) throw ParameterError("dedupe tolerance must be non-negative");
    DedupeResult result;
    result.cloud = PointCloud(cloud.dim() == 0 ? 1 : cloud.dim());
    const double tol2 = tol * tol;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto p = cloud.point(i);
        bool duplicate = false;
        for (std::size_t j = 0; j < result.cloud.size(); ++j) {
            if (point_distance_squared(p, result.cloud.point(j)) <= tol2) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            ++result.removed;
        } else {
            result.cloud.add(p);
        }
    }
    return result;
}

PointCloud canonical_order(const PointCloud& cloud) {
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = cloud.point(a);
        const auto pb = cloud.point(b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
    });
    PointCloud out(cloud.dim() == 0 ? 1 : cloud.dim());
    for (std::size_t i : order) out.add(cloud.point(i));
    return out;
}

}  // namespace gradid
