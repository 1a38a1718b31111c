#include "gradid/tensor.hpp"

#include <cmath>
#include <string>

namespace gradid {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw DimensionError("tensor shape must be non-empty");
    for (std::size_t d : shape_) {
        if (d == 0) throw DimensionError("tensor shape entries must be positive");
    }
    if (shape_product(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + std::to_string(shape_product(shape_)) +
                             " does not match payload size " + std::to_string(data_.size()));
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw ValueError("tensor entries must be finite");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    const std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

LabeledSample::LabeledSample(Tensor in, int lab) : input(std::move(in)), label(lab) {
    if (label < 0) throw LabelError("class index must be non-negative");
    for (double v : input.data()) {
        if (v < 0.0 || v > 1.0) throw ValueError("sample inputs must lie in [0, 1]");
    }
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a[i] - b[i]));
    }
    return m;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace gradid
