#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gradid/errors.hpp"

namespace gradid {

// Dense row-major tensor of 64-bit reals. Construction validates that the
// shape matches the payload and that every entry is finite.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// One (input, class index) pair. Inputs are pixel-scaled: entries in [0, 1].
struct LabeledSample {
    LabeledSample(Tensor in, int lab);

    Tensor input;
    int label = 0;
};

// Max-abs and Euclidean distance between two equally sized spans.
double linf_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(std::span<const double> a, std::span<const double> b);

}  // namespace gradid
