#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradid/point_cloud.hpp"
#include "gradid/tensor.hpp"

namespace gradid {

// Binary tensor archive ("IDSA"), shared by adversarial sets, gradient
// clouds and manifold fixtures:
//   bytes 0..3  magic "IDSA"
//   byte  4     version (1)
//   u32le       sample count
//   u32le       ndim, then ndim u32le per-sample shape entries
//   f64le       count * prod(shape) values, row-major per sample
//   u8          has_labels; if 1: count u32le labels
//   u8          has_flags;  if 1: count u8 per-sample fooled flags
struct TensorArchive {
    std::vector<std::size_t> shape;  // per-sample shape
    std::vector<double> data;        // count * prod(shape)
    std::optional<std::vector<std::uint32_t>> labels;
    std::optional<std::vector<std::uint8_t>> flags;

    std::size_t sample_size() const;
    std::size_t count() const;

    Tensor tensor_at(std::size_t i) const;

    static TensorArchive from_cloud(const PointCloud& cloud);
    static TensorArchive from_samples(const std::vector<LabeledSample>& samples);
    PointCloud to_cloud() const;
};

void save_archive(const std::string& path, const TensorArchive& archive);
TensorArchive load_archive(const std::string& path);

}  // namespace gradid
