#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gradid/tensor.hpp"

namespace gradid {

// Labeled inputs with provenance. Pixel inputs are [0, 1]-normalized.
struct Dataset {
    enum class Source { idx_file, synthetic };

    std::vector<Tensor> inputs;
    std::vector<int> labels;
    Source source = Source::synthetic;
    std::uint64_t seed = 0;
    std::size_t num_classes = 10;

    std::size_t size() const { return inputs.size(); }

    LabeledSample sample(std::size_t i) const { return LabeledSample(inputs[i], labels[i]); }

    std::vector<LabeledSample> samples() const;
    std::vector<LabeledSample> samples(std::span<const std::size_t> indices) const;

    void validate() const;
};

// Seeded shuffle followed by a contiguous partition; fractions must sum to
// 1 within 1e-9.
std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed);

}  // namespace gradid
