#include "gradid/dataset.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

std::vector<LabeledSample> Dataset::samples() const {
    std::vector<LabeledSample> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(sample(i));
    return out;
}

std::vector<LabeledSample> Dataset::samples(std::span<const std::size_t> indices) const {
    std::vector<LabeledSample> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(sample(i));
    return out;
}

void Dataset::validate() const {
    if (inputs.size() != labels.size()) {
        throw DimensionError("dataset inputs and labels differ in length");
    }
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
            throw LabelError("dataset label " + std::to_string(label) + " outside [0, " +
                             std::to_string(num_classes) + ")");
        }
    }
}

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed) {
    if (fractions.empty()) throw ParameterError("split needs at least one fraction");
    double total = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ParameterError("split fractions must be non-negative");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw ParameterError("split fractions must sum to 1, got " + std::to_string(total));
    }

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    const double n = static_cast<double>(ds.size());
    std::vector<Dataset> parts;
    parts.reserve(fractions.size());
    double cumulative = 0.0;
    std::size_t start = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
        cumulative += fractions[p];
        const std::size_t end = (p + 1 == fractions.size())
                                    ? ds.size()
                                    : static_cast<std::size_t>(std::llround(cumulative * n));
        Dataset part;
        part.source = ds.source;
        part.seed = seed;
        part.num_classes = ds.num_classes;
        for (std::size_t i = start; i < end; ++i) {
            part.inputs.push_back(ds.inputs[order[i]]);
            part.labels.push_back(ds.labels[order[i]]);
        }
        parts.push_back(std::move(part));
        start = end;
    }
    return parts;
}

}  // namespace gradid
