#pragma once

#include <cstdint>

#include "gradid/dataset.hpp"

namespace gradid {

// Deterministic stroke-rendered digit images: ten glyph classes drawn as
// polylines, each sample under a seeded random affine transform (rotation,
// anisotropic scale, shear, translation), randomized stroke width and
// additive pixel noise. Serves as the self-contained stand-in for a
// handwritten-digit corpus; labels cycle 0..9 in generation order.
struct DigitsSpec {
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    double pixel_noise = 0.04;
    std::size_t side = 28;
};

Dataset gen_digits(const DigitsSpec& spec);

}  // namespace gradid
