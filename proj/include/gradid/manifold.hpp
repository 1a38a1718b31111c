#pragma once

#include <cstdint>
#include <string>

#include "gradid/point_cloud.hpp"

namespace gradid {

enum class ManifoldKind { hypercube, sphere, swiss_roll };

std::string manifold_kind_name(ManifoldKind kind);
ManifoldKind manifold_kind_from(const std::string& name);

// Ground-truth fixture description: points of known intrinsic dimension d
// embedded into an ambient space by a seeded random orthonormal map, plus
// optional isotropic Gaussian noise.
struct ManifoldSpec {
    std::size_t intrinsic_d = 2;
    std::size_t ambient_n = 50;
    ManifoldKind kind = ManifoldKind::hypercube;
    std::size_t n_points = 2000;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct ManifoldSample {
    PointCloud intrinsic;  // pre-embedding coordinates
    PointCloud ambient;    // embedded (and possibly noised) points
};

// hypercube: uniform in [0,1]^d. sphere: uniform on S^d in R^(d+1).
// swiss_roll: the standard 2-d roll in R^3. The embedding is linear and
// orthonormal, so with sigma = 0 intrinsic pairwise distances are preserved.
ManifoldSample gen_manifold_detailed(const ManifoldSpec& spec);
PointCloud gen_manifold(const ManifoldSpec& spec);

}  // namespace gradid
