#include "gradid/manifold.hpp"

#include <cmath>
#include <vector>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Random n x e matrix with orthonormal columns (modified Gram-Schmidt over
// seeded Gaussian draws), stored column-major as e rows of length n.
std::vector<std::vector<double>> orthonormal_columns(std::size_t n, std::size_t e, Rng& rng) {
    std::vector<std::vector<double>> cols;
    cols.reserve(e);
    while (cols.size() < e) {
        std::vector<double> v(n);
        for (double& x : v) x = rng.normal();
        for (const auto& c : cols) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += v[i] * c[i];
            for (std::size_t i = 0; i < n; ++i) v[i] -= d * c[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;  // essentially never; redraw
        for (double& x : v) x /= norm;
        cols.push_back(std::move(v));
    }
    return cols;
}

}  // namespace

std::string manifold_kind_name(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::hypercube: return "hypercube";
        case ManifoldKind::sphere: return "sphere";
        case ManifoldKind::swiss_roll: return "swiss_roll";
    }
    return "hypercube";
}

ManifoldKind manifold_kind_from(const std::string& name) {
    if (name == "hypercube") return ManifoldKind::hypercube;
    if (name == "sphere") return ManifoldKind::sphere;
    if (name == "swiss_roll") return ManifoldKind::swiss_roll;
    throw ConfigError("unknown manifold kind \"" + name + "\"");
}

ManifoldSample gen_manifold_detailed(const ManifoldSpec& spec) {
    if (spec.intrinsic_d == 0) throw ParameterError("intrinsic dimension must be positive");
    if (spec.n_points == 0) throw ParameterError("n_points must be positive");
    if (spec.noise_sigma < 0.0) throw ParameterError("noise sigma must be non-negative");
    if (spec.intrinsic_d >= spec.ambient_n) {
        throw ParameterError("intrinsic dimension must be smaller than the ambient dimension");
    }

    // Coordinates before embedding; the sphere needs d + 1 of them, the roll 3.
    std::size_t embed_dim = spec.intrinsic_d;
    switch (spec.kind) {
        case ManifoldKind::hypercube:
            break;
        case ManifoldKind::sphere:
            embed_dim = spec.intrinsic_d + 1;
            break;
        case ManifoldKind::swiss_roll:
            if (spec.intrinsic_d != 2) throw ParameterError("swiss_roll is a 2-manifold");
            embed_dim = 3;
            break;
    }
    if (embed_dim > spec.ambient_n) {
        throw ParameterError("ambient dimension too small for the requested manifold");
    }

    Rng rng(spec.seed);
    const auto basis = orthonormal_columns(spec.ambient_n, embed_dim, rng);

    ManifoldSample out;
    out.intrinsic = PointCloud(embed_dim);
    out.ambient = PointCloud(spec.ambient_n);

    std::vector<double> u(embed_dim);
    std::vector<double> x(spec.ambient_n);
    for (std::size_t p = 0; p < spec.n_points; ++p) {
        switch (spec.kind) {
            case ManifoldKind::hypercube:
                for (double& v : u) v = rng.uniform();
                break;
            case ManifoldKind::sphere: {
                double norm = 0.0;
                do {
                    norm = 0.0;
                    for (double& v : u) {
                        v = rng.normal();
                        norm += v * v;
                    }
                } while (norm <= 0.0);
                norm = std::sqrt(norm);
                for (double& v : u) v /= norm;
                break;
            }
            case ManifoldKind::swiss_roll: {
                const double t = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
                const double h = 21.0 * rng.uniform();
                u[0] = t * std::cos(t);
                u[1] = h;
                u[2] = t * std::sin(t);
                break;
            }
        }
        for (std::size_t i = 0; i < spec.ambient_n; ++i) {
            double acc = 0.0;
            for (std::size_t e = 0; e < embed_dim; ++e) acc += basis[e][i] * u[e];
            x[i] = acc;
        }
        if (spec.noise_sigma > 0.0) {
            for (double& v : x) v += spec.noise_sigma * rng.normal();
        }
        out.intrinsic.add(u);
        out.ambient.add(x);
    }
    return out;
}

PointCloud gen_manifold(const ManifoldSpec& spec) { return gen_manifold_detailed(spec).ambient; }

}  // namespace gradid
