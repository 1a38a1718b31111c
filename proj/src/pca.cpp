#include "gradid/pca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

constexpr double kTolerance = 1e-10;
constexpr std::size_t kMaxIterations = 20000;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void normalize(std::vector<double>& v) {
    const double n = norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

// v <- v - sum_j (v . basis_j) basis_j over row-major basis rows.
void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    for (const auto& b : basis) {
        const double c = dot(v, b);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * b[i];
    }
}

// Dominant eigenpair of the symmetric operator `apply`, deflated against the
// rows already found. Returns the Rayleigh-quotient eigenvalue.
double dominant_eigenvector(std::size_t n, const std::vector<std::vector<double>>& found,
                            const auto& apply, std::uint64_t seed, std::vector<double>& out) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    orthogonalize(v, found);
    normalize(v);

    std::vector<double> next(n);
    double eigenvalue = 0.0;
    for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
        apply(v, next);
        orthogonalize(next, found);
        eigenvalue = dot(next, v);
        const double len = norm(next);
        if (len <= 0.0) {
            // v lies in the kernel of the deflated operator; rank exhausted.
            out = v;
            return 0.0;
        }
        for (double& x : next) x /= len;
        double delta = 0.0;
        // Eigenvectors are sign-ambiguous; compare against the closer sign.
        double delta_flip = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            delta = std::max(delta, std::fabs(next[i] - v[i]));
            delta_flip = std::max(delta_flip, std::fabs(next[i] + v[i]));
        }
        v = next;
        if (std::min(delta, delta_flip) < kTolerance) break;
    }
    out = v;
    return eigenvalue;
}

void fix_sign(std::vector<double>& component) {
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < component.size(); ++i) {
        if (std::fabs(component[i]) > best) {
            best = std::fabs(component[i]);
            arg = i;
        }
    }
    if (component[arg] < 0.0) {
        for (double& x : component) x = -x;
    }
}

}  // namespace

PcaProjection pca_fit(const PointCloud& cloud, std::size_t target_dims) {
    const std::size_t n = cloud.size();
    const std::size_t dim = cloud.dim();
    if (n < 2) throw InsufficientPointsError("PCA needs at least two points");
    if (target_dims == 0) throw ParameterError("target_dims must be positive");
    if (target_dims > std::min(n - 1, dim)) {
        throw ParameterError("target_dims must not exceed min(n_points - 1, dim)");
    }

    PcaProjection proj;
    proj.dim = dim;
    proj.target_dims = target_dims;
    proj.mean.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = cloud.point(i);
        for (std::size_t d = 0; d < dim; ++d) proj.mean[d] += p[d];
    }
    for (double& m : proj.mean) m /= static_cast<double>(n);

    std::vector<double> centered(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = cloud.point(i);
        for (std::size_t d = 0; d < dim; ++d) centered[i * dim + d] = p[d] - proj.mean[d];
    }
    const double scale = 1.0 / static_cast<double>(n - 1);

    std::vector<std::vector<double>> components;
    std::vector<double> eigenvalues;

    if (dim <= n) {
        // Primal: explicit dim x dim covariance.
        std::vector<double> cov(dim * dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = centered.data() + i * dim;
            for (std::size_t a = 0; a < dim; ++a) {
                const double ra = row[a];
                if (ra == 0.0) continue;
                for (std::size_t b = 0; b < dim; ++b) cov[a * dim + b] += ra * row[b];
            }
        }
        for (double& c : cov) c *= scale;
        const auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
            out.assign(dim, 0.0);
            for (std::size_t a = 0; a < dim; ++a) {
                out[a] = dot({cov.data() + a * dim, dim}, v);
            }
        };
        for (std::size_t c = 0; c < target_dims; ++c) {
            std::vector<double> v;
            const double ev = dominant_eigenvector(dim, components, apply, 0xC0FFEEULL + c, v);
            components.push_back(std::move(v));
            eigenvalues.push_back(std::max(ev, 0.0));
        }
    } else {
        // Dual (snapshot) form: eigenvectors of the n x n Gram matrix map back
        // through X^T; much cheaper when points are few and wide.
        std::vector<double> gram(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double g =
                    dot({centered.data() + i * dim, dim}, {centered.data() + j * dim, dim}) * scale;
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        const auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
            out.assign(n, 0.0);
            for (std::size_t a = 0; a < n; ++a) {
                out[a] = dot({gram.data() + a * n, n}, v);
            }
        };
        std::vector<std::vector<double>> dual_vectors;
        for (std::size_t c = 0; c < target_dims; ++c) {
            std::vector<double> v;
            const double ev = dominant_eigenvector(n, dual_vectors, apply, 0xC0FFEEULL + c, v);
            dual_vectors.push_back(v);
            eigenvalues.push_back(std::max(ev, 0.0));
            // Ambient component u = X^T v, normalized.
            std::vector<double> u(dim, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double vi = v[i];
                if (vi == 0.0) continue;
                const double* row = centered.data() + i * dim;
                for (std::size_t d = 0; d < dim; ++d) u[d] += vi * row[d];
            }
            orthogonalize(u, components);
            normalize(u);
            components.push_back(std::move(u));
        }
    }

    // Pad rank-deficient results with deterministic orthonormal directions.
    const double ev_floor = eigenvalues.empty() ? 0.0 : eigenvalues.front() * 1e-12;
    Rng pad_rng(0xDEADBEEFULL);
    for (std::size_t c = 0; c < target_dims; ++c) {
        const bool degenerate = eigenvalues[c] <= ev_floor || norm(components[c]) < 0.5;
        if (!degenerate) continue;
        ++proj.padded;
        eigenvalues[c] = 0.0;
        std::vector<double> v(dim);
        do {
            for (double& x : v) x = pad_rng.normal();
            for (std::size_t other = 0; other < target_dims; ++other) {
                if (other == c) continue;
                const double d = dot(v, components[other]);
                for (std::size_t i = 0; i < dim; ++i) v[i] -= d * components[other][i];
            }
        } while (norm(v) < 1e-8);
        normalize(v);
        components[c] = std::move(v);
    }

    proj.components.reserve(target_dims * dim);
    for (auto& c : components) {
        fix_sign(c);
        proj.components.insert(proj.components.end(), c.begin(), c.end());
    }
    proj.explained_variance = std::move(eigenvalues);
    return proj;
}

PointCloud pca_apply(const PcaProjection& proj, const PointCloud& cloud) {
    if (cloud.dim() != proj.dim) {
        throw DimensionError("cloud dimension " + std::to_string(cloud.dim()) +
                             " does not match the fitted projection dimension " + std::to_string(proj.dim));
    }
    PointCloud out(proj.target_dims);
    std::vector<double> centered(proj.dim);
    std::vector<double> y(proj.target_dims);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto p = cloud.point(i);
        for (std::size_t d = 0; d < proj.dim; ++d) centered[d] = p[d] - proj.mean[d];
        for (std::size_t c = 0; c < proj.target_dims; ++c) {
            y[c] = dot({proj.components.data() + c * proj.dim, proj.dim}, centered);
        }
        out.add(y);
    }
    return out;
}

}  // namespace gradid
