#pragma once

// Independent oracles for the test suites. Everything here recomputes results
// through code paths separate from the library implementation: finite
// differences for gradients, a quadratic full-sort scan for neighbors, and a
// column-order long-double forward pass.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "gradid/network.hpp"
#include "gradid/point_cloud.hpp"
#include "gradid/rng.hpp"
#include "gradid/tensor.hpp"

namespace oracle {

inline double loss_at(const gradid::Network& net, const gradid::Tensor& x, int label) {
    return gradid::cross_entropy(gradid::forward(net, x), label);
}

// Central finite differences over every parameter of the full network, in
// the library's documented flattening order (layer-major, weights row-major,
// then biases).
inline std::vector<double> fd_param_gradient(gradid::Network net, const gradid::LabeledSample& s,
                                             double h = 1e-5) {
    std::vector<double> grad;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto probe = [&](std::vector<double>& slot, std::size_t j) {
            const double saved = slot[j];
            slot[j] = saved + h;
            const double up = loss_at(net, s.input, s.label);
            slot[j] = saved - h;
            const double down = loss_at(net, s.input, s.label);
            slot[j] = saved;
            grad.push_back((up - down) / (2.0 * h));
        };
        for (std::size_t j = 0; j < net.layers()[l].weights.size(); ++j) {
            probe(net.layers()[l].weights, j);
        }
        for (std::size_t j = 0; j < net.layers()[l].biases.size(); ++j) {
            probe(net.layers()[l].biases, j);
        }
    }
    return grad;
}

inline std::vector<double> fd_input_gradient(const gradid::Network& net, const gradid::LabeledSample& s,
                                             double h = 1e-5) {
    std::vector<double> grad(s.input.size());
    std::vector<double> data(s.input.data().begin(), s.input.data().end());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up =
            gradid::cross_entropy(gradid::forward(net, std::span<const double>(data)), s.label);
        data[i] = saved - h;
        const double down =
            gradid::cross_entropy(gradid::forward(net, std::span<const double>(data)), s.label);
        data[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline std::vector<double> fd_logit_row(const gradid::Network& net, const gradid::Tensor& x,
                                        std::size_t logit, double h = 1e-5) {
    std::vector<double> row(x.size());
    std::vector<double> data(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = gradid::forward(net, std::span<const double>(data))[logit];
        data[i] = saved - h;
        const double down = gradid::forward(net, std::span<const double>(data))[logit];
        data[i] = saved;
        row[i] = (up - down) / (2.0 * h);
    }
    return row;
}

// Worst relative error between analytic and finite-difference gradients over
// components with |fd| above the floor.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> fd,
                                 double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        if (std::fabs(fd[i]) <= floor) continue;
        worst = std::max(worst, std::fabs(analytic[i] - fd[i]) / std::fabs(fd[i]));
    }
    return worst;
}

// Independent forward pass: long-double accumulators, column-major loop
// order, explicit ReLU.
inline std::vector<double> reference_forward(const gradid::Network& net, const gradid::Tensor& x) {
    std::vector<long double> cur(x.data().begin(), x.data().end());
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        std::vector<long double> next(layer.out_dim);
        for (std::size_t r = 0; r < layer.out_dim; ++r) next[r] = layer.biases[r];
        for (std::size_t c = 0; c < layer.in_dim; ++c) {
            const long double xc = cur[c];
            for (std::size_t r = 0; r < layer.out_dim; ++r) {
                next[r] += static_cast<long double>(layer.weights[r * layer.in_dim + c]) * xc;
            }
        }
        if (layer.activation == gradid::Activation::relu) {
            for (auto& v : next) {
                if (v < 0.0L) v = 0.0L;
            }
        }
        cur = std::move(next);
    }
    return std::vector<double>(cur.begin(), cur.end());
}

// Full quadratic scan: every pairwise distance, full sort, first m rows.
struct OracleNeighbors {
    std::vector<std::vector<double>> dist;
    std::vector<std::vector<std::size_t>> index;
};

inline OracleNeighbors oracle_knn(const gradid::PointCloud& cloud, std::size_t m) {
    OracleNeighbors out;
    const std::size_t n = cloud.size();
    out.dist.resize(n);
    out.index.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<long double, std::size_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            long double acc = 0.0L;
            const auto a = cloud.point(i);
            const auto b = cloud.point(j);
            for (std::size_t dd = 0; dd < a.size(); ++dd) {
                const long double diff = static_cast<long double>(a[dd]) - b[dd];
                acc += diff * diff;
            }
            all.emplace_back(sqrtl(acc), j);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t k = 0; k < m; ++k) {
            out.dist[i].push_back(static_cast<double>(all[k].first));
            out.index[i].push_back(all[k].second);
        }
    }
    return out;
}

// Random network and in-range labeled sample for property loops.
inline gradid::Network random_net(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    return gradid::Network(dims, seed);
}

inline gradid::LabeledSample random_sample(std::size_t dim, std::size_t classes, gradid::Rng& rng) {
    std::vector<double> data(dim);
    for (double& v : data) v = rng.uniform();
    const int label = static_cast<int>(rng.index(classes));
    return gradid::LabeledSample(gradid::Tensor({dim}, std::move(data)), label);
}

}  // namespace oracle
