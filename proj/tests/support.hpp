#pragma once

// Shared helpers and independent oracles for the test suites. Oracles are
// deliberately written as plain flat loops so they share no code with the
// library paths they cross-check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pocl/consensus.hpp"
#include "pocl/fl.hpp"
#include "pocl/nn.hpp"
#include "pocl/rng.hpp"

namespace pocl::test {

inline nn::ModelParams random_model(const nn::ArchSpec& arch, Rng& rng, double scale = 1.0) {
    nn::ModelParams m = nn::init_model(arch, rng.next_u64());
    for (nn::LayerParams& layer : m.layers) {
        for (double& w : layer.weights.data) {
            w = rng.uniform(-scale, scale);
        }
        for (double& b : layer.biases) {
            b = rng.uniform(-scale, scale);
        }
    }
    return m;
}

/// Flat-loop restatement of the per-layer mean absolute difference.
inline double contribution_oracle(const nn::ModelParams& a, const nn::ModelParams& b) {
    double total = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        std::vector<double> flat_a;
        std::vector<double> flat_b;
        for (double v : a.layers[l].weights.data) flat_a.push_back(v);
        for (double v : a.layers[l].biases) flat_a.push_back(v);
        for (double v : b.layers[l].weights.data) flat_b.push_back(v);
        for (double v : b.layers[l].biases) flat_b.push_back(v);
        double s = 0.0;
        for (std::size_t i = 0; i < flat_a.size(); ++i) {
            s += std::fabs(flat_a[i] - flat_b[i]);
        }
        total += s / static_cast<double>(flat_a.size());
    }
    return total / static_cast<double>(a.layers.size());
}

/// Central finite differences of the mean cross-entropy, h = 1e-4.
inline nn::Gradients fd_gradient(const nn::ModelParams& model, const nn::Matrix& batch,
                                 const std::vector<int>& labels, double h = 1e-4) {
    nn::Gradients g;
    g.layers.resize(model.layers.size());
    nn::ModelParams probe = model;
    auto eval = [&] { return nn::loss(nn::forward(probe, batch), labels); };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        g.layers[l].weights = nn::Matrix(model.layers[l].weights.rows, model.layers[l].weights.cols);
        g.layers[l].biases.assign(model.layers[l].biases.size(), 0.0);
        for (std::size_t i = 0; i < model.layers[l].weights.data.size(); ++i) {
            double& w = probe.layers[l].weights.data[i];
            const double saved = w;
            w = saved + h;
            const double up = eval();
            w = saved - h;
            const double down = eval();
            w = saved;
            g.layers[l].weights.data[i] = (up - down) / (2.0 * h);
        }
        for (std::size_t i = 0; i < model.layers[l].biases.size(); ++i) {
            double& b = probe.layers[l].biases[i];
            const double saved = b;
            b = saved + h;
            const double up = eval();
            b = saved - h;
            const double down = eval();
            b = saved;
            g.layers[l].biases[i] = (up - down) / (2.0 * h);
        }
    }
    return g;
}

/// Max coordinatewise error between gradients, relative with a unit floor
/// (so near-zero coordinates are judged absolutely).
inline double max_gradient_error(const nn::Gradients& a, const nn::Gradients& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weights.data.size(); ++i) {
            const double x = a.layers[l].weights.data[i];
            const double y = b.layers[l].weights.data[i];
            worst = std::max(worst, std::fabs(x - y) / std::max({1.0, std::fabs(x), std::fabs(y)}));
        }
        for (std::size_t i = 0; i < a.layers[l].biases.size(); ++i) {
            const double x = a.layers[l].biases[i];
            const double y = b.layers[l].biases[i];
            worst = std::max(worst, std::fabs(x - y) / std::max({1.0, std::fabs(x), std::fabs(y)}));
        }
    }
    return worst;
}

/// Brute-force k-NN: full distance table, explicit stable sort, frequency
/// counts.
inline nn::Matrix knn_oracle(const nn::Dataset& local,
                             const std::vector<std::vector<double>>& queries, int k) {
    nn::Matrix out(queries.size(), local.classes);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t i = 0; i < local.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < local.dim(); ++j) {
                const double diff = local.features.at(i, j) - queries[q][j];
                s += diff * diff;
            }
            d.emplace_back(s, i);
        }
        std::stable_sort(d.begin(), d.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first < y.first;
            return x.second < y.second;
        });
        for (int i = 0; i < k; ++i) {
            out.at(q, static_cast<std::size_t>(local.labels[d[static_cast<std::size_t>(i)].second])) +=
                1.0 / static_cast<double>(k);
        }
    }
    return out;
}

/// Rank-point summation oracle for the Borda tally: per candidate, scan
/// every ballot for its position.
inline std::map<MinerId, int> tally_oracle(const std::vector<consensus::VoteBallot>& ballots,
                                           const std::vector<MinerId>& eligible) {
    std::map<MinerId, int> points;
    for (const MinerId& id : eligible) {
        int total = 0;
        for (const consensus::VoteBallot& b : ballots) {
            for (std::size_t pos = 0; pos < b.ranking.size(); ++pos) {
                if (b.ranking[pos] == id) {
                    total += static_cast<int>(b.ranking.size()) - 1 - static_cast<int>(pos);
                }
            }
        }
        points[id] = total;
    }
    return points;
}

/// Full ordering oracle matching the documented tie-break chain.
inline std::vector<MinerId> ranking_oracle(const std::map<MinerId, int>& points,
                                           const std::map<MinerId, double>& mean_time) {
    std::vector<MinerId> ids;
    for (const auto& [id, p] : points) ids.push_back(id);
    auto time_of = [&](const MinerId& id) {
        const auto it = mean_time.find(id);
        return it == mean_time.end() ? std::numeric_limits<double>::infinity() : it->second;
    };
    std::sort(ids.begin(), ids.end(), [&](const MinerId& a, const MinerId& b) {
        if (points.at(a) != points.at(b)) return points.at(a) > points.at(b);
        if (time_of(a) != time_of(b)) return time_of(a) < time_of(b);
        return a < b;
    });
    return ids;
}

inline nn::Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
    nn::Matrix m(labels.size(), classes);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        m.at(r, static_cast<std::size_t>(labels[r])) = 1.0;
    }
    return m;
}

inline nn::Dataset tiny_blobs(std::size_t n, std::size_t dim, std::size_t classes, double spread,
                              std::uint64_t seed) {
    Rng rng(seed);
    nn::Dataset data;
    data.classes = classes;
    data.features = nn::Matrix(n, dim);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % classes);
        data.labels[i] = label;
        for (std::size_t j = 0; j < dim; ++j) {
            const double center = (label == static_cast<int>(j % classes)) ? 1.0 : -1.0;
            data.features.at(i, j) = center + spread * rng.normal();
        }
    }
    return data;
}

} // namespace pocl::test
