#include "pocl/fl.hpp"

#include <cmath>

#include "bytes.hpp"
#include "pocl/errors.hpp"

namespace pocl::fl {

namespace {

void require_same_arch(const nn::ModelParams& a, const nn::ModelParams& b, const char* what) {
    if (!(a.arch == b.arch)) {
        throw AggregationError(std::string(what) + ": architecture mismatch");
    }
}

} // namespace

Currency RewardReport::total_rewards() const {
    Currency total = 0.0;
    for (const auto& [id, share] : per_winner) {
        total += share.reward;
    }
    return total;
}

nn::ModelParams fed_avg(std::span<const nn::ModelParams> models) {
    if (models.empty()) {
        throw AggregationError("fed_avg: empty model list");
    }
    for (const nn::ModelParams& m : models) {
        require_same_arch(m, models.front(), "fed_avg");
    }
    nn::ModelParams out = models.front();
    const double k = static_cast<double>(models.size());
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        nn::LayerParams& layer = out.layers[l];
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
            double sum = 0.0;
            for (const nn::ModelParams& m : models) {
                sum += m.layers[l].weights.data[i];
            }
            layer.weights.data[i] = sum / k;
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            double sum = 0.0;
            for (const nn::ModelParams& m : models) {
                sum += m.layers[l].biases[i];
            }
            layer.biases[i] = sum / k;
        }
    }
    if (!out.all_finite()) {
        throw AggregationError("fed_avg: non-finite result");
    }
    return out;
}

double compute_contribution(const nn::ModelParams& local, const nn::ModelParams& reference) {
    require_same_arch(local, reference, "compute_contribution");
    const std::size_t L = local.layers.size();
    double acc = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const nn::LayerParams& a = local.layers[l];
        const nn::LayerParams& b = reference.layers[l];
        double layer_sum = 0.0;
        for (std::size_t i = 0; i < a.weights.data.size(); ++i) {
            layer_sum += std::abs(a.weights.data[i] - b.weights.data[i]);
        }
        for (std::size_t i = 0; i < a.biases.size(); ++i) {
            layer_sum += std::abs(a.biases[i] - b.biases[i]);
        }
        const double n_l = static_cast<double>(a.weights.data.size() + a.biases.size());
        acc += layer_sum / n_l;
    }
    return acc / static_cast<double>(L);
}

RewardReport distribute_rewards(const std::map<MinerId, double>& contributions,
                                Currency block_reward) {
    if (contributions.empty()) {
        throw DomainError("distribute_rewards: no contributions");
    }
    if (block_reward < 0.0) {
        throw DomainError("distribute_rewards: negative block reward");
    }
    double total = 0.0;
    for (const auto& [id, c] : contributions) {
        if (c < 0.0 || !std::isfinite(c)) {
            throw DomainError("distribute_rewards: invalid contribution for " + id);
        }
        total += c;
    }
    RewardReport report;
    report.block_reward = block_reward;
    for (const auto& [id, c] : contributions) {
        RewardShare share;
        share.contribution = c;
        share.reward = total > 0.0 ? block_reward * (c / total)
                                   : block_reward / static_cast<double>(contributions.size());
        report.per_winner.emplace(id, share);
    }
    return report;
}

std::vector<std::uint8_t> serialize_model(const nn::ModelParams& model) {
    detail::ByteWriter w;
    w.u64(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        w.u64(model.arch.layer_sizes[l]);
        w.u64(model.arch.layer_sizes[l + 1]);
        w.u8(static_cast<std::uint8_t>(model.arch.activations[l]));
    }
    for (const nn::LayerParams& layer : model.layers) {
        for (double v : layer.weights.data) {
            w.f64(v);
        }
        for (double v : layer.biases) {
            w.f64(v);
        }
    }
    return w.take();
}

nn::ModelParams deserialize_model(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    const std::uint64_t L = r.u64();
    if (L == 0 || L > 1024) {
        throw ParseError("model serialization: implausible layer count");
    }
    nn::ModelParams model;
    model.arch.layer_sizes.reserve(L + 1);
    model.arch.activations.reserve(L);
    std::uint64_t prev_out = 0;
    for (std::uint64_t l = 0; l < L; ++l) {
        const std::uint64_t in_dim = r.u64();
        const std::uint64_t out_dim = r.u64();
        const std::uint8_t act = r.u8();
        if (in_dim == 0 || out_dim == 0 || act > 1) {
            throw ParseError("model serialization: bad layer descriptor");
        }
        if (l == 0) {
            model.arch.layer_sizes.push_back(in_dim);
        } else if (in_dim != prev_out) {
            throw ParseError("model serialization: layer dims disagree");
        }
        model.arch.layer_sizes.push_back(out_dim);
        model.arch.activations.push_back(static_cast<nn::Activation>(act));
        prev_out = out_dim;
    }
    for (std::uint64_t l = 0; l < L; ++l) {
        const std::size_t in_dim = model.arch.layer_sizes[l];
        const std::size_t out_dim = model.arch.layer_sizes[l + 1];
        nn::LayerParams layer;
        layer.weights = nn::Matrix(out_dim, in_dim);
        for (double& v : layer.weights.data) {
            v = r.f64();
        }
        layer.biases.resize(out_dim);
        for (double& v : layer.biases) {
            v = r.f64();
        }
        model.layers.push_back(std::move(layer));
    }
    if (!r.done()) {
        throw ParseError("model serialization: trailing bytes");
    }
    return model;
}

ModelDigest digest_model(const nn::ModelParams& model) {
    const std::vector<std::uint8_t> bytes = serialize_model(model);
    return ModelDigest{detail::sha256_hex(bytes)};
}

bool verify_model(const nn::ModelParams& model, const ModelDigest& claimed) {
    return digest_model(model) == claimed;
}

} // namespace pocl::fl
