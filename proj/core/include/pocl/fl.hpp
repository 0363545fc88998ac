#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pocl/nn.hpp"
#include "pocl/types.hpp"

namespace pocl::fl {

/// Hex-encoded 256-bit digest over a model's canonical serialization.
struct ModelDigest {
    std::string hex;

    bool operator==(const ModelDigest&) const = default;
};

/// Per-winner payout. `contribution` keeps the raw mean-absolute-difference
/// value for auditability; `reward` is the normalized share of the block
/// reward.
struct RewardShare {
    double contribution = 0.0;
    Currency reward = 0.0;
};

struct RewardReport {
    std::map<MinerId, RewardShare> per_winner;
    Currency block_reward = 0.0;

    Currency total_rewards() const;
};

/// Elementwise unweighted mean of every weight and bias. All models must
/// share one architecture.
nn::ModelParams fed_avg(std::span<const nn::ModelParams> models);

/// Mean over layers of the mean absolute parameter difference between
/// `local` and `reference` (weights and biases both count). Symmetric,
/// non-negative, zero iff the models are identical.
double compute_contribution(const nn::ModelParams& local, const nn::ModelParams& reference);

/// Splits `block_reward` across winners in proportion to their
/// contributions; if every contribution is zero the split is equal.
RewardReport distribute_rewards(const std::map<MinerId, double>& contributions,
                                Currency block_reward);

/// Canonical model serialization (the public byte layout; see README):
///
///   u64    layer count L
///   L x    { u64 in_dim, u64 out_dim, u8 activation (0 = relu, 1 = softmax) }
///   L x    { out_dim*in_dim weight doubles row-major, out_dim bias doubles }
///
/// Integers little-endian, doubles IEEE-754 64-bit little-endian.
std::vector<std::uint8_t> serialize_model(const nn::ModelParams& model);

/// Inverse of serialize_model. Throws ParseError on malformed input.
nn::ModelParams deserialize_model(std::span<const std::uint8_t> bytes);

/// SHA-256 over the canonical serialization, lowercase hex.
ModelDigest digest_model(const nn::ModelParams& model);

/// True iff digest_model(model) equals `claimed`. This checks identity, not
/// quality: a deliberately zeroed model verifies against its own digest.
bool verify_model(const nn::ModelParams& model, const ModelDigest& claimed);

/// Pluggable combination rule; FedAvg is the only implementation shipped.
class Aggregator {
public:
    virtual ~Aggregator() = default;
    virtual nn::ModelParams combine(std::span<const nn::ModelParams> models) const = 0;
};

class FedAvgAggregator final : public Aggregator {
public:
    nn::ModelParams combine(std::span<const nn::ModelParams> models) const override {
        return fed_avg(models);
    }
};

} // namespace pocl::fl
