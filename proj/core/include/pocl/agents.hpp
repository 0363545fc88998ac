#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pocl/chain.hpp"
#include "pocl/consensus.hpp"
#include "pocl/fl.hpp"
#include "pocl/nn.hpp"
#include "pocl/types.hpp"

namespace pocl::agents {

/// The three malicious behaviors, individually toggleable for ablation. A
/// default-constructed spec enables all of them.
struct AdversarySpec {
    bool zero_weights = true;
    bool knn_predictor = true;
    int knn_k = 5;
    bool reversed_voting = true;

    void validate() const;
};

struct MinerProfile {
    MinerId id;
    std::optional<AdversarySpec> adversary; // nullopt == honest
    nn::Dataset train_data;                 // local training slice
    nn::Dataset holdout_data;               // source of proposed test records
    nn::Hyperparams hp;
    double compute_factor = 1.0; // duration multiplier (2.0 == twice as slow)

    bool is_honest() const { return !adversary.has_value(); }
    void validate() const;
};

/// One deep-learning job from the request queue.
struct TaskRequest {
    nn::ArchSpec arch;
    std::string dataset_generator;
    std::uint64_t dataset_seed = 0;
    std::uint64_t rounds = 1;
};

/// What a miner hands the simulator after its mine step. `test_labels` stay
/// private to the miner; only the unlabeled records go into the proposal.
struct MineResult {
    nn::ModelParams model;
    fl::ModelDigest digest;
    std::vector<std::vector<double>> test_records;
    std::vector<int> test_labels;
    bool sampled_with_replacement = false;
};

/// Train the global model on the local slice, then sample test records
/// (without replacement when the holdout slice is large enough) from the
/// holdout slice. Deterministic in (profile, global, round_seed).
MineResult honest_mine(const MinerProfile& profile, const nn::ModelParams& global,
                       std::uint64_t round_seed, int test_records_per_miner);

/// Forward pass of the miner's own trained model over someone's records.
nn::Matrix honest_predict(const nn::ModelParams& trained,
                          const std::vector<std::vector<double>>& records);

/// Scores every predictor's probabilities against the voter's retained
/// labels and ranks by (loss, submission time, id).
consensus::VoteBallot honest_vote(const MinerId& voter, const std::vector<int>& true_labels,
                                  const std::map<MinerId, nn::Matrix>& predictions,
                                  const std::map<MinerId, Tick>& times);

/// Skips training entirely: proposes a model with every weight and bias
/// zero. The digest is computed over the zeroed model, so integrity
/// verification passes; the defense against this attack is the vote, not
/// the hash.
MineResult adversary_mine(const MinerProfile& profile, const nn::ModelParams& global,
                          std::uint64_t round_seed, int test_records_per_miner);

/// Brute-force Euclidean k-NN over the local training slice. Each output
/// row is the neighbor-label frequency vector (sums to 1); distance ties
/// break by record index.
nn::Matrix knn_predict(const nn::Dataset& local, const std::vector<std::vector<double>>& records,
                       int k);

/// Exact reverse of honest_vote's ranking.
consensus::VoteBallot adversary_vote(const MinerId& voter, const std::vector<int>& true_labels,
                                     const std::map<MinerId, nn::Matrix>& predictions,
                                     const std::map<MinerId, Tick>& times);

/// Generates `rate_per_round` transfers with seeded-random distinct
/// (from, to) pairs and amounts uniform in [amount_min, amount_max].
std::vector<chain::Transaction> submitter_tick(int rate_per_round, std::uint64_t round_seed,
                                               const std::vector<AccountId>& account_ids,
                                               Currency amount_min, Currency amount_max,
                                               Tick now);

} // namespace pocl::agents
