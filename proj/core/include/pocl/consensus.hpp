#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pocl/chain.hpp"
#include "pocl/fl.hpp"
#include "pocl/nn.hpp"
#include "pocl/types.hpp"

namespace pocl::consensus {

struct RoundConfig {
    int winners_per_round = 1; // K
    Tick model_deadline = 0;   // durations from the respective phase start
    Tick pred_deadline = 0;
    Tick vote_deadline = 0;
    Currency block_reward = 0.0;
    int test_records_per_miner = 1;

    void validate(std::size_t miner_count) const;
};

/// A miner's commitment for the round: model digest plus unlabeled test
/// records. Labels stay with the proposer.
struct ModelProposal {
    MinerId miner;
    fl::ModelDigest digest;
    std::vector<std::vector<double>> test_records;
    Tick submitted_at = 0;
};

/// One predictor's class probabilities for one target's test records.
struct PredictionSet {
    MinerId predictor;
    MinerId target;
    nn::Matrix probs;
    Tick submitted_at = 0;
};

/// Ranking of predictors, best first, over exactly the on-time prediction
/// sets for the voter's own records (never including the voter).
struct VoteBallot {
    MinerId voter;
    std::vector<MinerId> ranking;
};

enum class Accept {
    Accepted,
    Late,
    Malformed,
    Duplicate,
};

/// Audit trail of one finished round.
struct RoundRecord {
    std::uint64_t round = 0;
    fl::ModelDigest global_in;
    std::vector<ModelProposal> proposals; // accepted, ascending miner id
    std::vector<PredictionSet> predictions; // accepted, (target, predictor) order
    std::vector<VoteBallot> ballots;      // ascending voter id
    std::map<MinerId, int> tally;
    std::vector<MinerId> winners; // post-verification, selection order
    fl::RewardReport rewards;
    fl::ModelDigest global_out;
    std::string block_hash;
};

/// Ascending loss, ties by earlier submission time, then ascending id.
/// Key sets of the two maps must be equal.
std::vector<MinerId> honest_ranking(const std::map<MinerId, double>& losses,
                                    const std::map<MinerId, Tick>& times);

struct TallyResult {
    std::map<MinerId, int> points;
    std::vector<MinerId> ranked; // every eligible miner, best first
};

/// Borda count: a ballot ranking m predictors awards m-1 points to its first
/// entry down to 0 to its last. Eligible miners are ordered by points
/// descending, then earlier mean prediction time, then ascending id.
TallyResult tally_ballots(const std::vector<VoteBallot>& ballots,
                          const std::vector<MinerId>& eligible,
                          const std::map<MinerId, double>& mean_pred_time);

struct FinalizeResult {
    RoundRecord record;
    nn::ModelParams new_global;
};

/// Phase machine for one consensus round. Strictly single-threaded; the
/// simulator delivers accept_* calls in event-timestamp order.
class RoundContext {
public:
    enum class Phase { ModelProposal, Prediction, Voting, Closed };

    RoundContext(RoundConfig config, std::uint64_t round, Tick start,
                 fl::ModelDigest global_in, std::vector<MinerId> roster);

    Phase phase() const { return phase_; }
    Tick start_time() const { return start_; }
    Tick model_deadline_at() const { return start_ + config_.model_deadline; }
    Tick pred_deadline_at() const { return model_deadline_at() + config_.pred_deadline; }
    Tick vote_deadline_at() const { return pred_deadline_at() + config_.vote_deadline; }
    const RoundConfig& config() const { return config_; }
    const std::vector<MinerId>& roster() const { return roster_; }
    std::uint64_t round() const { return round_; }
    const fl::ModelDigest& global_in() const { return global_in_; }

    Accept accept_model_proposal(ModelProposal proposal);
    /// Closes the model phase; miners without an accepted proposal are
    /// excluded from all later phases.
    void close_model_phase();

    Accept accept_prediction(PredictionSet pred);
    void close_prediction_phase();

    Accept accept_ballot(VoteBallot ballot);

    /// Closes the vote phase and ranks all participants. Throws RoundAbort
    /// if no ballots were cast.
    const TallyResult& tally_and_select();

    /// Verifies the top-K winners' full models against their proposed
    /// digests (mismatches are replaced by the next-ranked miner), runs
    /// FedAvg, computes contributions against `round_start_global`,
    /// distributes rewards, and commits the block. Throws RoundAbort if
    /// every candidate is disqualified.
    FinalizeResult finalize_round(chain::Ledger& ledger,
                                  const std::map<MinerId, nn::ModelParams>& full_models,
                                  const nn::ModelParams& round_start_global);

    /// Miners whose model proposal was accepted (ascending id).
    std::vector<MinerId> participants() const;
    const ModelProposal* proposal_of(const MinerId& miner) const;
    /// Accepted prediction sets covering `target`'s records, by predictor.
    std::map<MinerId, const PredictionSet*> predictions_for(const MinerId& target) const;
    /// Mean accepted-prediction submission time per predictor (used for the
    /// tally tie-break); miners with no accepted set are absent.
    std::map<MinerId, double> mean_prediction_times() const;
    std::size_t ballot_count() const { return ballots_.size(); }

private:
    bool is_participant(const MinerId& id) const;

    RoundConfig config_;
    std::uint64_t round_;
    Tick start_;
    fl::ModelDigest global_in_;
    std::vector<MinerId> roster_;
    Phase phase_ = Phase::ModelProposal;

    std::map<MinerId, ModelProposal> proposals_;
    std::map<std::pair<MinerId, MinerId>, PredictionSet> predictions_; // (target, predictor)
    std::map<MinerId, VoteBallot> ballots_;
    std::optional<TallyResult> selection_;
};

/// Structured-text audit dump of one round (documented field order, stable
/// across runs).
void write_round_record(std::ostream& os, const RoundRecord& record);

} // namespace pocl::consensus
