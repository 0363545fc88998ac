#include "pocl/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "pocl/errors.hpp"
#include "textio.hpp"

namespace pocl::consensus {

namespace {

constexpr double kRowSumTolerance = 1e-9;

bool rows_are_distributions(const nn::Matrix& probs) {
    if (probs.rows == 0 || probs.cols == 0) return false;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < probs.cols; ++c) {
            const double v = probs.at(r, c);
            if (!(v >= 0.0 && v <= 1.0 + kRowSumTolerance)) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) return false;
    }
    return true;
}

} // namespace

void RoundConfig::validate(std::size_t miner_count) const {
    if (winners_per_round < 1) {
        throw ConfigError("winners_per_round must be >= 1");
    }
    if (static_cast<std::size_t>(winners_per_round) > miner_count) {
        throw ConfigError("winners_per_round exceeds the miner count");
    }
    if (model_deadline <= 0 || pred_deadline <= 0 || vote_deadline <= 0) {
        throw ConfigError("phase deadlines must be positive");
    }
    if (block_reward < 0.0) {
        throw ConfigError("block_reward must be >= 0");
    }
    if (test_records_per_miner < 1) {
        throw ConfigError("test_records_per_miner must be >= 1");
    }
}

std::vector<MinerId> honest_ranking(const std::map<MinerId, double>& losses,
                                    const std::map<MinerId, Tick>& times) {
    if (losses.size() != times.size()) {
        throw ConfigError("honest_ranking: loss/time key sets differ");
    }
    std::vector<MinerId> order;
    order.reserve(losses.size());
    for (const auto& [id, l] : losses) {
        if (!times.contains(id)) {
            throw ConfigError("honest_ranking: no time for " + id);
        }
        order.push_back(id);
    }
    std::sort(order.begin(), order.end(), [&](const MinerId& a, const MinerId& b) {
        const double la = losses.at(a);
        const double lb = losses.at(b);
        if (la != lb) return la < lb;
        const Tick ta = times.at(a);
        const Tick tb = times.at(b);
        if (ta != tb) return ta < tb;
        return a < b;
    });
    return order;
}

TallyResult tally_ballots(const std::vector<VoteBallot>& ballots,
                          const std::vector<MinerId>& eligible,
                          const std::map<MinerId, double>& mean_pred_time) {
    TallyResult result;
    for (const MinerId& id : eligible) {
        result.points[id] = 0;
    }
    for (const VoteBallot& ballot : ballots) {
        const int m = static_cast<int>(ballot.ranking.size());
        for (int i = 0; i < m; ++i) {
            result.points.at(ballot.ranking[static_cast<std::size_t>(i)]) += m - 1 - i;
        }
    }
    result.ranked = eligible;
    constexpr double kNever = std::numeric_limits<double>::infinity();
    auto mean_time = [&](const MinerId& id) {
        const auto it = mean_pred_time.find(id);
        return it == mean_pred_time.end() ? kNever : it->second;
    };
    std::sort(result.ranked.begin(), result.ranked.end(),
              [&](const MinerId& a, const MinerId& b) {
                  const int pa = result.points.at(a);
                  const int pb = result.points.at(b);
                  if (pa != pb) return pa > pb;
                  const double ta = mean_time(a);
                  const double tb = mean_time(b);
                  if (ta != tb) return ta < tb;
                  return a < b;
              });
    return result;
}

RoundContext::RoundContext(RoundConfig config, std::uint64_t round, Tick start,
                           fl::ModelDigest global_in, std::vector<MinerId> roster)
    : config_(config), round_(round), start_(start), global_in_(std::move(global_in)),
      roster_(std::move(roster)) {
    if (roster_.empty()) {
        throw ConfigError("round has no miners");
    }
    std::sort(roster_.begin(), roster_.end());
    if (std::adjacent_find(roster_.begin(), roster_.end()) != roster_.end()) {
        throw ConfigError("duplicate miner id in roster");
    }
    config_.validate(roster_.size());
}

bool RoundContext::is_participant(const MinerId& id) const {
    return proposals_.contains(id);
}

Accept RoundContext::accept_model_proposal(ModelProposal proposal) {
    if (phase_ != Phase::ModelProposal) {
        return Accept::Late;
    }
    if (!std::binary_search(roster_.begin(), roster_.end(), proposal.miner)) {
        return Accept::Malformed;
    }
    if (proposal.submitted_at > model_deadline_at()) {
        return Accept::Late;
    }
    if (proposal.test_records.size() !=
        static_cast<std::size_t>(config_.test_records_per_miner)) {
        return Accept::Malformed;
    }
    const std::size_t dim = proposal.test_records.front().size();
    if (dim == 0) {
        return Accept::Malformed;
    }
    for (const auto& rec : proposal.test_records) {
        if (rec.size() != dim) {
            return Accept::Malformed;
        }
    }
    if (proposal.digest.hex.empty()) {
        return Accept::Malformed;
    }
    if (proposals_.contains(proposal.miner)) {
        return Accept::Duplicate;
    }
    const MinerId miner = proposal.miner;
    proposals_.emplace(miner, std::move(proposal));
    return Accept::Accepted;
}

void RoundContext::close_model_phase() {
    if (phase_ != Phase::ModelProposal) {
        throw ConsistencyError("close_model_phase called out of order");
    }
    phase_ = Phase::Prediction;
}

Accept RoundContext::accept_prediction(PredictionSet pred) {
    if (phase_ == Phase::ModelProposal) {
        return Accept::Malformed; // phase not open yet
    }
    if (phase_ != Phase::Prediction) {
        return Accept::Late;
    }
    if (pred.predictor == pred.target) {
        return Accept::Malformed;
    }
    if (!is_participant(pred.predictor) || !is_participant(pred.target)) {
        return Accept::Malformed;
    }
    if (pred.submitted_at > pred_deadline_at()) {
        return Accept::Late;
    }
    const ModelProposal& target_proposal = proposals_.at(pred.target);
    if (pred.probs.rows != target_proposal.test_records.size()) {
        return Accept::Malformed;
    }
    if (!rows_are_distributions(pred.probs)) {
        return Accept::Malformed;
    }
    const auto key = std::make_pair(pred.target, pred.predictor);
    if (predictions_.contains(key)) {
        return Accept::Duplicate;
    }
    predictions_.emplace(key, std::move(pred));
    return Accept::Accepted;
}

void RoundContext::close_prediction_phase() {
    if (phase_ != Phase::Prediction) {
        throw ConsistencyError("close_prediction_phase called out of order");
    }
    phase_ = Phase::Voting;
}

Accept RoundContext::accept_ballot(VoteBallot ballot) {
    if (phase_ == Phase::ModelProposal || phase_ == Phase::Prediction) {
        return Accept::Malformed; // phase not open yet
    }
    if (phase_ != Phase::Voting) {
        return Accept::Late;
    }
    if (!is_participant(ballot.voter)) {
        return Accept::Malformed;
    }
    // The ranking must be a permutation of exactly the on-time predictors
    // for the voter's records, voter excluded. Empty ballots carry no
    // information and are rejected.
    std::set<MinerId> expected;
    for (const auto& [key, pred] : predictions_) {
        if (key.first == ballot.voter) {
            expected.insert(key.second);
        }
    }
    if (ballot.ranking.empty() || ballot.ranking.size() != expected.size()) {
        return Accept::Malformed;
    }
    std::set<MinerId> seen;
    for (const MinerId& id : ballot.ranking) {
        if (!expected.contains(id) || !seen.insert(id).second) {
            return Accept::Malformed;
        }
    }
    if (ballots_.contains(ballot.voter)) {
        return Accept::Duplicate;
    }
    const MinerId voter = ballot.voter;
    ballots_.emplace(voter, std::move(ballot));
    return Accept::Accepted;
}

std::vector<MinerId> RoundContext::participants() const {
    std::vector<MinerId> out;
    out.reserve(proposals_.size());
    for (const auto& [id, p] : proposals_) {
        out.push_back(id);
    }
    return out;
}

const ModelProposal* RoundContext::proposal_of(const MinerId& miner) const {
    const auto it = proposals_.find(miner);
    return it == proposals_.end() ? nullptr : &it->second;
}

std::map<MinerId, const PredictionSet*> RoundContext::predictions_for(const MinerId& target) const {
    std::map<MinerId, const PredictionSet*> out;
    for (const auto& [key, pred] : predictions_) {
        if (key.first == target) {
            out.emplace(key.second, &pred);
        }
    }
    return out;
}

std::map<MinerId, double> RoundContext::mean_prediction_times() const {
    std::map<MinerId, std::pair<double, std::size_t>> acc;
    for (const auto& [key, pred] : predictions_) {
        auto& [sum, n] = acc[key.second];
        sum += static_cast<double>(pred.submitted_at);
        n += 1;
    }
    std::map<MinerId, double> out;
    for (const auto& [id, sn] : acc) {
        out[id] = sn.first / static_cast<double>(sn.second);
    }
    return out;
}

const TallyResult& RoundContext::tally_and_select() {
    if (phase_ != Phase::Voting) {
        throw ConsistencyError("tally_and_select called out of order");
    }
    phase_ = Phase::Closed;
    if (ballots_.empty()) {
        throw RoundAbort("round " + std::to_string(round_) + ": no ballots were cast");
    }
    std::vector<VoteBallot> ballots;
    ballots.reserve(ballots_.size());
    for (const auto& [id, b] : ballots_) {
        ballots.push_back(b);
    }
    selection_ = tally_ballots(ballots, participants(), mean_prediction_times());
    return *selection_;
}

FinalizeResult RoundContext::finalize_round(chain::Ledger& ledger,
                                            const std::map<MinerId, nn::ModelParams>& full_models,
                                            const nn::ModelParams& round_start_global) {
    if (!selection_) {
        throw ConsistencyError("finalize_round before tally_and_select");
    }

    // Walk the ranked list, skipping candidates whose retrieved model does
    // not match the digest they proposed; the next-ranked miner fills the
    // seat.
    const std::size_t want = std::min<std::size_t>(
        static_cast<std::size_t>(config_.winners_per_round), selection_->ranked.size());
    std::vector<MinerId> winners;
    for (const MinerId& candidate : selection_->ranked) {
        if (winners.size() == want) break;
        const auto model_it = full_models.find(candidate);
        if (model_it == full_models.end()) continue;
        if (!fl::verify_model(model_it->second, proposals_.at(candidate).digest)) continue;
        winners.push_back(candidate);
    }
    if (winners.empty()) {
        throw RoundAbort("round " + std::to_string(round_) + ": all winners disqualified");
    }

    std::vector<nn::ModelParams> winner_models;
    winner_models.reserve(winners.size());
    std::map<MinerId, double> contributions;
    for (const MinerId& w : winners) {
        const nn::ModelParams& model = full_models.at(w);
        winner_models.push_back(model);
        contributions[w] = fl::compute_contribution(model, round_start_global);
    }

    FinalizeResult out;
    out.new_global = fl::fed_avg(winner_models);
    out.record.rewards = fl::distribute_rewards(contributions, config_.block_reward);

    const chain::Block& block = ledger.commit_block(round_, winners, out.record.rewards);

    out.record.round = round_;
    out.record.global_in = global_in_;
    for (const auto& [id, p] : proposals_) {
        out.record.proposals.push_back(p);
    }
    for (const auto& [key, p] : predictions_) {
        out.record.predictions.push_back(p);
    }
    for (const auto& [id, b] : ballots_) {
        out.record.ballots.push_back(b);
    }
    out.record.tally = selection_->points;
    out.record.winners = winners;
    out.record.global_out = fl::digest_model(out.new_global);
    out.record.block_hash = block.block_hash;
    return out;
}

void write_round_record(std::ostream& os, const RoundRecord& record) {
    os << "round " << record.round << "\n";
    os << "global_in " << record.global_in.hex << "\n";
    for (const ModelProposal& p : record.proposals) {
        os << "proposal " << p.miner << " " << p.digest.hex << " " << p.submitted_at << " "
           << p.test_records.size() << "\n";
    }
    for (const PredictionSet& p : record.predictions) {
        os << "prediction " << p.predictor << " " << p.target << " " << p.submitted_at << "\n";
    }
    for (const VoteBallot& b : record.ballots) {
        os << "ballot " << b.voter;
        for (const MinerId& id : b.ranking) {
            os << " " << id;
        }
        os << "\n";
    }
    for (const auto& [id, points] : record.tally) {
        os << "tally " << id << " " << points << "\n";
    }
    os << "winners";
    for (const MinerId& id : record.winners) {
        os << " " << id;
    }
    os << "\n";
    for (const auto& [id, share] : record.rewards.per_winner) {
        os << "reward " << id << " " << detail::format_double(share.contribution) << " "
           << detail::format_double(share.reward) << "\n";
    }
    os << "global_out " << record.global_out.hex << "\n";
    os << "block " << record.block_hash << "\n";
    os << "end\n";
}

} // namespace pocl::consensus
