#include "pocl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pocl/errors.hpp"
#include "pocl/rng.hpp"

namespace pocl::agents {

namespace {

char hex_digit(std::uint64_t v) {
    return static_cast<char>(v < 10 ? '0' + v : 'a' + (v - 10));
}

std::string hex16(std::uint64_t v) {
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = hex_digit(v & 0xF);
        v >>= 4;
    }
    return s;
}

// Sample test records from the holdout slice; falls back to sampling with
// replacement when the slice is smaller than the request.
void sample_test_records(const nn::Dataset& holdout, int count, Rng& rng, MineResult& out) {
    const std::size_t n = holdout.size();
    std::vector<std::size_t> picks;
    if (n >= static_cast<std::size_t>(count)) {
        std::vector<std::size_t> indices(n);
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        rng.shuffle(indices);
        picks.assign(indices.begin(), indices.begin() + count);
    } else {
        out.sampled_with_replacement = true;
        for (int i = 0; i < count; ++i) {
            picks.push_back(static_cast<std::size_t>(rng.next_below(n)));
        }
    }
    for (std::size_t idx : picks) {
        std::vector<double> rec(holdout.dim());
        std::copy_n(&holdout.features.data[idx * holdout.dim()], holdout.dim(), rec.begin());
        out.test_records.push_back(std::move(rec));
        out.test_labels.push_back(holdout.labels[idx]);
    }
}

consensus::VoteBallot rank_by_loss(const MinerId& voter, const std::vector<int>& true_labels,
                                   const std::map<MinerId, nn::Matrix>& predictions,
                                   const std::map<MinerId, Tick>& times) {
    std::map<MinerId, double> losses;
    for (const auto& [predictor, probs] : predictions) {
        if (predictor == voter) {
            throw ConfigError("vote input contains the voter's own predictions");
        }
        losses[predictor] = nn::loss(probs, true_labels);
    }
    consensus::VoteBallot ballot;
    ballot.voter = voter;
    ballot.ranking = consensus::honest_ranking(losses, times);
    return ballot;
}

} // namespace

void AdversarySpec::validate() const {
    if (!zero_weights && !knn_predictor && !reversed_voting) {
        throw ConfigError("adversary spec has no behavior enabled");
    }
    if (knn_predictor && knn_k < 1) {
        throw ConfigError("knn_k must be >= 1");
    }
}

void MinerProfile::validate() const {
    if (id.empty()) {
        throw ConfigError("miner id is empty");
    }
    train_data.validate();
    holdout_data.validate();
    hp.validate();
    if (!(compute_factor > 0.0)) {
        throw ConfigError("compute_factor must be > 0");
    }
    if (adversary) {
        adversary->validate();
        if (adversary->knn_predictor &&
            static_cast<std::size_t>(adversary->knn_k) > train_data.size()) {
            throw ConfigError("knn_k exceeds miner " + id + "'s local data size");
        }
    }
}

MineResult honest_mine(const MinerProfile& profile, const nn::ModelParams& global,
                       std::uint64_t round_seed, int test_records_per_miner) {
    if (test_records_per_miner < 1) {
        throw ConfigError("test_records_per_miner must be >= 1");
    }
    MineResult out;
    out.model = nn::train_epochs(global, profile.train_data, profile.hp,
                                 Rng::derive(round_seed, {}, "mine.train"));
    out.digest = fl::digest_model(out.model);
    Rng rng(Rng::derive(round_seed, {}, "mine.sample"));
    sample_test_records(profile.holdout_data, test_records_per_miner, rng, out);
    return out;
}

nn::Matrix honest_predict(const nn::ModelParams& trained,
                          const std::vector<std::vector<double>>& records) {
    if (records.empty()) {
        throw ShapeError("no records to predict");
    }
    nn::Matrix batch(records.size(), records.front().size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].size() != batch.cols) {
            throw ShapeError("ragged record batch");
        }
        std::copy(records[r].begin(), records[r].end(), &batch.data[r * batch.cols]);
    }
    return nn::forward(trained, batch);
}

consensus::VoteBallot honest_vote(const MinerId& voter, const std::vector<int>& true_labels,
                                  const std::map<MinerId, nn::Matrix>& predictions,
                                  const std::map<MinerId, Tick>& times) {
    return rank_by_loss(voter, true_labels, predictions, times);
}

MineResult adversary_mine(const MinerProfile& profile, const nn::ModelParams& global,
                          std::uint64_t round_seed, int test_records_per_miner) {
    if (test_records_per_miner < 1) {
        throw ConfigError("test_records_per_miner must be >= 1");
    }
    MineResult out;
    out.model = global;
    for (nn::LayerParams& layer : out.model.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
    out.digest = fl::digest_model(out.model);
    Rng rng(Rng::derive(round_seed, {}, "mine.sample"));
    sample_test_records(profile.holdout_data, test_records_per_miner, rng, out);
    return out;
}

nn::Matrix knn_predict(const nn::Dataset& local, const std::vector<std::vector<double>>& records,
                       int k) {
    if (local.size() == 0) {
        throw ConfigError("knn_predict: empty local data");
    }
    if (k < 1 || static_cast<std::size_t>(k) > local.size()) {
        throw ConfigError("knn_predict: k outside [1, local data size]");
    }
    nn::Matrix probs(records.size(), local.classes);
    std::vector<std::pair<double, std::size_t>> dist(local.size());
    for (std::size_t q = 0; q < records.size(); ++q) {
        const std::vector<double>& query = records[q];
        if (query.size() != local.dim()) {
            throw ShapeError("knn_predict: query dim mismatch");
        }
        for (std::size_t i = 0; i < local.size(); ++i) {
            double d2 = 0.0;
            const double* row = &local.features.data[i * local.dim()];
            for (std::size_t j = 0; j < query.size(); ++j) {
                const double diff = row[j] - query[j];
                d2 += diff * diff;
            }
            dist[i] = {d2, i};
        }
        // (distance, record index) pairs sort ties by index.
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<int> counts(local.classes, 0);
        for (int i = 0; i < k; ++i) {
            counts[static_cast<std::size_t>(local.labels[dist[static_cast<std::size_t>(i)].second])]++;
        }
        double* row = &probs.data[q * probs.cols];
        for (std::size_t c = 0; c < local.classes; ++c) {
            row[c] = static_cast<double>(counts[c]) / static_cast<double>(k);
        }
        // Frequencies are rationals over k; nudge the largest entry so the
        // floating-point row sum is exactly 1.
        for (int pass = 0; pass < 4; ++pass) {
            double sum = 0.0;
            for (std::size_t c = 0; c < probs.cols; ++c) sum += row[c];
            if (sum == 1.0) break;
            const std::size_t argmax = static_cast<std::size_t>(
                std::max_element(row, row + probs.cols) - row);
            row[argmax] += 1.0 - sum;
        }
    }
    return probs;
}

consensus::VoteBallot adversary_vote(const MinerId& voter, const std::vector<int>& true_labels,
                                     const std::map<MinerId, nn::Matrix>& predictions,
                                     const std::map<MinerId, Tick>& times) {
    consensus::VoteBallot ballot = rank_by_loss(voter, true_labels, predictions, times);
    std::reverse(ballot.ranking.begin(), ballot.ranking.end());
    return ballot;
}

std::vector<chain::Transaction> submitter_tick(int rate_per_round, std::uint64_t round_seed,
                                               const std::vector<AccountId>& account_ids,
                                               Currency amount_min, Currency amount_max,
                                               Tick now) {
    if (rate_per_round < 0) {
        throw ConfigError("submitter rate must be >= 0");
    }
    if (rate_per_round > 0 && account_ids.size() < 2) {
        throw ConfigError("submitter needs at least two accounts");
    }
    if (!(amount_min > 0.0) || amount_max < amount_min) {
        throw ConfigError("bad submitter amount range");
    }
    std::vector<chain::Transaction> txs;
    txs.reserve(static_cast<std::size_t>(rate_per_round));
    Rng rng(Rng::derive(round_seed, {}, "submitter"));
    for (int i = 0; i < rate_per_round; ++i) {
        chain::Transaction tx;
        const std::size_t from = static_cast<std::size_t>(rng.next_below(account_ids.size()));
        std::size_t to = static_cast<std::size_t>(rng.next_below(account_ids.size() - 1));
        if (to >= from) ++to;
        tx.from = account_ids[from];
        tx.to = account_ids[to];
        tx.amount = rng.uniform(amount_min, amount_max);
        tx.submitted_at = now;
        tx.id = "tx-" + hex16(rng.next_u64());
        txs.push_back(std::move(tx));
    }
    return txs;
}

} // namespace pocl::agents
