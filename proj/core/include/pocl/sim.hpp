#pragma once

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pocl/agents.hpp"
#include "pocl/chain.hpp"
#include "pocl/consensus.hpp"
#include "pocl/nn.hpp"
#include "pocl/rng.hpp"
#include "pocl/types.hpp"

namespace pocl::sim {

/// Converts work terms into simulated ticks. Durations get a multiplicative
/// noise factor uniform in [1 - noise_fraction, 1 + noise_fraction], drawn
/// from the caller's seeded stream, plus the miner's compute factor.
struct CostModel {
    double unit_time = 1.0;
    double noise_fraction = 0.0;

    void validate() const;

    /// unit_time * n_test * dim * h_max, scaled by factor and noise.
    Tick forward_cost(std::size_t n_test, std::size_t dim, std::size_t h_max, double factor,
                      Rng& noise) const;

    /// unit_time * (n_test*n_train*dim + n_test*ceil(log2(max(n_test, 2)))),
    /// scaled by factor and noise.
    Tick knn_cost(std::size_t n_train, std::size_t n_test, std::size_t dim, double factor,
                  Rng& noise) const;

    /// unit_time * 3 * epochs * n_train * dim * h_max (forward plus backward
    /// passes), scaled by factor and noise.
    Tick train_cost(std::size_t n_train, std::size_t dim, std::size_t epochs, std::size_t h_max,
                    double factor, Rng& noise) const;

    /// Loss-evaluation work for ranking n_sets prediction sets.
    Tick vote_cost(std::size_t n_sets, std::size_t n_records, std::size_t classes, double factor,
                   Rng& noise) const;
};

/// Min-ordered on (time, insertion sequence): ties pop in insertion order.
template <typename Payload>
class EventQueue {
public:
    struct Item {
        Tick time;
        std::uint64_t seq;
        Payload payload;
    };

    void push(Tick time, Payload payload) {
        heap_.push_back(Item{time, next_seq_++, std::move(payload)});
        std::push_heap(heap_.begin(), heap_.end(), later);
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

    Item pop() {
        std::pop_heap(heap_.begin(), heap_.end(), later);
        Item item = std::move(heap_.back());
        heap_.pop_back();
        return item;
    }

private:
    static bool later(const Item& a, const Item& b) {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }

    std::vector<Item> heap_;
    std::uint64_t next_seq_ = 0;
};

/// Gaussian-blob synthetic classification task.
struct DatasetSpec {
    std::string generator = "blobs";
    std::uint64_t seed = 0; // 0 == derive from the simulation seed
    std::size_t n = 2000;
    std::size_t dim = 8;
    std::size_t classes = 4;
    double sigma = 0.5;

    void validate() const;
};

struct PartitionSpec {
    enum class Kind { Even, Skewed, Custom };
    Kind kind = Kind::Even;
    double ratio = 1.0;     // Skewed: share multiplier for miners past `split`
    std::size_t split = 0;  // Skewed: first `split` miners get 1 share each
    std::vector<std::size_t> sizes; // Custom

    void validate(std::size_t miner_count) const;
};

struct MinerSpec {
    MinerId id;
    std::optional<agents::AdversarySpec> adversary;
    double compute_factor = 1.0;
};

struct SimConfig {
    std::uint64_t seed = 0;
    std::uint64_t rounds = 1;
    std::size_t workers = 1; // worker threads for agent computation

    std::vector<MinerSpec> miners;
    consensus::RoundConfig round;
    nn::ArchSpec arch;
    nn::Hyperparams hp;
    DatasetSpec dataset;
    PartitionSpec partition;
    double validation_fraction = 0.2; // global holdout, never given to miners
    double holdout_fraction = 0.2;    // per-miner test-record slice

    CostModel cost;

    int submitter_rate = 10;
    std::size_t per_miner_tx = 2;
    Currency amount_min = 1.0;
    Currency amount_max = 50.0;
    std::size_t user_accounts = 8;
    Currency initial_balance = 1000.0;

    void validate() const;
};

/// Per-round, per-participant metrics plus per-round summaries; exported as
/// CSV with the fixed header
/// `round,miner,val_loss,val_acc,won,points,reward,pred_time`.
class MetricsLog {
public:
    struct MinerRow {
        std::uint64_t round = 0;
        MinerId miner;
        double val_loss = 0.0;
        double val_acc = 0.0;
        bool won = false;
        int points = 0;
        Currency reward = 0.0;
        Tick pred_time = -1;
        bool sampled_with_replacement = false;
    };

    struct RoundRow {
        std::uint64_t round = 0;
        std::vector<MinerId> winners;
        std::string block_hash;
        double global_val_loss = 0.0;
        Currency total_balance = 0.0;
    };

    void add(MinerRow row) { rows_.push_back(std::move(row)); }
    void add(RoundRow row) { round_rows_.push_back(std::move(row)); }

    const std::vector<MinerRow>& rows() const { return rows_; }
    const std::vector<RoundRow>& round_rows() const { return round_rows_; }

    void write_csv(std::ostream& os) const;

    /// Wins per miner over [first_round, last_round], inclusive.
    std::map<MinerId, int> win_counts(std::uint64_t first_round, std::uint64_t last_round) const;
    std::map<MinerId, Currency> reward_totals() const;

private:
    std::vector<MinerRow> rows_;
    std::vector<RoundRow> round_rows_;
};

struct SimResult {
    chain::Ledger ledger;
    MetricsLog metrics;
    std::vector<consensus::RoundRecord> rounds;
    nn::ModelParams final_global;
    std::uint64_t rounds_completed = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// Deterministic per-seed blob generator: `classes` centers in [-1, 1]^dim,
/// isotropic per-class noise, labels balanced within one record.
nn::Dataset synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Per-miner record counts implied by `spec` (largest-remainder rounding
/// for Even/Skewed); always sums to `total`.
std::vector<std::size_t> partition_sizes(const PartitionSpec& spec, std::size_t miner_count,
                                         std::size_t total);

/// Seeded stratified partition: per-class shuffle, proportional interleave,
/// then contiguous slicing into partition_sizes(spec, ...). Sizes always
/// sum to the input size and no record is duplicated.
std::vector<nn::Dataset> partition_data(const nn::Dataset& data, const PartitionSpec& spec,
                                        std::size_t miner_count, std::uint64_t seed);

/// Runs the full multi-round consensus simulation. Fully deterministic for
/// a fixed config, independent of `workers`. A round that cannot complete
/// (no ballots) halts the run with partial results and aborted == true.
SimResult run_simulation(const SimConfig& config);

} // namespace pocl::sim
