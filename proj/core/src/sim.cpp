#include "pocl/sim.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "pocl/errors.hpp"
#include "textio.hpp"

namespace pocl::sim {

namespace {

// Runs fn(0..n-1) on up to `workers` threads. Each index is independent and
// writes only its own output slot, so the schedule cannot affect results.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t count = std::min(workers, n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

Tick scaled(double base, double unit_time, double factor, double noise_fraction, Rng& noise) {
    double mul = 1.0;
    if (noise_fraction > 0.0) {
        mul += noise.uniform(-noise_fraction, noise_fraction);
    }
    return static_cast<Tick>(std::llround(base * unit_time * factor * mul));
}

std::size_t ceil_log2(std::size_t n) {
    if (n < 2) n = 2;
    return static_cast<std::size_t>(std::bit_width(n - 1));
}

} // namespace

void CostModel::validate() const {
    if (!(unit_time > 0.0)) {
        throw ConfigError("cost unit_time must be > 0");
    }
    if (noise_fraction < 0.0 || noise_fraction >= 1.0) {
        throw ConfigError("cost noise_fraction must be in [0, 1)");
    }
}

Tick CostModel::forward_cost(std::size_t n_test, std::size_t dim, std::size_t h_max, double factor,
                             Rng& noise) const {
    const double base = static_cast<double>(n_test) * static_cast<double>(dim) *
                        static_cast<double>(h_max);
    return scaled(base, unit_time, factor, noise_fraction, noise);
}

Tick CostModel::knn_cost(std::size_t n_train, std::size_t n_test, std::size_t dim, double factor,
                         Rng& noise) const {
    const double base = static_cast<double>(n_test) * static_cast<double>(n_train) *
                            static_cast<double>(dim) +
                        static_cast<double>(n_test) * static_cast<double>(ceil_log2(n_test));
    return scaled(base, unit_time, factor, noise_fraction, noise);
}

Tick CostModel::train_cost(std::size_t n_train, std::size_t dim, std::size_t epochs,
                           std::size_t h_max, double factor, Rng& noise) const {
    const double base = 3.0 * static_cast<double>(epochs) * static_cast<double>(n_train) *
                        static_cast<double>(dim) * static_cast<double>(h_max);
    return scaled(base, unit_time, factor, noise_fraction, noise);
}

Tick CostModel::vote_cost(std::size_t n_sets, std::size_t n_records, std::size_t classes,
                          double factor, Rng& noise) const {
    const double base = static_cast<double>(n_sets) * static_cast<double>(n_records) *
                        static_cast<double>(classes);
    return scaled(base, unit_time, factor, noise_fraction, noise);
}

void DatasetSpec::validate() const {
    if (generator != "blobs") {
        throw ConfigError("unknown dataset generator '" + generator + "'");
    }
    if (n == 0 || dim == 0 || classes < 2) {
        throw ConfigError("dataset spec needs n >= 1, dim >= 1, classes >= 2");
    }
    if (sigma < 0.0) {
        throw ConfigError("dataset sigma must be >= 0");
    }
}

void PartitionSpec::validate(std::size_t miner_count) const {
    switch (kind) {
    case Kind::Even:
        break;
    case Kind::Skewed:
        if (!(ratio > 0.0)) {
            throw ConfigError("skewed partition ratio must be > 0");
        }
        if (split > miner_count) {
            throw ConfigError("skewed partition split exceeds miner count");
        }
        break;
    case Kind::Custom:
        if (sizes.size() != miner_count) {
            throw ConfigError("custom partition needs one size per miner");
        }
        break;
    }
}

void SimConfig::validate() const {
    if (rounds < 1) {
        throw ConfigError("rounds must be >= 1");
    }
    if (miners.empty()) {
        throw ConfigError("miner roster is empty");
    }
    std::vector<MinerId> ids;
    for (const MinerSpec& m : miners) {
        if (m.id.empty() || m.id.find(' ') != std::string::npos) {
            throw ConfigError("bad miner id '" + m.id + "'");
        }
        if (!(m.compute_factor > 0.0)) {
            throw ConfigError("compute_factor must be > 0 for " + m.id);
        }
        if (m.adversary) m.adversary->validate();
        ids.push_back(m.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw ConfigError("duplicate miner id in roster");
    }
    round.validate(miners.size());
    arch.validate();
    dataset.validate();
    if (arch.layer_sizes.front() != dataset.dim || arch.layer_sizes.back() != dataset.classes) {
        throw ConfigError("arch input/output sizes must match dataset dim/classes");
    }
    hp.validate();
    partition.validate(miners.size());
    if (!(validation_fraction > 0.0) || validation_fraction >= 1.0) {
        throw ConfigError("validation_fraction must be in (0, 1)");
    }
    if (!(holdout_fraction > 0.0) || holdout_fraction >= 1.0) {
        throw ConfigError("holdout_fraction must be in (0, 1)");
    }
    cost.validate();
    if (submitter_rate < 0) {
        throw ConfigError("submitter_rate must be >= 0");
    }
    if (submitter_rate > 0 && miners.size() + user_accounts < 2) {
        throw ConfigError("submitter needs at least two accounts");
    }
    if (submitter_rate > 0 && (!(amount_min > 0.0) || amount_max < amount_min)) {
        throw ConfigError("bad submitter amount range");
    }
    if (initial_balance < 0.0) {
        throw ConfigError("initial_balance must be >= 0");
    }
}

void MetricsLog::write_csv(std::ostream& os) const {
    os << "round,miner,val_loss,val_acc,won,points,reward,pred_time\n";
    for (const MinerRow& r : rows_) {
        os << r.round << "," << r.miner << "," << detail::format_double(r.val_loss) << ","
           << detail::format_double(r.val_acc) << "," << (r.won ? 1 : 0) << "," << r.points << ","
           << detail::format_double(r.reward) << "," << r.pred_time << "\n";
    }
}

std::map<MinerId, int> MetricsLog::win_counts(std::uint64_t first_round,
                                              std::uint64_t last_round) const {
    std::map<MinerId, int> wins;
    for (const MinerRow& r : rows_) {
        if (r.round < first_round || r.round > last_round) continue;
        wins[r.miner] += r.won ? 1 : 0;
    }
    return wins;
}

std::map<MinerId, Currency> MetricsLog::reward_totals() const {
    std::map<MinerId, Currency> totals;
    for (const MinerRow& r : rows_) {
        totals[r.miner] += r.reward;
    }
    return totals;
}

nn::Dataset synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(Rng::derive(seed, {}, "blobs"));
    nn::Matrix centers(spec.classes, spec.dim);
    for (double& v : centers.data) {
        v = rng.uniform(-1.0, 1.0);
    }
    nn::Dataset data;
    data.classes = spec.classes;
    data.features = nn::Matrix(spec.n, spec.dim);
    data.labels.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t label = i % spec.classes;
        data.labels[i] = static_cast<int>(label);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            data.features.at(i, j) = centers.at(label, j) + spec.sigma * rng.normal();
        }
    }
    return data;
}

namespace {

// Largest-remainder apportionment of `total` records across `shares`.
std::vector<std::size_t> apportion(const std::vector<double>& shares, std::size_t total) {
    const double share_sum = std::accumulate(shares.begin(), shares.end(), 0.0);
    std::vector<std::size_t> sizes(shares.size());
    std::vector<std::pair<double, std::size_t>> fractions;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        const double quota = static_cast<double>(total) * shares[i] / share_sum;
        sizes[i] = static_cast<std::size_t>(quota);
        assigned += sizes[i];
        fractions.emplace_back(quota - std::floor(quota), i);
    }
    // Highest fractional part first; ties resolved by lower miner index.
    std::sort(fractions.begin(), fractions.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
        sizes[fractions[k % fractions.size()].second]++;
    }
    return sizes;
}

} // namespace

std::vector<std::size_t> partition_sizes(const PartitionSpec& spec, std::size_t miner_count,
                                         std::size_t total) {
    if (miner_count == 0) {
        throw ConfigError("partition needs at least one slice");
    }
    spec.validate(miner_count);
    std::vector<std::size_t> sizes;
    switch (spec.kind) {
    case PartitionSpec::Kind::Even:
        sizes = apportion(std::vector<double>(miner_count, 1.0), total);
        break;
    case PartitionSpec::Kind::Skewed: {
        std::vector<double> shares(miner_count, 1.0);
        for (std::size_t i = spec.split; i < miner_count; ++i) {
            shares[i] = spec.ratio;
        }
        sizes = apportion(shares, total);
        break;
    }
    case PartitionSpec::Kind::Custom:
        sizes = spec.sizes;
        if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != total) {
            throw ConfigError("custom partition sizes must sum to the dataset size");
        }
        break;
    }
    return sizes;
}

std::vector<nn::Dataset> partition_data(const nn::Dataset& data, const PartitionSpec& spec,
                                        std::size_t miner_count, std::uint64_t seed) {
    data.validate();
    if (miner_count > data.size()) {
        throw ConfigError("more partitions than records");
    }
    const std::vector<std::size_t> sizes = partition_sizes(spec, miner_count, data.size());
    for (std::size_t s : sizes) {
        if (s == 0) {
            throw ConfigError("partition produced an empty slice; not enough records");
        }
    }

    // Group records by class and shuffle within each class.
    std::vector<std::vector<std::size_t>> by_class(data.classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        Rng rng(Rng::derive(seed, {c}, "partition.class"));
        rng.shuffle(by_class[c]);
    }

    // Proportional interleave: every prefix of `order` is close to the
    // global class mix, so contiguous slices are stratified.
    std::vector<std::size_t> order;
    order.reserve(data.size());
    std::vector<std::size_t> remaining(data.classes), taken(data.classes, 0), total(data.classes);
    for (std::size_t c = 0; c < data.classes; ++c) {
        remaining[c] = total[c] = by_class[c].size();
    }
    for (std::size_t step = 0; step < data.size(); ++step) {
        std::size_t best = data.classes;
        for (std::size_t c = 0; c < data.classes; ++c) {
            if (remaining[c] == 0) continue;
            if (best == data.classes ||
                remaining[c] * total[best] > remaining[best] * total[c]) {
                best = c;
            }
        }
        order.push_back(by_class[best][taken[best]++]);
        remaining[best]--;
    }

    std::vector<nn::Dataset> parts;
    parts.reserve(miner_count);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < miner_count; ++i) {
        const std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                             order.begin() +
                                                 static_cast<std::ptrdiff_t>(offset + sizes[i]));
        parts.push_back(data.subset(slice));
        offset += sizes[i];
    }
    return parts;
}

namespace {

using Event = std::function<void(Tick)>;

struct Simulation {
    explicit Simulation(const SimConfig& config)
        : cfg(config), h_max(config.arch.max_layer_size()),
          ledger(initial_balances(config)) {}

    static std::map<AccountId, Currency> initial_balances(const SimConfig& config) {
        std::map<AccountId, Currency> balances;
        for (const MinerSpec& m : config.miners) {
            balances[m.id] = config.initial_balance;
        }
        for (std::size_t u = 0; u < config.user_accounts; ++u) {
            std::string id = std::to_string(u + 1);
            if (id.size() < 2) id.insert(id.begin(), '0');
            balances["user" + id] = config.initial_balance;
        }
        return balances;
    }

    SimResult run();

private:
    void prepare_data();
    void start_round(std::uint64_t r, Tick t0);
    void on_model_deadline(Tick now);
    void on_pred_deadline(Tick now);
    void on_vote_deadline(Tick now);
    void record_metrics(const consensus::FinalizeResult& fin);

    std::uint64_t round_seed(std::uint64_t r) const {
        return Rng::derive(cfg.seed, {r}, "round");
    }
    std::uint64_t miner_seed(std::uint64_t r, std::size_t i, std::string_view tag) const {
        return Rng::derive(round_seed(r), {i}, tag);
    }

    const SimConfig& cfg;
    std::size_t h_max;
    chain::Ledger ledger;

    nn::Dataset validation;
    std::vector<agents::MinerProfile> profiles; // ascending id
    std::vector<MinerId> roster;
    std::vector<AccountId> accounts;

    nn::ModelParams global;
    nn::ModelParams round_start_global;
    std::optional<consensus::RoundContext> ctx;
    std::uint64_t current_round = 0;

    // Per-round scratch, rebuilt by start_round.
    std::map<MinerId, agents::MineResult> mined;
    std::map<MinerId, Tick> pred_times; // submission tick, late or not

    EventQueue<Event> queue;

    MetricsLog metrics;
    std::vector<consensus::RoundRecord> records;
    std::uint64_t rounds_completed = 0;
    bool aborted = false;
    std::string abort_reason;
};

void Simulation::prepare_data() {
    const std::uint64_t ds_seed =
        cfg.dataset.seed != 0 ? cfg.dataset.seed : Rng::derive(cfg.seed, {}, "dataset");
    const nn::Dataset full = synthetic_dataset(cfg.dataset, ds_seed);

    const std::size_t val_n = static_cast<std::size_t>(
        std::llround(cfg.validation_fraction * static_cast<double>(full.size())));
    if (val_n == 0 || val_n >= full.size()) {
        throw ConfigError("validation split leaves no data on one side");
    }
    PartitionSpec val_split;
    val_split.kind = PartitionSpec::Kind::Custom;
    val_split.sizes = {val_n, full.size() - val_n};
    std::vector<nn::Dataset> halves =
        partition_data(full, val_split, 2, Rng::derive(cfg.seed, {}, "valsplit"));
    validation = std::move(halves[0]);
    const nn::Dataset pool = std::move(halves[1]);

    std::vector<MinerSpec> specs = cfg.miners;
    std::sort(specs.begin(), specs.end(),
              [](const MinerSpec& a, const MinerSpec& b) { return a.id < b.id; });

    std::vector<nn::Dataset> slices =
        partition_data(pool, cfg.partition, specs.size(), Rng::derive(cfg.seed, {}, "partition"));

    for (std::size_t i = 0; i < specs.size(); ++i) {
        nn::Dataset& local = slices[i];
        if (local.size() < 2) {
            throw ConfigError("miner " + specs[i].id + " has fewer than 2 records");
        }
        std::size_t holdout = static_cast<std::size_t>(
            std::llround(cfg.holdout_fraction * static_cast<double>(local.size())));
        holdout = std::clamp<std::size_t>(holdout, 1, local.size() - 1);

        std::vector<std::size_t> train_idx(local.size() - holdout);
        std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
        std::vector<std::size_t> holdout_idx(holdout);
        std::iota(holdout_idx.begin(), holdout_idx.end(), local.size() - holdout);

        agents::MinerProfile profile;
        profile.id = specs[i].id;
        profile.adversary = specs[i].adversary;
        profile.compute_factor = specs[i].compute_factor;
        profile.hp = cfg.hp;
        profile.train_data = local.subset(train_idx);
        profile.holdout_data = local.subset(holdout_idx);
        profile.validate();
        profiles.push_back(std::move(profile));
        roster.push_back(specs[i].id);
    }
    for (const auto& [id, bal] : ledger.balances()) {
        accounts.push_back(id);
    }
}

void Simulation::start_round(std::uint64_t r, Tick t0) {
    current_round = r;
    mined.clear();
    pred_times.clear();

    const std::uint64_t rseed = round_seed(r);

    // Users submit transfers; miners ask for transactions to mine.
    for (chain::Transaction& tx : agents::submitter_tick(cfg.submitter_rate,
                                                         Rng::derive(rseed, {}, "txs"), accounts,
                                                         cfg.amount_min, cfg.amount_max, t0)) {
        ledger.submit_transaction(std::move(tx));
    }
    ledger.assign_transactions(roster, cfg.per_miner_tx);

    round_start_global = global;
    ctx.emplace(cfg.round, r, t0, fl::digest_model(global), roster);

    // Local training happens up front on worker threads; only the simulated
    // completion times depend on the cost model.
    std::vector<agents::MineResult> results(profiles.size());
    std::vector<Tick> costs(profiles.size());
    parallel_for(profiles.size(), cfg.workers, [&](std::size_t i) {
        const agents::MinerProfile& p = profiles[i];
        const std::uint64_t mseed = miner_seed(r, i, "mine");
        Rng noise(miner_seed(r, i, "noise.mine"));
        if (p.adversary && p.adversary->zero_weights) {
            results[i] = agents::adversary_mine(p, global, mseed, cfg.round.test_records_per_miner);
            costs[i] = 0; // no training performed
        } else {
            results[i] = agents::honest_mine(p, global, mseed, cfg.round.test_records_per_miner);
            costs[i] = cfg.cost.train_cost(p.train_data.size(), p.train_data.dim(),
                                           cfg.hp.epochs, h_max, p.compute_factor, noise);
        }
    });

    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const MinerId id = profiles[i].id;
        const Tick arrival = t0 + costs[i];
        mined.emplace(id, std::move(results[i]));
        queue.push(arrival, [this, id](Tick now) {
            const agents::MineResult& mine = mined.at(id);
            consensus::ModelProposal proposal;
            proposal.miner = id;
            proposal.digest = mine.digest;
            proposal.test_records = mine.test_records;
            proposal.submitted_at = now;
            ctx->accept_model_proposal(std::move(proposal));
        });
    }
    queue.push(ctx->model_deadline_at(), [this](Tick now) { on_model_deadline(now); });
}

void Simulation::on_model_deadline(Tick now) {
    ctx->close_model_phase();
    const std::vector<MinerId> participants = ctx->participants();

    // Each participant predicts every other participant's records with its
    // own model (or its KNN shortcut); one submission time covers all of a
    // predictor's sets.
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (std::binary_search(participants.begin(), participants.end(), profiles[i].id)) {
            indices.push_back(i);
        }
    }
    struct PredOut {
        std::map<MinerId, nn::Matrix> by_target;
        Tick cost = 0;
    };
    std::vector<PredOut> outs(indices.size());
    parallel_for(indices.size(), cfg.workers, [&](std::size_t slot) {
        const std::size_t i = indices[slot];
        const agents::MinerProfile& p = profiles[i];
        PredOut& out = outs[slot];
        std::size_t total_records = 0;
        for (const MinerId& target : participants) {
            if (target == p.id) continue;
            const consensus::ModelProposal* proposal = ctx->proposal_of(target);
            const bool use_knn = p.adversary && p.adversary->knn_predictor;
            out.by_target[target] =
                use_knn ? agents::knn_predict(p.train_data, proposal->test_records,
                                              p.adversary->knn_k)
                        : agents::honest_predict(mined.at(p.id).model, proposal->test_records);
            total_records += proposal->test_records.size();
        }
        Rng noise(miner_seed(current_round, i, "noise.pred"));
        if (total_records == 0) {
            out.cost = 0;
        } else if (p.adversary && p.adversary->knn_predictor) {
            out.cost = cfg.cost.knn_cost(p.train_data.size(), total_records, p.train_data.dim(),
                                         p.compute_factor, noise);
        } else {
            out.cost = cfg.cost.forward_cost(total_records, cfg.dataset.dim, h_max,
                                             p.compute_factor, noise);
        }
    });

    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
        const MinerId id = profiles[indices[slot]].id;
        const Tick arrival = now + outs[slot].cost;
        pred_times[id] = arrival;
        // Move the computed matrices into the event.
        auto sets = std::make_shared<std::map<MinerId, nn::Matrix>>(
            std::move(outs[slot].by_target));
        queue.push(arrival, [this, id, sets](Tick at) {
            for (auto& [target, probs] : *sets) {
                consensus::PredictionSet pred;
                pred.predictor = id;
                pred.target = target;
                pred.probs = probs;
                pred.submitted_at = at;
                ctx->accept_prediction(std::move(pred));
            }
        });
    }
    queue.push(ctx->pred_deadline_at(), [this](Tick at) { on_pred_deadline(at); });
}

void Simulation::on_pred_deadline(Tick now) {
    ctx->close_prediction_phase();

    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const agents::MinerProfile& p = profiles[i];
        const MinerId id = p.id;
        if (!ctx->proposal_of(id)) continue;
        const auto sets = ctx->predictions_for(id);
        if (sets.empty()) continue; // nothing to rank, no ballot

        std::map<MinerId, nn::Matrix> probs;
        std::map<MinerId, Tick> times;
        for (const auto& [predictor, pred] : sets) {
            probs.emplace(predictor, pred->probs);
            times.emplace(predictor, pred->submitted_at);
        }
        const std::vector<int>& labels = mined.at(id).test_labels;
        const bool reversed = p.adversary && p.adversary->reversed_voting;
        consensus::VoteBallot ballot = reversed
                                           ? agents::adversary_vote(id, labels, probs, times)
                                           : agents::honest_vote(id, labels, probs, times);

        Rng noise(miner_seed(current_round, i, "noise.vote"));
        const Tick cost = cfg.cost.vote_cost(sets.size(), labels.size(), cfg.dataset.classes,
                                             p.compute_factor, noise);
        auto shared = std::make_shared<consensus::VoteBallot>(std::move(ballot));
        queue.push(now + cost, [this, shared](Tick) { ctx->accept_ballot(*shared); });
    }
    queue.push(ctx->vote_deadline_at(), [this](Tick at) { on_vote_deadline(at); });
}

void Simulation::on_vote_deadline(Tick now) {
    ctx->tally_and_select();

    std::map<MinerId, nn::ModelParams> full_models;
    for (const auto& [id, mine] : mined) {
        full_models.emplace(id, mine.model);
    }
    consensus::FinalizeResult fin = ctx->finalize_round(ledger, full_models, round_start_global);

    record_metrics(fin);
    records.push_back(std::move(fin.record));
    global = std::move(fin.new_global);
    rounds_completed = current_round + 1;

    if (current_round + 1 < cfg.rounds) {
        start_round(current_round + 1, now);
    }
}

void Simulation::record_metrics(const consensus::FinalizeResult& fin) {
    const consensus::RoundRecord& rec = fin.record;

    for (const consensus::ModelProposal& proposal : rec.proposals) {
        const MinerId& id = proposal.miner;
        const agents::MineResult& mine = mined.at(id);
        const nn::Matrix probs = nn::forward(mine.model, validation.features);

        MetricsLog::MinerRow row;
        row.round = rec.round;
        row.miner = id;
        row.val_loss = nn::loss(probs, validation.labels);
        row.val_acc = nn::accuracy(probs, validation.labels);
        row.won = std::find(rec.winners.begin(), rec.winners.end(), id) != rec.winners.end();
        row.points = rec.tally.contains(id) ? rec.tally.at(id) : 0;
        const auto share = rec.rewards.per_winner.find(id);
        row.reward = share != rec.rewards.per_winner.end() ? share->second.reward : 0.0;
        row.pred_time = pred_times.contains(id) ? pred_times.at(id) : -1;
        row.sampled_with_replacement = mine.sampled_with_replacement;
        metrics.add(std::move(row));
    }

    const nn::Matrix global_probs = nn::forward(fin.new_global, validation.features);
    MetricsLog::RoundRow round_row;
    round_row.round = rec.round;
    round_row.winners = rec.winners;
    round_row.block_hash = rec.block_hash;
    round_row.global_val_loss = nn::loss(global_probs, validation.labels);
    round_row.total_balance = ledger.total_balance();
    metrics.add(std::move(round_row));
}

SimResult Simulation::run() {
    cfg.validate();
    prepare_data();
    global = nn::init_model(cfg.arch, Rng::derive(cfg.seed, {}, "global.init"));

    start_round(0, 0);
    try {
        while (!queue.empty()) {
            auto item = queue.pop();
            item.payload(item.time);
        }
    } catch (const RoundAbort& e) {
        aborted = true;
        abort_reason = e.what();
    }

    return SimResult{std::move(ledger),  std::move(metrics), std::move(records),
                     std::move(global),  rounds_completed,   aborted,
                     std::move(abort_reason)};
}

} // namespace

SimResult run_simulation(const SimConfig& config) {
    Simulation simulation(config);
    return simulation.run();
}

} // namespace pocl::sim
