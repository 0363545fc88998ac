#include "pocl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pocl/errors.hpp"
#include "textio.hpp"

namespace pocl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string miner_name(std::size_t index, std::size_t count) {
    std::string num = std::to_string(index + 1);
    const std::size_t width = std::max<std::size_t>(2, std::to_string(count).size());
    while (num.size() < width) num.insert(num.begin(), '0');
    return "m" + num;
}

sim::SimConfig default_config() {
    sim::SimConfig c;
    c.seed = 1;
    c.rounds = 20;
    c.workers = 1;
    for (std::size_t i = 0; i < 10; ++i) {
        c.miners.push_back(sim::MinerSpec{miner_name(i, 10), std::nullopt, 1.0});
    }
    c.round.winners_per_round = 5;
    c.round.model_deadline = 450000;
    c.round.pred_deadline = 14000;
    c.round.vote_deadline = 2000;
    c.round.block_reward = 100.0;
    c.round.test_records_per_miner = 8;
    c.arch = nn::ArchSpec::mlp({8, 16, 4});
    c.hp.learning_rate = 0.1;
    c.hp.epochs = 5;
    c.hp.batch_size = 16;
    c.dataset = sim::DatasetSpec{};
    c.partition.kind = sim::PartitionSpec::Kind::Even;
    c.validation_fraction = 0.2;
    c.holdout_fraction = 0.2;
    c.cost.unit_time = 1.0;
    c.cost.noise_fraction = 0.05;
    c.submitter_rate = 10;
    c.per_miner_tx = 2;
    c.amount_min = 1.0;
    c.amount_max = 50.0;
    c.user_accounts = 8;
    c.initial_balance = 1000.0;
    return c;
}

void make_adversarial(sim::SimConfig& c, const std::vector<MinerId>& ids) {
    for (const MinerId& id : ids) {
        bool found = false;
        for (sim::MinerSpec& m : c.miners) {
            if (m.id == id) {
                m.adversary = agents::AdversarySpec{};
                found = true;
            }
        }
        if (!found) {
            throw ConfigError("adversary id '" + id + "' is not in the roster");
        }
    }
}

// ---- JSON config loading --------------------------------------------------

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

[[noreturn]] void bad_key(const std::string& origin, const std::string& path) {
    throw ConfigError(origin + ": unknown config key '" + path + "'");
}

void check_keys(const json& obj, const std::string& origin, const std::string& path,
                std::initializer_list<const char*> known) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            bad_key(origin, path.empty() ? key : path + "." + key);
        }
    }
}

template <typename T>
void read_field(const json& obj, const std::string& origin, const std::string& path,
                const char* key, T& out) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(origin + ": bad value for '" + path + key + "'");
    }
}

void parse_miners(const json& j, const std::string& origin, sim::SimConfig& c) {
    check_keys(j, origin, "miners", {"count", "adversaries", "compute_factors", "adversary"});
    std::size_t count = c.miners.size();
    read_field(j, origin, "miners.", "count", count);
    if (count == 0) {
        throw ConfigError(origin + ": miners.count must be >= 1");
    }
    c.miners.clear();
    for (std::size_t i = 0; i < count; ++i) {
        c.miners.push_back(sim::MinerSpec{miner_name(i, count), std::nullopt, 1.0});
    }
    std::vector<double> factors;
    read_field(j, origin, "miners.", "compute_factors", factors);
    if (!factors.empty()) {
        if (factors.size() != count) {
            throw ConfigError(origin + ": miners.compute_factors needs one entry per miner");
        }
        for (std::size_t i = 0; i < count; ++i) {
            c.miners[i].compute_factor = factors[i];
        }
    }
    agents::AdversarySpec spec;
    if (j.contains("adversary")) {
        const json& a = j.at("adversary");
        check_keys(a, origin, "miners.adversary",
                   {"zero_weights", "knn_predictor", "knn_k", "reversed_voting"});
        read_field(a, origin, "miners.adversary.", "zero_weights", spec.zero_weights);
        read_field(a, origin, "miners.adversary.", "knn_predictor", spec.knn_predictor);
        read_field(a, origin, "miners.adversary.", "knn_k", spec.knn_k);
        read_field(a, origin, "miners.adversary.", "reversed_voting", spec.reversed_voting);
    }
    std::vector<std::string> adversaries;
    read_field(j, origin, "miners.", "adversaries", adversaries);
    for (const std::string& id : adversaries) {
        bool found = false;
        for (sim::MinerSpec& m : c.miners) {
            if (m.id == id) {
                m.adversary = spec;
                found = true;
            }
        }
        if (!found) {
            throw ConfigError(origin + ": miners.adversaries entry '" + id +
                              "' is not a roster id");
        }
    }
}

sim::SimConfig config_from_json(const json& j, const std::string& origin) {
    sim::SimConfig c = default_config();
    check_keys(j, origin, "",
               {"seed", "rounds", "workers", "miners", "consensus", "model", "dataset",
                "partition", "validation_fraction", "holdout_fraction", "cost", "chain"});
    read_field(j, origin, "", "seed", c.seed);
    read_field(j, origin, "", "rounds", c.rounds);
    read_field(j, origin, "", "workers", c.workers);
    if (j.contains("miners")) {
        parse_miners(j.at("miners"), origin, c);
    }
    if (j.contains("consensus")) {
        const json& s = j.at("consensus");
        check_keys(s, origin, "consensus",
                   {"k", "model_deadline", "pred_deadline", "vote_deadline", "block_reward",
                    "test_records_per_miner"});
        read_field(s, origin, "consensus.", "k", c.round.winners_per_round);
        read_field(s, origin, "consensus.", "model_deadline", c.round.model_deadline);
        read_field(s, origin, "consensus.", "pred_deadline", c.round.pred_deadline);
        read_field(s, origin, "consensus.", "vote_deadline", c.round.vote_deadline);
        read_field(s, origin, "consensus.", "block_reward", c.round.block_reward);
        read_field(s, origin, "consensus.", "test_records_per_miner",
                   c.round.test_records_per_miner);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, origin, "model", {"arch", "learning_rate", "epochs", "batch_size"});
        std::vector<std::size_t> arch;
        read_field(m, origin, "model.", "arch", arch);
        if (!arch.empty()) {
            c.arch = nn::ArchSpec::mlp(arch);
        }
        read_field(m, origin, "model.", "learning_rate", c.hp.learning_rate);
        read_field(m, origin, "model.", "epochs", c.hp.epochs);
        read_field(m, origin, "model.", "batch_size", c.hp.batch_size);
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, origin, "dataset", {"generator", "seed", "n", "dim", "classes", "sigma"});
        read_field(d, origin, "dataset.", "generator", c.dataset.generator);
        read_field(d, origin, "dataset.", "seed", c.dataset.seed);
        read_field(d, origin, "dataset.", "n", c.dataset.n);
        read_field(d, origin, "dataset.", "dim", c.dataset.dim);
        read_field(d, origin, "dataset.", "classes", c.dataset.classes);
        read_field(d, origin, "dataset.", "sigma", c.dataset.sigma);
    }
    if (j.contains("partition")) {
        const json& p = j.at("partition");
        check_keys(p, origin, "partition", {"kind", "ratio", "split", "sizes"});
        std::string kind = "even";
        read_field(p, origin, "partition.", "kind", kind);
        if (kind == "even") {
            c.partition.kind = sim::PartitionSpec::Kind::Even;
        } else if (kind == "skewed") {
            c.partition.kind = sim::PartitionSpec::Kind::Skewed;
            c.partition.ratio = 4.0;
            c.partition.split = c.miners.size() / 2;
        } else if (kind == "custom") {
            c.partition.kind = sim::PartitionSpec::Kind::Custom;
        } else {
            throw ConfigError(origin + ": partition.kind must be even, skewed or custom");
        }
        read_field(p, origin, "partition.", "ratio", c.partition.ratio);
        read_field(p, origin, "partition.", "split", c.partition.split);
        read_field(p, origin, "partition.", "sizes", c.partition.sizes);
    }
    read_field(j, origin, "", "validation_fraction", c.validation_fraction);
    read_field(j, origin, "", "holdout_fraction", c.holdout_fraction);
    if (j.contains("cost")) {
        const json& s = j.at("cost");
        check_keys(s, origin, "cost", {"unit_time", "noise_fraction"});
        read_field(s, origin, "cost.", "unit_time", c.cost.unit_time);
        read_field(s, origin, "cost.", "noise_fraction", c.cost.noise_fraction);
    }
    if (j.contains("chain")) {
        const json& s = j.at("chain");
        check_keys(s, origin, "chain",
                   {"submitter_rate", "per_miner_tx", "amount_min", "amount_max", "user_accounts",
                    "initial_balance"});
        read_field(s, origin, "chain.", "submitter_rate", c.submitter_rate);
        read_field(s, origin, "chain.", "per_miner_tx", c.per_miner_tx);
        read_field(s, origin, "chain.", "amount_min", c.amount_min);
        read_field(s, origin, "chain.", "amount_max", c.amount_max);
        read_field(s, origin, "chain.", "user_accounts", c.user_accounts);
        read_field(s, origin, "chain.", "initial_balance", c.initial_balance);
    }
    return c;
}

sim::SimConfig resolve_config(const std::string& preset, const std::string& config_path) {
    if (!preset.empty() && !config_path.empty()) {
        throw ConfigError("give either a preset or a config file, not both");
    }
    if (!preset.empty()) {
        return preset_config(preset);
    }
    if (!config_path.empty()) {
        return load_config_file(config_path);
    }
    throw ConfigError("no preset or config file given");
}

struct CostSummary {
    double train_mean = 0.0;
    double train_max = 0.0;
    double forward_mean = 0.0;
    double forward_max = 0.0;
    std::size_t miners = 0;
};

// Noiseless per-miner cost statistics for the configured roster.
CostSummary summarize_costs(const sim::SimConfig& config) {
    config.validate();
    const std::size_t m = config.miners.size();
    const std::size_t val_n = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(config.dataset.n)));
    if (val_n == 0 || val_n >= config.dataset.n) {
        throw ConfigError("validation split leaves no data on one side");
    }
    const std::vector<std::size_t> sizes =
        sim::partition_sizes(config.partition, m, config.dataset.n - val_n);

    sim::CostModel noiseless = config.cost;
    noiseless.noise_fraction = 0.0;
    Rng dummy(0);
    const std::size_t h_max = config.arch.max_layer_size();
    const std::size_t n_test =
        (m - 1) * static_cast<std::size_t>(config.round.test_records_per_miner);

    std::vector<sim::MinerSpec> specs = config.miners;
    std::sort(specs.begin(), specs.end(),
              [](const sim::MinerSpec& a, const sim::MinerSpec& b) { return a.id < b.id; });

    CostSummary s;
    s.miners = m;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t holdout = static_cast<std::size_t>(
            std::llround(config.holdout_fraction * static_cast<double>(sizes[i])));
        holdout = std::clamp<std::size_t>(holdout, 1, sizes[i] - 1);
        const std::size_t n_train = sizes[i] - holdout;
        const double train = static_cast<double>(noiseless.train_cost(
            n_train, config.dataset.dim, config.hp.epochs, h_max, specs[i].compute_factor, dummy));
        const double fwd = static_cast<double>(noiseless.forward_cost(
            n_test, config.dataset.dim, h_max, specs[i].compute_factor, dummy));
        s.train_mean += train / static_cast<double>(m);
        s.forward_mean += fwd / static_cast<double>(m);
        s.train_max = std::max(s.train_max, train);
        s.forward_max = std::max(s.forward_max, fwd);
    }
    return s;
}

void write_summary(std::ostream& os, const sim::SimConfig& config, const sim::SimResult& result) {
    if (result.aborted) {
        os << "status aborted " << result.abort_reason << "\n";
    } else {
        os << "status completed\n";
    }
    os << "seed " << config.seed << "\n";
    os << "rounds_completed " << result.rounds_completed << "\n";

    const std::size_t val_n = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(config.dataset.n)));
    std::vector<sim::MinerSpec> specs = config.miners;
    std::sort(specs.begin(), specs.end(),
              [](const sim::MinerSpec& a, const sim::MinerSpec& b) { return a.id < b.id; });
    const std::vector<std::size_t> sizes =
        sim::partition_sizes(config.partition, specs.size(), config.dataset.n - val_n);

    const auto wins = result.metrics.win_counts(0, result.rounds_completed);
    const auto rewards = result.metrics.reward_totals();
    int adversary_wins = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const MinerId& id = specs[i].id;
        const int w = wins.contains(id) ? wins.at(id) : 0;
        const Currency r = rewards.contains(id) ? rewards.at(id) : 0.0;
        os << "miner " << id << " behavior " << (specs[i].adversary ? "adversary" : "honest")
           << " data_records " << sizes[i] << " wins " << w << " reward_total "
           << detail::format_double(r) << "\n";
        if (specs[i].adversary) {
            adversary_wins += w;
        }
    }
    os << "adversary_wins " << adversary_wins << "\n";
    if (!result.metrics.round_rows().empty()) {
        os << "final_global_val_loss "
           << detail::format_double(result.metrics.round_rows().back().global_val_loss) << "\n";
    }
}

} // namespace

std::vector<std::string> preset_names() {
    return {"baseline-even", "fairness", "knn-attack"};
}

sim::SimConfig preset_config(const std::string& name) {
    sim::SimConfig c = default_config();
    if (name == "baseline-even") {
        return c;
    }
    if (name == "fairness") {
        c.partition.kind = sim::PartitionSpec::Kind::Skewed;
        c.partition.ratio = 4.0;
        c.partition.split = 5;
        return c;
    }
    if (name == "knn-attack") {
        c.partition.kind = sim::PartitionSpec::Kind::Skewed;
        c.partition.ratio = 4.0;
        c.partition.split = 5;
        make_adversarial(c, {"m01", "m06"});
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

sim::SimConfig parse_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": JSON syntax error: " + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError(origin + ": config root must be a JSON object");
    }
    return config_from_json(j, origin);
}

sim::SimConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    sim::SimConfig config;
    try {
        config = resolve_config(options.preset, options.config_path);
        if (options.seed) config.seed = *options.seed;
        if (options.workers) config.workers = *options.workers;
        config.validate();
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) {
        err << "cannot create output directory '" << options.out_dir << "': " << ec.message()
            << "\n";
        return kExitConfigError;
    }

    std::optional<sim::SimResult> maybe_result;
    try {
        maybe_result.emplace(sim::run_simulation(config));
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    sim::SimResult& result = *maybe_result;

    auto open = [&](const char* name, std::ofstream& f) {
        f.open(fs::path(options.out_dir) / name, std::ios::binary | std::ios::trunc);
        if (!f) {
            err << "cannot write " << name << " in '" << options.out_dir << "'\n";
            return false;
        }
        return true;
    };

    std::ofstream f;
    if (!open("metrics.csv", f)) return kExitConfigError;
    result.metrics.write_csv(f);
    f.close();

    if (!open("rounds.txt", f)) return kExitConfigError;
    for (const consensus::RoundRecord& rec : result.rounds) {
        consensus::write_round_record(f, rec);
    }
    f.close();

    if (!open("chain.txt", f)) return kExitConfigError;
    chain::write_chain(f, result.ledger.blocks());
    f.close();

    if (!open("summary.txt", f)) return kExitConfigError;
    write_summary(f, config, result);
    f.close();

    if (result.aborted) {
        err << "simulation aborted: " << result.abort_reason << "\n";
        out << "wrote partial results to " << options.out_dir << "\n";
        return kExitSimAborted;
    }
    out << "completed " << result.rounds_completed << " rounds; results in " << options.out_dir
        << "\n";
    return kExitOk;
}

int cmd_calibrate(const CalibrateOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const sim::SimConfig config = resolve_config(options.preset, options.config_path);
        const CostSummary s = summarize_costs(config);
        out << "miners " << s.miners << "\n";
        out << "train_cost mean " << detail::format_double(s.train_mean) << " max "
            << detail::format_double(s.train_max) << "\n";
        out << "forward_cost mean " << detail::format_double(s.forward_mean) << " max "
            << detail::format_double(s.forward_max) << "\n";
        out << "suggested_model_deadline "
            << detail::format_double(s.train_mean * options.safety_factor) << "\n";
        out << "suggested_pred_deadline "
            << detail::format_double(s.forward_mean * options.safety_factor) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_verify(const std::string& chain_path, std::ostream& out, std::ostream& err) {
    std::ifstream in(chain_path, std::ios::binary);
    if (!in) {
        err << "cannot open chain file '" << chain_path << "'\n";
        return kExitConfigError;
    }
    std::vector<chain::Block> blocks;
    try {
        blocks = chain::parse_chain(in);
    } catch (const Error& e) {
        err << "verification failed: " << e.what() << "\n";
        return kExitVerifyFailed;
    }
    if (blocks.empty()) {
        out << "empty chain\n";
        return kExitOk;
    }
    if (const auto failure = chain::verify_blocks(blocks)) {
        err << "verification failed at block height " << failure->height << ": " << failure->reason
            << "\n";
        return kExitVerifyFailed;
    }
    out << "chain verified: " << blocks.size() << " blocks\n";
    return kExitOk;
}

} // namespace pocl::cli
