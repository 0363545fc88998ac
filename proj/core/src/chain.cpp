#include "pocl/chain.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "bytes.hpp"
#include "pocl/errors.hpp"
#include "textio.hpp"

namespace pocl::chain {

namespace {

bool id_ok(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
    }
    return true;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

} // namespace

bool Transaction::well_formed() const {
    return id_ok(id) && id_ok(from) && id_ok(to) && from != to && amount > 0.0 &&
           std::isfinite(amount);
}

std::string compute_block_hash(const Block& block) {
    detail::ByteWriter w;
    w.u64(block.height);
    w.str(block.prev_hash);
    w.u64(block.round);
    w.u64(block.transactions.size());
    for (const Transaction& tx : block.transactions) {
        w.str(tx.id);
        w.str(tx.from);
        w.str(tx.to);
        w.f64(tx.amount);
        w.i64(tx.submitted_at);
    }
    w.u64(block.winner_ids.size());
    for (const MinerId& id : block.winner_ids) {
        w.str(id);
    }
    w.f64(block.rewards.block_reward);
    w.u64(block.rewards.per_winner.size());
    for (const auto& [id, share] : block.rewards.per_winner) {
        w.str(id);
        w.f64(share.contribution);
        w.f64(share.reward);
    }
    return detail::sha256_hex(w.bytes());
}

Ledger::Ledger(std::map<AccountId, Currency> initial_balances)
    : balances_(std::move(initial_balances)) {
    for (const auto& [id, bal] : balances_) {
        if (!id_ok(id) || bal < 0.0) {
            throw ConfigError("bad initial balance entry: '" + id + "'");
        }
    }
}

SubmitResult Ledger::submit_transaction(Transaction tx) {
    if (!tx.well_formed()) {
        return SubmitResult::Malformed;
    }
    if (seen_ids_.contains(tx.id)) {
        return SubmitResult::DuplicateId;
    }
    seen_ids_[tx.id] = true;
    pool_seq_[tx.id] = next_seq_++;
    pool_.push_back(tx.id);
    pending_.emplace(tx.id, std::move(tx));
    return SubmitResult::Accepted;
}

const std::map<MinerId, std::vector<std::string>>&
Ledger::assign_transactions(const std::vector<MinerId>& miner_ids, std::size_t per_miner) {
    assignments_.clear();
    std::vector<MinerId> order = miner_ids;
    std::sort(order.begin(), order.end());
    for (const MinerId& miner : order) {
        std::vector<std::string>& slice = assignments_[miner];
        while (slice.size() < per_miner && !pool_.empty()) {
            slice.push_back(pool_.front());
            pool_.pop_front();
        }
    }
    return assignments_;
}

const Block& Ledger::commit_block(std::uint64_t round, const std::vector<MinerId>& winner_ids,
                                  const fl::RewardReport& rewards) {
    if (rewards.per_winner.size() != winner_ids.size()) {
        throw ConsistencyError("reward report winner set does not match winner list");
    }
    for (const MinerId& w : winner_ids) {
        if (!rewards.per_winner.contains(w)) {
            throw ConsistencyError("no reward entry for winner " + w);
        }
        if (!assignments_.contains(w)) {
            throw ConsistencyError("winner " + w + " had no transaction assignment this round");
        }
    }

    Block block;
    block.height = blocks_.size();
    block.prev_hash = blocks_.empty() ? std::string(kGenesisPrevHash) : blocks_.back().block_hash;
    block.round = round;
    block.winner_ids = winner_ids;
    block.rewards = rewards;

    // Winners' transactions apply sequentially in ascending winner id;
    // transfers the sender cannot cover at that point are dropped.
    std::vector<MinerId> winners_sorted = winner_ids;
    std::sort(winners_sorted.begin(), winners_sorted.end());
    for (const MinerId& w : winners_sorted) {
        for (const std::string& tx_id : assignments_[w]) {
            Transaction tx = pending_.at(tx_id);
            pending_.erase(tx_id);
            if (balances_[tx.from] >= tx.amount) {
                balances_[tx.from] -= tx.amount;
                balances_[tx.to] += tx.amount;
                block.transactions.push_back(std::move(tx));
            }
            // else: dropped for insufficient funds
        }
        assignments_[w].clear();
    }

    // Reward issuance is minting: credited in this block.
    for (const auto& [id, share] : rewards.per_winner) {
        balances_[id] += share.reward;
    }

    // Losers' assignments return to the pool front in original FIFO order.
    std::vector<std::string> returned;
    for (auto& [miner, slice] : assignments_) {
        for (std::string& tx_id : slice) {
            returned.push_back(std::move(tx_id));
        }
        slice.clear();
    }
    std::sort(returned.begin(), returned.end(), [this](const std::string& a, const std::string& b) {
        return pool_seq_.at(a) < pool_seq_.at(b);
    });
    for (auto it = returned.rbegin(); it != returned.rend(); ++it) {
        pool_.push_front(std::move(*it));
    }
    assignments_.clear();

    block.block_hash = compute_block_hash(block);
    blocks_.push_back(std::move(block));
    return blocks_.back();
}

bool Ledger::verify_chain() const {
    return !verify_blocks(blocks_).has_value();
}

Currency Ledger::total_balance() const {
    Currency total = 0.0;
    for (const auto& [id, bal] : balances_) {
        total += bal;
    }
    return total;
}

std::vector<std::string> Ledger::pool_ids() const {
    return std::vector<std::string>(pool_.begin(), pool_.end());
}

std::optional<VerifyFailure> verify_blocks(std::span<const Block> blocks) {
    std::string expected_prev(kGenesisPrevHash);
    for (const Block& b : blocks) {
        if (b.prev_hash != expected_prev) {
            return VerifyFailure{b.height, "prev_hash does not match preceding block"};
        }
        if (compute_block_hash(b) != b.block_hash) {
            return VerifyFailure{b.height, "block_hash does not recompute"};
        }
        expected_prev = b.block_hash;
    }
    return std::nullopt;
}

void write_chain(std::ostream& os, std::span<const Block> blocks) {
    os << "POCL-CHAIN v1\n";
    for (const Block& b : blocks) {
        os << "block " << b.height << "\n";
        os << "prev " << b.prev_hash << "\n";
        os << "round " << b.round << "\n";
        os << "winners";
        for (const MinerId& id : b.winner_ids) {
            os << " " << id;
        }
        os << "\n";
        os << "reward_total " << detail::format_double(b.rewards.block_reward) << "\n";
        for (const auto& [id, share] : b.rewards.per_winner) {
            os << "winner " << id << " " << detail::format_double(share.contribution) << " "
               << detail::format_double(share.reward) << "\n";
        }
        for (const Transaction& tx : b.transactions) {
            os << "tx " << tx.id << " " << tx.from << " " << tx.to << " "
               << detail::format_double(tx.amount) << " " << tx.submitted_at << "\n";
        }
        os << "hash " << b.block_hash << "\n";
        os << "end\n";
    }
}

std::vector<Block> parse_chain(std::istream& is) {
    std::vector<Block> blocks;
    std::string line;
    std::size_t lineno = 0;

    auto fail = [&](const std::string& why) -> void {
        throw ParseError("chain dump line " + std::to_string(lineno) + ": " + why);
    };

    if (!std::getline(is, line)) {
        return blocks; // empty file == empty chain
    }
    ++lineno;
    if (line != "POCL-CHAIN v1") {
        fail("missing POCL-CHAIN v1 header");
    }

    std::optional<Block> cur;
    bool saw_hash = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tok = split_ws(line);
        const std::string_view kind = tok.front();
        if (kind == "block") {
            if (cur) fail("unterminated block");
            if (tok.size() != 2) fail("block line needs a height");
            cur.emplace();
            cur->height = detail::parse_u64(tok[1]);
            saw_hash = false;
        } else if (!cur) {
            fail("field outside a block");
        } else if (kind == "prev") {
            if (tok.size() != 2) fail("prev line needs a digest");
            cur->prev_hash = std::string(tok[1]);
        } else if (kind == "round") {
            if (tok.size() != 2) fail("round line needs an index");
            cur->round = detail::parse_u64(tok[1]);
        } else if (kind == "winners") {
            for (std::size_t i = 1; i < tok.size(); ++i) {
                cur->winner_ids.emplace_back(tok[i]);
            }
        } else if (kind == "reward_total") {
            if (tok.size() != 2) fail("reward_total line needs a value");
            cur->rewards.block_reward = detail::parse_double(tok[1]);
        } else if (kind == "winner") {
            if (tok.size() != 4) fail("winner line needs id, contribution, reward");
            fl::RewardShare share;
            share.contribution = detail::parse_double(tok[2]);
            share.reward = detail::parse_double(tok[3]);
            cur->rewards.per_winner.emplace(std::string(tok[1]), share);
        } else if (kind == "tx") {
            if (tok.size() != 6) fail("tx line needs id, from, to, amount, time");
            Transaction tx;
            tx.id = std::string(tok[1]);
            tx.from = std::string(tok[2]);
            tx.to = std::string(tok[3]);
            tx.amount = detail::parse_double(tok[4]);
            tx.submitted_at = detail::parse_i64(tok[5]);
            cur->transactions.push_back(std::move(tx));
        } else if (kind == "hash") {
            if (tok.size() != 2) fail("hash line needs a digest");
            cur->block_hash = std::string(tok[1]);
            saw_hash = true;
        } else if (kind == "end") {
            if (!saw_hash) fail("block ended without a hash");
            blocks.push_back(std::move(*cur));
            cur.reset();
        } else {
            fail("unknown field '" + std::string(kind) + "'");
        }
    }
    if (cur) {
        throw ParseError("chain dump: unterminated final block");
    }
    return blocks;
}

} // namespace pocl::chain
