#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pocl/fl.hpp"
#include "pocl/types.hpp"

namespace pocl::chain {

/// 64 hex zeros; the prev_hash of the genesis block.
inline constexpr std::string_view kGenesisPrevHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

struct Transaction {
    std::string id;
    AccountId from;
    AccountId to;
    Currency amount = 0.0;
    Tick submitted_at = 0;

    /// amount > 0, from != to, ids non-empty and whitespace-free.
    bool well_formed() const;
};

struct Block {
    std::uint64_t height = 0;
    std::string prev_hash;
    std::vector<Transaction> transactions;
    std::uint64_t round = 0;
    std::vector<MinerId> winner_ids; // selection order
    fl::RewardReport rewards;
    std::string block_hash;
};

/// SHA-256 over the block's canonical bytes (everything except block_hash).
std::string compute_block_hash(const Block& block);

enum class SubmitResult {
    Accepted,
    DuplicateId,
    Malformed,
};

/// In-memory account/balance ledger with a FIFO transaction pool and a
/// hash-chained block list. Single-writer: all mutation happens on the
/// simulation thread.
class Ledger {
public:
    explicit Ledger(std::map<AccountId, Currency> initial_balances);

    /// Appends to the pool. Duplicate ids and malformed transactions are
    /// rejected; validity against balances is re-checked at commit time.
    SubmitResult submit_transaction(Transaction tx);

    /// Deterministic FIFO slicing of the pool: miners taken in ascending id
    /// order, `per_miner` transactions each, until the pool runs dry. Every
    /// listed miner gets an entry (possibly empty). Replaces the previous
    /// round's assignments.
    const std::map<MinerId, std::vector<std::string>>&
    assign_transactions(const std::vector<MinerId>& miner_ids, std::size_t per_miner);

    /// Applies winners' assigned transactions (ascending winner id,
    /// assignment order within a winner), dropping any transfer whose sender
    /// cannot cover it at application time. Credits each winner's reward as
    /// newly minted currency, appends the block, and returns losers'
    /// assigned transactions to the pool front in their original order.
    const Block& commit_block(std::uint64_t round, const std::vector<MinerId>& winner_ids,
                              const fl::RewardReport& rewards);

    /// True iff every block's hash and prev link recompute correctly.
    bool verify_chain() const;

    const std::vector<Block>& blocks() const { return blocks_; }
    const std::map<AccountId, Currency>& balances() const { return balances_; }
    Currency total_balance() const;
    const std::map<MinerId, std::vector<std::string>>& assignments() const { return assignments_; }

    std::size_t pool_size() const { return pool_.size(); }
    std::vector<std::string> pool_ids() const;

private:
    std::map<AccountId, Currency> balances_;
    std::vector<Block> blocks_;
    std::deque<std::string> pool_; // tx ids, FIFO by submission (or re-queue) order
    std::map<std::string, Transaction> pending_;
    std::map<std::string, std::uint64_t> pool_seq_; // original submission order
    std::map<MinerId, std::vector<std::string>> assignments_;
    std::uint64_t next_seq_ = 0;
    std::map<std::string, bool> seen_ids_; // every id ever submitted
};

/// Line-oriented chain dump (see README for the grammar). Doubles are
/// written in shortest round-trip form, so parse_chain + compute_block_hash
/// reproduce the original hashes exactly.
void write_chain(std::ostream& os, std::span<const Block> blocks);

/// Parses a dump produced by write_chain. Throws ParseError (with a line
/// number) on malformed input.
std::vector<Block> parse_chain(std::istream& is);

struct VerifyFailure {
    std::uint64_t height = 0;
    std::string reason;
};

/// Recomputes every hash and prev link; nullopt means the chain is intact.
std::optional<VerifyFailure> verify_blocks(std::span<const Block> blocks);

} // namespace pocl::chain
