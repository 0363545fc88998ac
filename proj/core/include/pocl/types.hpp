#pragma once

#include <cstdint>
#include <string>

namespace pocl {

/// Virtual simulation time, in integer ticks.
using Tick = std::int64_t;

/// Miners and wallet accounts share one identifier space; ordering is
/// lexicographic, so rosters should zero-pad numeric suffixes.
using MinerId = std::string;
using AccountId = std::string;

/// Currency amounts (block rewards, transfers, balances).
using Currency = double;

} // namespace pocl
