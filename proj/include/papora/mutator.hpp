#pragma once
// Byte-level mutation of metadata blobs. Four strategy families: single bit
// flips, interesting boundary constants, small additive nudges, and block
// overwrites (chunk copy / byte repeat / user token). Every mutation is
// length-preserving and logged as the literal bytes written, so replaying a
// log is a plain blit and reproduces the mutant exactly.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "papora/bytes.hpp"

namespace papora::mut {

enum class Strategy : uint8_t {
  BitFlip = 0,      // flip one bit at a random bit offset
  Interesting = 1,  // 0, 1, -1, signed min/max, unsigned max, powers of two
  Arith = 2,        // add/subtract 1..35 at byte/word/dword, wrapping
  Overwrite = 3,    // 1..64 bytes from a random chunk, repeated byte, or token
};

const char* to_string(Strategy s);

struct MutationConfig {
  // Upper bound on draws per round; the round applies 1..max draws.
  // 0 is the identity round: no draws, empty log.
  uint32_t max_mutations_per_round = 4;
  // Weight per strategy, indexed by Strategy. Must have >= 1 positive entry.
  std::array<uint32_t, 4> strategy_weights{1, 1, 1, 1};
  // Optional dictionary for Overwrite; empty tokens fall back to byte repeat.
  std::vector<Bytes> tokens;
  // Cap on chunk/repeat overwrite length; keeps single-round diffs small.
  uint32_t max_overwrite_len = 64;
  uint64_t rng_seed = 0;
};

struct Mutation {
  Strategy strategy = Strategy::BitFlip;
  uint64_t offset = 0;  // first byte written
  uint32_t width = 0;   // bytes written (== operand.size())
  Bytes operand;        // literal bytes written; replay copies these verbatim
};

struct MutationLog {
  std::vector<Mutation> entries;
};

// Applies 1..max_mutations_per_round draws to a copy of blob. Draws are
// applied in sequence to the working copy, so later draws can observe earlier
// ones (chunk copies included). Same blob + config -> identical result.
// Throws std::invalid_argument on an empty blob or all-zero weights.
std::pair<Bytes, MutationLog> mutate_blob(ByteSpan blob, const MutationConfig& cfg);

// Replays entries in order onto a copy of blob. Throws std::invalid_argument
// when an entry falls outside the blob or its operand width disagrees.
Bytes replay_log(ByteSpan blob, const MutationLog& log);

// One line per entry: "<strategy> <offset> <width> <operand_hex>".
std::string log_to_text(const MutationLog& log);
// Inverse of log_to_text; skips blank lines. Throws std::invalid_argument on
// malformed lines (unknown strategy, bad hex, width/operand mismatch).
MutationLog log_from_text(const std::string& text);

}  // namespace papora::mut
