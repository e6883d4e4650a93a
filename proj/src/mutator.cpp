#include "papora/mutator.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "papora/rng.hpp"

namespace papora::mut {

namespace {

constexpr std::array<const char*, 4> kStrategyNames{"bitflip", "interesting", "arith",
                                                    "overwrite"};

// Widths are 1, 2, or 4 bytes, shrunk until one fits the blob.
uint32_t pick_width(Rng& rng, size_t blob_size) {
  uint32_t w = uint32_t(1) << rng.below(3);
  while (w > blob_size) w >>= 1;
  return w;
}

void store(Bytes& out, uint64_t v, uint32_t width, bool big_endian) {
  for (uint32_t i = 0; i < width; i++) {
    uint32_t shift = 8 * (big_endian ? width - 1 - i : i);
    out.push_back(uint8_t(v >> shift));
  }
}

uint64_t load(const Bytes& b, uint64_t off, uint32_t width, bool big_endian) {
  uint64_t v = 0;
  for (uint32_t i = 0; i < width; i++) {
    uint32_t shift = 8 * (big_endian ? width - 1 - i : i);
    v |= uint64_t(b[size_t(off) + i]) << shift;
  }
  return v;
}

Mutation draw_bitflip(Rng& rng, const Bytes& cur) {
  Mutation m;
  m.strategy = Strategy::BitFlip;
  uint64_t bit = rng.below(uint64_t(cur.size()) * 8);
  m.offset = bit / 8;
  m.width = 1;
  m.operand = {uint8_t(cur[size_t(m.offset)] ^ (1u << (bit % 8)))};
  return m;
}

Mutation draw_interesting(Rng& rng, const Bytes& cur) {
  Mutation m;
  m.strategy = Strategy::Interesting;
  m.width = pick_width(rng, cur.size());
  m.offset = rng.below(cur.size() - m.width + 1);
  uint32_t bits = m.width * 8;
  uint64_t v = 0;
  switch (rng.below(6)) {
    case 0: v = 0; break;
    case 1: v = 1; break;
    case 2: v = ~uint64_t(0); break;                 // -1, also unsigned max
    case 3: v = uint64_t(1) << (bits - 1); break;    // signed min
    case 4: v = (uint64_t(1) << (bits - 1)) - 1; break;  // signed max
    default: v = uint64_t(1) << rng.below(bits); break;  // power of two
  }
  store(m.operand, v, m.width, rng.coin());
  return m;
}

Mutation draw_arith(Rng& rng, const Bytes& cur) {
  Mutation m;
  m.strategy = Strategy::Arith;
  m.width = pick_width(rng, cur.size());
  m.offset = rng.below(cur.size() - m.width + 1);
  uint64_t delta = rng.range(1, 35);
  bool subtract = rng.coin();
  bool big_endian = rng.coin();
  uint64_t mask = (uint64_t(1) << (m.width * 8)) - 1;
  uint64_t v = load(cur, m.offset, m.width, big_endian);
  v = (subtract ? v - delta : v + delta) & mask;
  store(m.operand, v, m.width, big_endian);
  return m;
}

Mutation draw_overwrite(Rng& rng, const Bytes& cur, const MutationConfig& cfg) {
  const std::vector<Bytes>& tokens = cfg.tokens;
  Mutation m;
  m.strategy = Strategy::Overwrite;
  m.offset = rng.below(cur.size());
  uint64_t cap = std::max<uint32_t>(1, cfg.max_overwrite_len);
  uint64_t len = std::min<uint64_t>(rng.range(1, cap), cur.size() - m.offset);
  uint64_t mode = rng.below(tokens.empty() ? 2 : 3);
  if (mode == 2) {
    const Bytes& tok = tokens[rng.below(tokens.size())];
    if (!tok.empty()) {
      len = std::min<uint64_t>(tok.size(), cur.size() - m.offset);
      m.operand.assign(tok.begin(), tok.begin() + std::ptrdiff_t(len));
    } else {
      mode = 1;  // empty token: degrade to a repeated byte
    }
  }
  if (mode == 0) {
    // chunk copied from elsewhere in the working blob, wrapping at the end
    uint64_t src = rng.below(cur.size());
    for (uint64_t i = 0; i < len; i++) m.operand.push_back(cur[size_t((src + i) % cur.size())]);
  } else if (mode == 1) {
    m.operand.assign(size_t(len), rng.byte());
  }
  m.width = uint32_t(m.operand.size());
  return m;
}

}  // namespace

const char* to_string(Strategy s) { return kStrategyNames[size_t(s)]; }

std::pair<Bytes, MutationLog> mutate_blob(ByteSpan blob, const MutationConfig& cfg) {
  if (blob.empty()) throw std::invalid_argument("mutate_blob: empty blob");
  std::vector<uint32_t> weights(cfg.strategy_weights.begin(), cfg.strategy_weights.end());
  uint64_t weight_sum = 0;
  for (uint32_t w : weights) weight_sum += w;
  if (weight_sum == 0) throw std::invalid_argument("mutate_blob: all strategy weights zero");

  Rng rng(cfg.rng_seed);
  Bytes out(blob.begin(), blob.end());
  MutationLog log;
  uint64_t draws =
      cfg.max_mutations_per_round == 0 ? 0 : rng.range(1, cfg.max_mutations_per_round);
  for (uint64_t d = 0; d < draws; d++) {
    Mutation m;
    switch (Strategy(rng.weighted(weights))) {
      case Strategy::BitFlip: m = draw_bitflip(rng, out); break;
      case Strategy::Interesting: m = draw_interesting(rng, out); break;
      case Strategy::Arith: m = draw_arith(rng, out); break;
      case Strategy::Overwrite: m = draw_overwrite(rng, out, cfg); break;
    }
    std::copy(m.operand.begin(), m.operand.end(), out.begin() + std::ptrdiff_t(m.offset));
    log.entries.push_back(std::move(m));
  }
  return {std::move(out), std::move(log)};
}

Bytes replay_log(ByteSpan blob, const MutationLog& log) {
  Bytes out(blob.begin(), blob.end());
  for (const Mutation& m : log.entries) {
    if (m.operand.size() != m.width || m.width == 0 || m.offset > out.size() ||
        m.operand.size() > out.size() - m.offset)
      throw std::invalid_argument("replay_log: entry outside blob bounds");
    std::copy(m.operand.begin(), m.operand.end(), out.begin() + std::ptrdiff_t(m.offset));
  }
  return out;
}

std::string log_to_text(const MutationLog& log) {
  std::string out;
  for (const Mutation& m : log.entries) {
    out += to_string(m.strategy);
    out += ' ';
    out += std::to_string(m.offset);
    out += ' ';
    out += std::to_string(m.width);
    out += ' ';
    out += to_hex(m.operand);
    out += '\n';
  }
  return out;
}

MutationLog log_from_text(const std::string& text) {
  MutationLog log;
  std::istringstream lines(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(lines, line)) {
    lineno++;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, hex;
    uint64_t offset = 0;
    uint32_t width = 0;
    std::string extra;
    if (!(fields >> name >> offset >> width >> hex) || (fields >> extra))
      throw std::invalid_argument("mutation log line " + std::to_string(lineno) + ": bad field count");
    Mutation m;
    bool known = false;
    for (size_t i = 0; i < kStrategyNames.size(); i++) {
      if (name == kStrategyNames[i]) {
        m.strategy = Strategy(i);
        known = true;
        break;
      }
    }
    if (!known)
      throw std::invalid_argument("mutation log line " + std::to_string(lineno) +
                                  ": unknown strategy " + name);
    m.offset = offset;
    m.width = width;
    m.operand = from_hex(hex);
    if (m.operand.size() != m.width || m.width == 0)
      throw std::invalid_argument("mutation log line " + std::to_string(lineno) +
                                  ": width/operand mismatch");
    log.entries.push_back(std::move(m));
  }
  return log;
}

}  // namespace papora::mut
