#include <set>

#include "doctest.h"
#include "papora/corpus.hpp"
#include "papora/forge.hpp"
#include "papora/mutator.hpp"
#include "papora/rng.hpp"

using namespace papora;

namespace {

Bytes random_blob(uint64_t seed, size_t n) {
  Rng rng(seed);
  Bytes b(n);
  for (auto& v : b) v = rng.byte();
  return b;
}

}  // namespace

TEST_CASE("mutation is deterministic and length-preserving") {
  Bytes blob = random_blob(1, 4096);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 8;
  cfg.rng_seed = 42;
  auto [a, loga] = mut::mutate_blob(blob, cfg);
  auto [b, logb] = mut::mutate_blob(blob, cfg);
  CHECK(a == b);
  CHECK(loga.entries.size() == logb.entries.size());
  CHECK(a.size() == blob.size());
  CHECK(a != blob);  // 8 max draws on 4 KiB: at least one byte moved
  cfg.rng_seed = 43;
  auto [c, logc] = mut::mutate_blob(blob, cfg);
  CHECK(c != a);
}

TEST_CASE("replaying the log reproduces the mutant exactly") {
  for (uint64_t i = 0; i < 1000; i++) {
    Rng pick(i);
    Bytes blob = random_blob(i * 7 + 1, 1 + pick.below(2048));
    mut::MutationConfig cfg;
    cfg.max_mutations_per_round = uint32_t(1 + pick.below(16));
    cfg.rng_seed = i * 31 + 5;
    if (pick.coin()) cfg.tokens = {Bytes{'N', 'T', 'F', 'S'}, Bytes{0xFF, 0xFF}};
    for (auto& w : cfg.strategy_weights) w = uint32_t(pick.below(4));
    if (cfg.strategy_weights == std::array<uint32_t, 4>{0, 0, 0, 0})
      cfg.strategy_weights[pick.below(4)] = 1;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    REQUIRE(mutant.size() == blob.size());
    REQUIRE(mut::replay_log(blob, log) == mutant);
  }
}

TEST_CASE("every strategy family fires under uniform weights") {
  Bytes blob = random_blob(2, 512);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 1;
  std::set<mut::Strategy> seen;
  for (uint64_t round = 0; round < 10000; round++) {
    cfg.rng_seed = round;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    REQUIRE(log.entries.size() == 1);
    seen.insert(log.entries[0].strategy);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("width-1 interesting values cover the boundary set") {
  Bytes blob = random_blob(3, 64);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 1;
  cfg.strategy_weights = {0, 1, 0, 0};
  std::set<uint8_t> seen;
  for (uint64_t round = 0; round < 4000; round++) {
    cfg.rng_seed = round;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    REQUIRE(log.entries[0].strategy == mut::Strategy::Interesting);
    if (log.entries[0].width == 1) seen.insert(log.entries[0].operand[0]);
  }
  // 0, 1, -1/unsigned max, signed min, signed max
  for (uint8_t v : {0x00, 0x01, 0xFF, 0x80, 0x7F}) CHECK(seen.count(v) == 1);
  // powers of two beyond the signed boundaries
  CHECK(seen.count(0x10) == 1);
}

TEST_CASE("arith nudges stay within the drawn width") {
  Bytes blob = random_blob(4, 256);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 1;
  cfg.strategy_weights = {0, 0, 1, 0};
  for (uint64_t round = 0; round < 2000; round++) {
    cfg.rng_seed = round;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    const mut::Mutation& m = log.entries[0];
    REQUIRE(m.strategy == mut::Strategy::Arith);
    REQUIRE((m.width == 1 || m.width == 2 || m.width == 4));
    REQUIRE(m.offset + m.width <= blob.size());
    // bytes outside [offset, offset+width) are untouched
    for (size_t i = 0; i < blob.size(); i++) {
      if (i < m.offset || i >= m.offset + m.width) REQUIRE(mutant[i] == blob[i]);
    }
  }
}

TEST_CASE("overwrite uses tokens when provided") {
  Bytes blob = random_blob(5, 512);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 1;
  cfg.strategy_weights = {0, 0, 0, 1};
  Bytes token{'$', 'M', 'F', 'T', '0', '0'};
  cfg.tokens = {token};
  bool saw_token = false;
  for (uint64_t round = 0; round < 2000 && !saw_token; round++) {
    cfg.rng_seed = round;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    const mut::Mutation& m = log.entries[0];
    REQUIRE(m.width >= 1);
    REQUIRE(m.width <= 64);
    if (m.operand == token) saw_token = true;
  }
  CHECK(saw_token);
}

TEST_CASE("zero max mutations is the identity round") {
  Bytes blob = random_blob(6, 128);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 0;
  auto [mutant, log] = mut::mutate_blob(blob, cfg);
  CHECK(mutant == blob);
  CHECK(log.entries.empty());
}

TEST_CASE("mutation log text round-trips") {
  Bytes blob = random_blob(7, 1024);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 12;
  cfg.rng_seed = 99;
  cfg.tokens = {Bytes{0xAA, 0x55}};
  auto [mutant, log] = mut::mutate_blob(blob, cfg);
  std::string text = mut::log_to_text(log);
  mut::MutationLog parsed = mut::log_from_text(text);
  REQUIRE(parsed.entries.size() == log.entries.size());
  for (size_t i = 0; i < log.entries.size(); i++) {
    CHECK(parsed.entries[i].strategy == log.entries[i].strategy);
    CHECK(parsed.entries[i].offset == log.entries[i].offset);
    CHECK(parsed.entries[i].width == log.entries[i].width);
    CHECK(parsed.entries[i].operand == log.entries[i].operand);
  }
  CHECK(mut::replay_log(blob, parsed) == mutant);
  CHECK(mut::log_to_text(parsed) == text);
}

TEST_CASE("log parser rejects malformed lines") {
  CHECK_THROWS_AS(mut::log_from_text("bitflip 0 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(mut::log_from_text("sprinkle 0 1 ff\n"), std::invalid_argument);
  CHECK_THROWS_AS(mut::log_from_text("bitflip 0 2 ff\n"), std::invalid_argument);
  CHECK_THROWS_AS(mut::log_from_text("bitflip 0 1 zz\n"), std::invalid_argument);
  CHECK_THROWS_AS(mut::log_from_text("bitflip 0 1 ff extra\n"), std::invalid_argument);
  CHECK(mut::log_from_text("\n\n").entries.empty());
}

TEST_CASE("replay rejects out-of-bounds entries") {
  Bytes blob = random_blob(8, 32);
  mut::MutationLog log;
  log.entries.push_back({mut::Strategy::Overwrite, 30, 4, Bytes{1, 2, 3, 4}});
  CHECK_THROWS_AS(mut::replay_log(blob, log), std::invalid_argument);
}

TEST_CASE("mutation log offsets map through the corpus extent map") {
  Bytes img = forge::build_image(forge::ForgeSpec::defaults());
  corpus::Corpus cp = corpus::extract_corpus(img);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 16;
  cfg.rng_seed = 5150;
  auto [blob, log] = mut::mutate_blob(cp.metadata, cfg);
  REQUIRE(!log.entries.empty());
  corpus::Corpus mutated = cp;
  mutated.metadata = blob;
  Bytes out = corpus::assemble_image(img, mutated);
  size_t survived = 0;
  for (const mut::Mutation& m : log.entries) {
    for (uint32_t j = 0; j < m.width; j++) {
      auto loc = corpus::blob_to_image(cp.extents, m.offset + j);
      REQUIRE(loc.has_value());
      if (out[size_t(loc->second)] == m.operand[j]) survived++;
    }
  }
  // fixups may repair some mutated bytes (oem id, end marker, sector tails)
  // but never relocate them
  CHECK(survived > 0);
}

TEST_CASE("mutator rejects empty blobs and zero weights") {
  mut::MutationConfig cfg;
  CHECK_THROWS_AS(mut::mutate_blob(Bytes{}, cfg), std::invalid_argument);
  cfg.strategy_weights = {0, 0, 0, 0};
  Bytes blob{1, 2, 3};
  CHECK_THROWS_AS(mut::mutate_blob(blob, cfg), std::invalid_argument);
}

TEST_CASE("overwrite length honors the configured cap") {
  Bytes blob = random_blob(9, 2048);
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 1;
  cfg.strategy_weights = {0, 0, 0, 1};
  cfg.max_overwrite_len = 5;
  for (uint64_t seed = 0; seed < 500; seed++) {
    cfg.rng_seed = seed;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    REQUIRE(log.entries[0].width <= 5);
  }
}

TEST_CASE("mutations compose with tiny blobs") {
  // widths shrink to fit; a 1-byte blob still mutates and replays
  Bytes blob{0x5A};
  mut::MutationConfig cfg;
  cfg.max_mutations_per_round = 6;
  for (uint64_t seed = 0; seed < 200; seed++) {
    cfg.rng_seed = seed;
    auto [mutant, log] = mut::mutate_blob(blob, cfg);
    REQUIRE(mutant.size() == 1);
    REQUIRE(mut::replay_log(blob, log) == mutant);
  }
}
