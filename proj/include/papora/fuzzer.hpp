#pragma once
// Campaign orchestration. Seeds are loaded from a directory (raw images,
// .ppra corpora, or case bundles), dry-run once, and extractable ones enter a
// corpus queue. Each round picks the front entry, mutates either its metadata
// blob or its syscall program, reassembles, and runs the case. Coverage
// novelty pushes the mutant to the queue front; each distinct simulated crash
// id (crash class + site) is persisted once as a self-contained repro bundle:
//   <findings>/<class>_<site>/{base.img, corpus.ppra, mutations.log,
//                              program.txt, outcome.txt}

#include <cstdint>
#include <string>
#include <vector>

#include "papora/corpus.hpp"
#include "papora/mutator.hpp"
#include "papora/ondisk.hpp"
#include "papora/outcome.hpp"
#include "papora/program.hpp"

namespace papora::fuzz {

struct CampaignConfig {
  std::string seed_dir;
  std::string findings_dir;  // empty: findings reported but not persisted
  Mode mode = Mode::Vulnerable;
  uint64_t iterations = 10000;   // mutation rounds (seed dry runs are extra)
  uint64_t time_budget_ms = 0;   // 0 = no wall-clock cap
  uint32_t workers = 1;          // worker i draws from rng_seed + i
  mut::MutationConfig mutation;
  double program_ratio = 0.2;  // fraction of rounds that mutate the program
  uint32_t max_mft_bytes = ondisk::kMaxBytesPerMft;
};

struct Finding {
  std::string id;  // "<crash_class>_<site>"
  CrashClass crash_class = CrashClass::NPD;
  std::string site;
  std::string detail;
  uint64_t iteration = 0;     // round that found it; 0 = seed dry run
  std::string bundle_dir;     // empty when findings_dir is empty
  std::string reproduce_cmd;  // recorded in outcome.txt as well
};

struct CampaignReport {
  uint64_t executions = 0;
  double exec_per_sec = 0.0;
  size_t coverage_size = 0;
  uint64_t queue_added = 0;  // corpora queued on strictly-new coverage
  uint64_t harness_violations = 0;  // run_case escapes via HarnessBoundsError
  std::vector<Finding> findings;    // discovery order
};

// Runs the campaign to completion. Throws std::runtime_error when the config
// is unusable (no seeds, workers == 0, program_ratio outside [0,1]).
CampaignReport run_campaign(const CampaignConfig& cfg);

struct ReproResult {
  Outcome outcome;
  std::string expected_id;
  bool match = false;  // outcome_id(outcome) == expected_id
};

// Rebuilds the case from a bundle (replay mutation log onto the corpus
// metadata, reassemble onto base.img, run program.txt in the recorded mode)
// and compares against the recorded finding id. Throws (runtime_error,
// invalid_argument, CorpusError, ParseError) on missing/malformed files.
ReproResult reproduce(const std::string& bundle_dir);

// Canonical id string: "<class>_<site>" for crashes, "validation:<id>" for
// rejections, "ok" otherwise.
std::string outcome_id(const Outcome& o);

}  // namespace papora::fuzz
