#pragma once

// Reference reader and syscall executor. Mounts an image, resolves paths
// through the on-disk directory index, executes syscall programs against the
// volume, and classifies every run as ok / validation error / simulated crash.
//
// Both modes share the decode path. Hardened turns each integrity violation
// into a named validation error (the check ids mirror upstream kernel fixes,
// see sites.hpp). Vulnerable suppresses five of those checks and simulates
// the pre-fix behaviour at the corresponding crash sites instead.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "papora/bytes.hpp"
#include "papora/ondisk.hpp"
#include "papora/outcome.hpp"
#include "papora/program.hpp"

namespace papora::target {

struct TargetConfig {
  Mode mode = Mode::Hardened;
  // Mount refuses record sizes above this bound (the MAXIMUM_BYTES_PER_MFT
  // guard); the CLI can override it through PAPORA_MAX_MFT_BYTES.
  uint32_t max_mft_bytes = ondisk::kMaxBytesPerMft;
};

struct MountedVolume {
  ByteSpan image;  // non-owning: the caller keeps the bytes alive
  ondisk::PartitionBootSector boot;
  uint32_t sector_size = 0;
  uint32_t cluster_size = 0;
  uint32_t record_size = 0;
  uint32_t index_block_size = 0;
  uint32_t record_count = 0;
  // In-use records with attribute chains attached; free, unmapped or
  // non-record slots stay empty.
  std::vector<std::optional<ondisk::FileRecord>> records;
};

struct MountResult {
  Outcome outcome;
  std::optional<MountedVolume> volume;  // set when outcome.is_ok()
};

MountResult mount_image(ByteSpan image, const TargetConfig& cfg, CoverageSet* cov = nullptr);

struct RunResult {
  Outcome outcome;
  CoverageSet coverage;
  size_t ops_executed = 0;  // ops attempted, including plain errno failures
  prog::FsStatus status;    // modeled file-system state when the run ended
};

// Mounts, then executes ops in order until one aborts (validation error or
// simulated crash). errno-level failures are recorded in coverage and do not
// stop the run.
RunResult run_case(ByteSpan image, const prog::OpProgram& p, const TargetConfig& cfg);

struct LintFinding {
  std::string check;
  std::string commit;  // upstream fix the check mirrors; empty for baseline checks
  std::string detail;
};

// Hardened mount plus a sweep over directory index structures; reports one
// finding per distinct check id.
std::vector<LintFinding> lint_image(ByteSpan image,
                                    uint32_t max_mft_bytes = ondisk::kMaxBytesPerMft);

}  // namespace papora::target
