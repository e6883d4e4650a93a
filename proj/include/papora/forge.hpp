#pragma once

// Seed-image forge: builds small, fully consistent volumes (boot sector, MFT
// with system records, root index, optional file tree) and derives the five
// crafted regression images, one per emulated kernel bug.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "papora/bytes.hpp"
#include "papora/program.hpp"

namespace papora::forge {

struct TreeEntry {
  std::string path;  // absolute; parents must appear before children
  bool is_dir = false;
  Bytes content;                     // files only; small payloads stay resident
  std::vector<std::string> xattrs;   // extended attribute names
};

struct ForgeSpec {
  uint32_t bytes_per_sector = 512;
  uint32_t sectors_per_cluster = 8;
  uint32_t record_size = 1024;
  uint32_t index_block_size = 4096;
  uint64_t image_size = 4ull << 20;
  std::vector<TreeEntry> tree;

  // One regular file /a and one directory /d: the smallest tree that gives
  // lookups, index entries and a directory to generate into.
  static ForgeSpec defaults();
};

// Throws std::invalid_argument on unbuildable geometry (sizes not encodable
// in the boot sector, tree too large for one index block, image too small).
Bytes build_image(const ForgeSpec& spec);

// Fixed grid of buildable geometries (sector/cluster/record/index-block
// combinations plus tree variants) used by the round-trip suite.
std::vector<ForgeSpec> geometry_sweep();

// ---------------------------------------------------------------------------
// Crafted cases

enum class Case {
  RecordSizeNpd,         // record size below one sector
  AttrSizeWrap,          // attribute size wraps the 32-bit chain bound
  RootIndexNpd,          // root record lost its index root attribute
  AttrNameListOverflow,  // oversized name claims overflow the attr-list scratch
  IndexUsedOverrun,      // index header 'used' beyond the block allocation
};

const char* case_name(Case c);
std::optional<Case> case_from_name(const std::string& name);
std::vector<Case> all_cases();

struct CraftedCase {
  Case which;
  Bytes image;
  prog::OpProgram program;  // empty for mount-time cases
};

// Builds the default image, extracts its corpus, applies the case's specific
// metadata corruption and reassembles, so the crafted image differs from the
// pristine one only inside extraction extents.
CraftedCase craft_case(Case c);

}  // namespace papora::forge
