#pragma once

// Structure-aware corpus: the parsed metadata extents of an image (boot
// sector, in-use MFT records, index buffers reachable from the root index
// allocation), a syscall program, and the file-system status snapshot.
//
// Container layout (little-endian), file extension .ppra:
//   "PPRA" u16 version      and then five length-prefixed sections:
//   u64 len + extent table  (u32 count, then per extent u64 image_offset,
//                            u32 length, u8 kind)
//   u64 len + metadata blob (extent bytes concatenated in table order)
//   u64 len + program text
//   u64 len + status text
//   u64 len + base image path (reference only, never embedded; resolved
//                              relative to the .ppra file when not absolute)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "papora/bytes.hpp"
#include "papora/ondisk.hpp"
#include "papora/program.hpp"

namespace papora::corpus {

enum class ExtentKind : uint8_t { Boot = 0, MftRecord = 1, IndexBuffer = 2 };

const char* to_string(ExtentKind k);

struct Extent {
  uint64_t image_offset = 0;
  uint32_t length = 0;
  ExtentKind kind = ExtentKind::Boot;

  bool operator==(const Extent&) const = default;
};

struct Corpus {
  std::vector<Extent> extents;  // sorted by image_offset, non-overlapping
  Bytes metadata;               // concatenated extent bytes, same order
  prog::OpProgram program;
  prog::FsStatus status;
  std::string base_image;  // path of the image this corpus was extracted from
};

struct CorpusError : std::runtime_error {
  CorpusError(std::string stage_, const std::string& what)
      : std::runtime_error(stage_ + ": " + what), stage(std::move(stage_)) {}
  std::string stage;
};

// ---------------------------------------------------------------------------
// Non-resident stream mapping (shared with the reference reader)

struct StreamSeg {
  uint64_t image_off = 0;
  uint64_t length = 0;
};

// Contiguous image offset of [stream_off, stream_off+len), or nullopt when the
// range straddles segments or runs past the stream.
std::optional<uint64_t> stream_to_image(const std::vector<StreamSeg>& segs, uint64_t stream_off,
                                        uint64_t len);

// Segments for a non-resident attribute, clipped to the image and to the
// attribute's data size. Undecodable run lists yield an empty mapping.
std::vector<StreamSeg> attr_stream_segs(ByteSpan image, const ondisk::FileRecord& rec,
                                        const ondisk::Attribute& a, uint64_t cluster);

// Offset of extent idx inside the metadata blob (extents are concatenated).
size_t extent_blob_offset(const std::vector<Extent>& extents, size_t idx);

// Maps a blob offset back to (extent index, image offset); nullopt past end.
std::optional<std::pair<size_t, uint64_t>> blob_to_image(const std::vector<Extent>& extents,
                                                         size_t blob_off);

// ---------------------------------------------------------------------------
// Extraction

// Pre: image starts with a decodable boot sector carrying the end marker and
// the MFT is locatable through record 0's unnamed data attribute. Throws
// CorpusError otherwise. Bytes land in the blob verbatim (fixups applied on
// disk stay applied).
Corpus extract_corpus(ByteSpan image);

// Roster derived from decoded records: status entries for every in-use
// non-system record whose name chain resolves to the root, plus "/" itself.
struct Roster {
  prog::FsStatus status;
  std::vector<std::pair<std::string, uint32_t>> path_to_record;  // sorted by path
};
Roster build_roster(const std::vector<std::optional<ondisk::FileRecord>>& records);

prog::FsStatus status_from_image(ByteSpan image);

// Status text: one entry per line, "kind path [fd=N]... [xattr=a,b]".
std::string status_to_text(const prog::FsStatus& s);
prog::FsStatus status_from_text(const std::string& text);

// ---------------------------------------------------------------------------
// Assembly and fixups

struct FixupNote {
  uint64_t image_offset;
  std::string what;
};
using FixupLog = std::vector<FixupNote>;

struct FixupOptions {
  bool increment_usn = false;  // bump the USN before restamping (off: unchanged
                               // structures stay byte-identical)
};

// Normalizes one protected multi-sector structure in place: every sector tail
// that does not already read as the USN is saved into its array slot, then
// overwritten with the USN. Idempotent. Returns false (untouched) when the
// update-sequence geometry is invalid for struct_size/sector_size.
bool fix_structure(MutByteSpan st, uint32_t sector_size, FixupOptions opt = {});

// Walks the image from the boot sector (trusted geometry): restores the oem id
// and end marker, then normalizes every FILE record slice of the MFT and
// mirror and every index buffer reachable from the root. Structures whose
// geometry no longer parses are skipped and logged.
FixupLog apply_fixups(MutByteSpan image, FixupOptions opt = {});

// Extent-driven variant used by assembly: touches bytes inside the given
// extents only. Sector size is derived from each structure's own update
// sequence header (length / (usa_count - 1)), so boot mutations cannot push
// writes outside the extents.
FixupLog apply_fixups_extents(MutByteSpan image, const std::vector<Extent>& extents,
                              FixupOptions opt = {});

// Copies base, splices the corpus metadata into its extents, and runs the
// extent-driven fixups. Bytes outside the extents are never modified. Throws
// std::invalid_argument when extents fall outside base or the blob length
// does not match the extent table.
Bytes assemble_image(ByteSpan base, const Corpus& c, FixupOptions opt = {},
                     FixupLog* log = nullptr);

// Checks exactly the invariants the fixups establish: oem id and end marker
// on boot extents, tails == USN on every record/index extent whose geometry
// parses (invalid geometry is exempt, mirroring the fixup skip rule).
std::vector<FixupNote> verify_fixups(ByteSpan image, const std::vector<Extent>& extents);

// ---------------------------------------------------------------------------
// Container IO

Bytes save(const Corpus& c);
Corpus load(ByteSpan raw);
void save_file(const Corpus& c, const std::filesystem::path& path);
Corpus load_file(const std::filesystem::path& path);

}  // namespace papora::corpus
