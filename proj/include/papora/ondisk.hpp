#pragma once

// On-disk NTFS structures: partition boot sector, MFT file records, attribute
// chains, index headers and INDX buffers, update sequence array fixups.
// Decoding is bit-exact and does no semantic validation; integrity policy
// lives in the reference reader. Encoding preserves unmodeled bytes from the
// original raw template, so decode+encode round-trips byte-identically.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "papora/bytes.hpp"
#include "papora/outcome.hpp"

namespace papora::ondisk {

constexpr size_t kBootSize = 512;
constexpr uint32_t kSectorSize = 512;  // minimum sector, lower bound for record sizes
constexpr uint16_t kBootEndMarker = 0xAA55;
constexpr uint32_t kMaxBytesPerMft = 4096;
constexpr uint32_t kRecordMagic = 0x454C4946;  // "FILE"
constexpr uint32_t kIndexMagic = 0x58444E49;   // "INDX"
constexpr uint32_t kAttrEnd = 0xFFFFFFFF;
constexpr size_t kResidentHdr = 0x18;
constexpr size_t kNonResidentHdr = 0x40;
constexpr size_t kIndexHdrOff = 0x18;  // INDEX_HDR offset inside an INDX buffer

// Attribute type codes.
enum AttrType : uint32_t {
  kAttrStdInfo = 0x10,
  kAttrAttrList = 0x20,
  kAttrFileName = 0x30,
  kAttrObjId = 0x40,
  kAttrSecurity = 0x50,
  kAttrVolLabel = 0x60,
  kAttrVolInfo = 0x70,
  kAttrData = 0x80,
  kAttrIndexRoot = 0x90,
  kAttrIndexAlloc = 0xA0,
  kAttrBitmap = 0xB0,
  kAttrReparse = 0xC0,
  kAttrEa = 0xE0,
};

// Reserved MFT record numbers.
enum : uint32_t {
  kRecMft = 0,
  kRecMirror = 1,
  kRecLog = 2,
  kRecVolume = 3,
  kRecAttrDef = 4,
  kRecRoot = 5,
  kRecBitmap = 6,
  kRecBoot = 7,
  kRecBadClust = 8,
  kRecSecure = 9,
  kRecUpcase = 10,
  kRecExtend = 11,
  kRecReservedEnd = 16,  // first non-system record number
};

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Partition boot sector

struct PartitionBootSector {
  std::array<uint8_t, 3> jump{};
  std::array<uint8_t, 8> oem_id{};
  uint16_t bytes_per_sector = 0;
  uint8_t sectors_per_cluster_raw = 0;  // encoded: <=0x80 literal, else 1<<(256-n)
  uint64_t total_sectors = 0;
  uint64_t mft_cluster = 0;
  uint64_t mft_mirror_cluster = 0;
  int8_t record_size_raw = 0;
  int8_t index_size_raw = 0;
  uint64_t volume_serial = 0;
  uint16_t end_marker = 0;

  // Full original sector; encode_boot uses it as the template for every byte
  // this struct does not model.
  std::array<uint8_t, kBootSize> raw{};

  // Decoded sectors-per-cluster; 0 when the encoding is invalid.
  uint32_t sectors_per_cluster() const {
    uint8_t n = sectors_per_cluster_raw;
    if (n == 0) return 0;
    if (n <= 0x80) return n;
    unsigned shift = 256u - n;
    return shift < 32 ? (1u << shift) : 0;
  }
};

// Field offsets within the boot sector (shared with the mutators' notion of
// "interesting" metadata and with forge).
enum BootOff : size_t {
  kBootOemOff = 0x03,
  kBootBytesPerSectorOff = 0x0B,
  kBootSectorsPerClusterOff = 0x0D,
  kBootTotalSectorsOff = 0x28,
  kBootMftClusterOff = 0x30,
  kBootMftMirrorClusterOff = 0x38,
  kBootRecordSizeRawOff = 0x40,
  kBootIndexSizeRawOff = 0x44,
  kBootSerialOff = 0x48,
  kBootEndMarkerOff = 0x1FE,
};

// Throws DecodeError unless input is exactly 512 bytes. Performs no
// validation beyond length; integrity checks are the reader's job.
PartitionBootSector decode_boot(ByteSpan sector);

// Re-encodes modeled fields over the raw template carried in `b`.
std::array<uint8_t, kBootSize> encode_boot(const PartitionBootSector& b);

// Record size in bytes from the signed raw encoding. Negative raw means
// 1 << -raw; non-negative means raw << cluster_bits. Arithmetic wraps in
// 32 bits and shift counts are masked to 5 bits, matching the emulated
// kernel's behaviour on hostile values.
uint32_t record_size_bytes(int8_t raw, uint32_t cluster_bits);

// Block-size-to-bits helper used for cluster and record shifts. For sizes
// <= 512 the floor value 9 comes out, which is what the record-shift NPD
// emulation keys on.
uint32_t blksize_bits(uint32_t size);

// ---------------------------------------------------------------------------
// Update sequence array (torn-write protection)

struct UsaGeometry {
  uint16_t usa_offset = 0;
  uint16_t usa_count = 0;  // 1 + number of sectors covered
};

// A structure's USA geometry is usable iff the array fits in the first sector
// and covers exactly size/sector_size sectors.
bool usa_geometry_valid(UsaGeometry g, size_t struct_size, uint32_t sector_size);

// Protect: save each sector's trailing u16 into its USA slot, then stamp the
// sequence number (slot 0) over the tails. Restore is the inverse. Both
// require valid geometry. protect(restore(x)) == x.
void usa_protect(MutByteSpan s, UsaGeometry g, uint32_t sector_size);
// Returns false (leaving `s` untouched) when any tail differs from the
// sequence number, i.e. the structure is torn.
bool usa_restore(MutByteSpan s, UsaGeometry g, uint32_t sector_size);

// ---------------------------------------------------------------------------
// File records and attributes

struct Attribute {
  uint32_t type = 0;
  uint32_t size = 0;  // whole attribute record length
  bool non_resident = false;
  uint8_t name_len = 0;   // UTF-16 units
  uint16_t name_off = 0;  // from attribute start
  uint16_t flags = 0;
  uint16_t id = 0;
  uint32_t rec_off = 0;  // attribute start within the record

  // resident form
  uint32_t value_size = 0;
  uint16_t value_off = 0;

  // non-resident form
  uint64_t svcn = 0;
  uint64_t evcn = 0;
  uint16_t run_off = 0;
  uint64_t alloc_size = 0;
  uint64_t data_size = 0;
  uint64_t valid_size = 0;

  uint16_t payload_off() const { return non_resident ? run_off : value_off; }
};

struct FileRecord {
  uint32_t magic = 0;
  UsaGeometry usa;
  uint16_t sequence = 0;
  uint16_t hard_links = 0;
  uint16_t attrs_offset = 0;
  uint16_t flags = 0;
  uint32_t bytes_used = 0;
  uint32_t bytes_allocated = 0;
  uint32_t record_number = 0;  // from the header mirror field, not position
  std::vector<Attribute> attributes;  // filled by enum_attributes on demand

  // Record bytes with USA fixups restored (true sector tails in place).
  Bytes raw;

  bool in_use() const { return flags & 0x1; }
  bool is_directory() const { return flags & 0x2; }
};

// Record header field offsets.
enum RecordOff : size_t {
  kRecUsaOffsetOff = 0x04,
  kRecUsaCountOff = 0x06,
  kRecSequenceOff = 0x10,
  kRecHardLinksOff = 0x12,
  kRecAttrsOffsetOff = 0x14,
  kRecFlagsOff = 0x16,
  kRecBytesUsedOff = 0x18,
  kRecBytesAllocatedOff = 0x1C,
  kRecNumberOff = 0x2C,
};

enum class RecordStatus { Ok, NotARecord, Torn };

struct RecordDecode {
  RecordStatus status = RecordStatus::Ok;
  FileRecord record;  // valid when status == Ok
};

// `bytes` must be exactly record_size long (throws DecodeError otherwise).
// With verify_usa the tails are checked against slot 0 and restored before
// the header is returned; invalid USA geometry also reports Torn.
RecordDecode decode_file_record(ByteSpan bytes, uint32_t record_size, uint32_t sector_size,
                                bool verify_usa);

// Inverse of decode: re-encodes header fields over rec.raw and re-applies USA
// protection so the output matches the on-disk form byte for byte.
Bytes encode_file_record(const FileRecord& rec, uint32_t sector_size);

// Attribute chain walk over a decoded record.
//
// Shared rule in both modes: the walk ends cleanly (kernel returns NULL) on
// the 0xFFFFFFFF terminator, on an attribute that does not fit bytes_used
// without 32-bit wrap, or on asize < 0x18 / misaligned asize.
//
// Hardened adds, per attribute, as validation errors:
//   enum_attr_overflow  off + asize wraps in 32 bits yet passes the bound
//   attr_resident_bounds / attr_nonres_bounds   payload outside the attribute
//   attr_name_bound     name_off + 2*name_len > payload offset
//
// Vulnerable instead simulates the pre-fix kernel:
//   (OOB_Read, enum_attr_overflow)  wrapped off+asize passes the bound while
//                                   the true sum exceeds bytes_used
//   (OOB_Write, attr_name_copy)     claimed name extends past the record
//                                   allocation, so the eventual copy would
//                                   leave the record buffer
struct AttrEnumResult {
  std::vector<Attribute> attrs;
  std::optional<Outcome> fault;  // first violation or simulated crash
  bool saw_terminator = false;
};

AttrEnumResult enum_attributes(const FileRecord& rec, Mode mode, CoverageSet* cov = nullptr);

// Resident attribute value bytes (empty span if out of range).
ByteSpan attr_value(const FileRecord& rec, const Attribute& a);

// ---------------------------------------------------------------------------
// Index structures

struct IndexHdr {
  uint32_t entries_off = 0;  // relative to the header start
  uint32_t used = 0;         // bytes used, relative to the header start
  uint32_t total = 0;
  uint32_t flags = 0;
};

IndexHdr decode_index_hdr(ByteSpan b, size_t off);

struct IndexBuffer {
  uint32_t magic = 0;
  UsaGeometry usa;
  uint64_t vbn = 0;
  IndexHdr hdr;
  Bytes raw;  // fixups restored
};

enum class IndexBufStatus { Ok, NotAnIndexBuffer, Torn };

struct IndexBufDecode {
  IndexBufStatus status = IndexBufStatus::Ok;
  IndexBuffer buf;
};

IndexBufDecode decode_index_buffer(ByteSpan bytes, uint32_t block_size, uint32_t sector_size,
                                   bool verify_usa);

// Index entry header (16 bytes, then the key).
struct IndexEntry {
  uint64_t ref = 0;      // MFT reference: low 48 bits record, high 16 sequence
  uint16_t size = 0;
  uint16_t key_len = 0;
  uint16_t flags = 0;    // 1 = has subnode, 2 = last entry

  bool has_subnode() const { return flags & 0x1; }
  bool is_last() const { return flags & 0x2; }
  uint64_t record() const { return ref & 0xFFFFFFFFFFFFull; }
};

constexpr size_t kIndexEntryHdr = 0x10;
IndexEntry decode_index_entry(ByteSpan b, size_t off);

// FILE_NAME attribute value layout (used both as attribute payload and as
// index entry key).
struct FileNameValue {
  uint64_t parent_ref = 0;
  uint8_t name_len = 0;  // UTF-16 units
  uint8_t name_space = 0;
  std::string name;  // decoded as Latin-1 of the low bytes; toolkit names are ASCII

  uint64_t parent_record() const { return parent_ref & 0xFFFFFFFFFFFFull; }
};

constexpr size_t kFileNameHdr = 0x42;  // name bytes start here

// Returns nullopt when the value is too short for its own name length.
std::optional<FileNameValue> decode_file_name(ByteSpan value);

// ---------------------------------------------------------------------------
// Data runs (plain runs only; sparse/compressed are out of scope)

struct DataRun {
  uint64_t lcn = 0;
  uint64_t length = 0;  // clusters

  bool operator==(const DataRun&) const = default;
};

// Returns nullopt on malformed input, a sparse run, or a negative absolute LCN.
std::optional<std::vector<DataRun>> decode_runs(ByteSpan b);
Bytes encode_runs(const std::vector<DataRun>& runs);

}  // namespace papora::ondisk
