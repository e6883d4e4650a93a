#include "papora/ondisk.hpp"

#include <algorithm>
#include <cstdio>

namespace papora::ondisk {

// ---------------------------------------------------------------------------
// Boot sector

PartitionBootSector decode_boot(ByteSpan sector) {
  if (sector.size() != kBootSize)
    throw DecodeError("boot sector must be exactly 512 bytes, got " +
                      std::to_string(sector.size()));
  PartitionBootSector b;
  std::copy_n(sector.begin(), kBootSize, b.raw.begin());
  std::copy_n(sector.begin(), 3, b.jump.begin());
  std::copy_n(sector.begin() + kBootOemOff, 8, b.oem_id.begin());
  b.bytes_per_sector = rd_u16(sector, kBootBytesPerSectorOff);
  b.sectors_per_cluster_raw = rd_u8(sector, kBootSectorsPerClusterOff);
  b.total_sectors = rd_u64(sector, kBootTotalSectorsOff);
  b.mft_cluster = rd_u64(sector, kBootMftClusterOff);
  b.mft_mirror_cluster = rd_u64(sector, kBootMftMirrorClusterOff);
  b.record_size_raw = int8_t(rd_u8(sector, kBootRecordSizeRawOff));
  b.index_size_raw = int8_t(rd_u8(sector, kBootIndexSizeRawOff));
  b.volume_serial = rd_u64(sector, kBootSerialOff);
  b.end_marker = rd_u16(sector, kBootEndMarkerOff);
  return b;
}

std::array<uint8_t, kBootSize> encode_boot(const PartitionBootSector& b) {
  std::array<uint8_t, kBootSize> out = b.raw;
  MutByteSpan s(out);
  std::copy(b.jump.begin(), b.jump.end(), out.begin());
  std::copy(b.oem_id.begin(), b.oem_id.end(), out.begin() + kBootOemOff);
  wr_u16(s, kBootBytesPerSectorOff, b.bytes_per_sector);
  wr_u8(s, kBootSectorsPerClusterOff, b.sectors_per_cluster_raw);
  wr_u64(s, kBootTotalSectorsOff, b.total_sectors);
  wr_u64(s, kBootMftClusterOff, b.mft_cluster);
  wr_u64(s, kBootMftMirrorClusterOff, b.mft_mirror_cluster);
  wr_u8(s, kBootRecordSizeRawOff, uint8_t(b.record_size_raw));
  wr_u8(s, kBootIndexSizeRawOff, uint8_t(b.index_size_raw));
  wr_u64(s, kBootSerialOff, b.volume_serial);
  wr_u16(s, kBootEndMarkerOff, b.end_marker);
  return out;
}

uint32_t record_size_bytes(int8_t raw, uint32_t cluster_bits) {
  if (raw < 0) return 1u << (uint32_t(-int32_t(raw)) & 31);
  return uint32_t(raw) << (cluster_bits & 31);
}

uint32_t blksize_bits(uint32_t size) {
  uint32_t bits = 8;
  do {
    bits++;
    size >>= 1;
  } while (size > 256);
  return bits;
}

// ---------------------------------------------------------------------------
// USA fixups

bool usa_geometry_valid(UsaGeometry g, size_t struct_size, uint32_t sector_size) {
  if (sector_size == 0 || struct_size == 0) return false;
  if (struct_size % sector_size) return false;
  size_t sectors = struct_size / sector_size;
  if (g.usa_count != sectors + 1) return false;
  if (g.usa_offset < 8) return false;
  // the whole array must live in the first sector, clear of its tail
  if (size_t(g.usa_offset) + 2 * size_t(g.usa_count) > sector_size - 2) return false;
  return true;
}

void usa_protect(MutByteSpan s, UsaGeometry g, uint32_t sector_size) {
  uint16_t usn = rd_u16(s, g.usa_offset);
  for (uint16_t i = 1; i < g.usa_count; i++) {
    size_t tail = size_t(i) * sector_size - 2;
    wr_u16(s, g.usa_offset + 2 * size_t(i), rd_u16(s, tail));
    wr_u16(s, tail, usn);
  }
}

bool usa_restore(MutByteSpan s, UsaGeometry g, uint32_t sector_size) {
  uint16_t usn = rd_u16(s, g.usa_offset);
  for (uint16_t i = 1; i < g.usa_count; i++) {
    size_t tail = size_t(i) * sector_size - 2;
    if (rd_u16(s, tail) != usn) return false;
  }
  for (uint16_t i = 1; i < g.usa_count; i++) {
    size_t tail = size_t(i) * sector_size - 2;
    wr_u16(s, tail, rd_u16(s, g.usa_offset + 2 * size_t(i)));
  }
  return true;
}

// ---------------------------------------------------------------------------
// File records

RecordDecode decode_file_record(ByteSpan bytes, uint32_t record_size, uint32_t sector_size,
                                bool verify_usa) {
  if (bytes.size() != record_size)
    throw DecodeError("record buffer must be exactly record_size bytes");
  RecordDecode out;
  if (record_size < 0x30 || rd_u32(bytes, 0) != kRecordMagic) {
    out.status = RecordStatus::NotARecord;
    return out;
  }
  FileRecord& r = out.record;
  r.raw.assign(bytes.begin(), bytes.end());
  r.magic = kRecordMagic;
  r.usa.usa_offset = rd_u16(bytes, kRecUsaOffsetOff);
  r.usa.usa_count = rd_u16(bytes, kRecUsaCountOff);
  if (verify_usa) {
    if (!usa_geometry_valid(r.usa, record_size, sector_size) ||
        !usa_restore(MutByteSpan(r.raw), r.usa, sector_size)) {
      out.status = RecordStatus::Torn;
      return out;
    }
  }
  ByteSpan raw(r.raw);
  r.sequence = rd_u16(raw, kRecSequenceOff);
  r.hard_links = rd_u16(raw, kRecHardLinksOff);
  r.attrs_offset = rd_u16(raw, kRecAttrsOffsetOff);
  r.flags = rd_u16(raw, kRecFlagsOff);
  r.bytes_used = rd_u32(raw, kRecBytesUsedOff);
  r.bytes_allocated = rd_u32(raw, kRecBytesAllocatedOff);
  r.record_number = rd_u32(raw, kRecNumberOff);
  return out;
}

Bytes encode_file_record(const FileRecord& rec, uint32_t sector_size) {
  Bytes out = rec.raw;
  MutByteSpan s(out);
  wr_u32(s, 0, rec.magic);
  wr_u16(s, kRecUsaOffsetOff, rec.usa.usa_offset);
  wr_u16(s, kRecUsaCountOff, rec.usa.usa_count);
  wr_u16(s, kRecSequenceOff, rec.sequence);
  wr_u16(s, kRecHardLinksOff, rec.hard_links);
  wr_u16(s, kRecAttrsOffsetOff, rec.attrs_offset);
  wr_u16(s, kRecFlagsOff, rec.flags);
  wr_u32(s, kRecBytesUsedOff, rec.bytes_used);
  wr_u32(s, kRecBytesAllocatedOff, rec.bytes_allocated);
  wr_u32(s, kRecNumberOff, rec.record_number);
  if (usa_geometry_valid(rec.usa, out.size(), sector_size)) usa_protect(s, rec.usa, sector_size);
  return out;
}

AttrEnumResult enum_attributes(const FileRecord& rec, Mode mode, CoverageSet* cov) {
  AttrEnumResult res;
  ByteSpan raw(rec.raw);
  const uint32_t alloc = uint32_t(raw.size());
  const uint32_t used = std::min(rec.bytes_used, alloc);
  auto visit = [&](const char* s) {
    if (cov) cov->insert(s);
  };
  auto fired = [&](const char* id, std::string detail) {
    if (cov) cov->insert(std::string("check:") + id + ":fired");
    res.fault = Outcome::validation(id, std::move(detail));
  };

  uint32_t off = rec.attrs_offset;
  while (true) {
    if (off + 8 > used) break;  // chain ran off the end without a terminator
    uint32_t type = rd_u32(raw, off);
    if (type == kAttrEnd) {
      res.saw_terminator = true;
      break;
    }
    uint32_t asize = rd_u32(raw, off + 4);
    uint64_t true_end = uint64_t(off) + asize;
    uint32_t wrapped_end = off + asize;  // 32-bit wrap is the point

    visit("check:enum_attr_overflow");
    if (true_end > used) {
      if (wrapped_end <= used) {
        // the pre-fix kernel accepts the wrapped bound and walks out of the record
        if (mode == Mode::Hardened) {
          fired("enum_attr_overflow", "off+asize wraps past bytes_used");
        } else {
          if (cov) cov->insert("crash:enum_attr_overflow");
          res.fault = Outcome::crash(CrashClass::OOB_Read, "enum_attr_overflow");
        }
        return res;
      }
      break;  // plain oversize: kernel treats the chain as ended
    }
    if (asize < kResidentHdr || (asize & 7)) break;  // impossible layout, chain ends

    Attribute a;
    a.type = type;
    a.size = asize;
    a.rec_off = off;
    a.non_resident = rd_u8(raw, off + 0x08) != 0;
    a.name_len = rd_u8(raw, off + 0x09);
    a.name_off = rd_u16(raw, off + 0x0A);
    a.flags = rd_u16(raw, off + 0x0C);
    a.id = rd_u16(raw, off + 0x0E);
    if (a.non_resident) {
      if (asize < kNonResidentHdr) break;
      a.svcn = rd_u64(raw, off + 0x10);
      a.evcn = rd_u64(raw, off + 0x18);
      a.run_off = rd_u16(raw, off + 0x20);
      a.alloc_size = rd_u64(raw, off + 0x28);
      a.data_size = rd_u64(raw, off + 0x30);
      a.valid_size = rd_u64(raw, off + 0x38);
      visit("check:attr_nonres_bounds");
      if (a.run_off > asize) {
        fired("attr_nonres_bounds", "run list offset past attribute end");
        return res;
      }
    } else {
      a.value_size = rd_u32(raw, off + 0x10);
      a.value_off = rd_u16(raw, off + 0x14);
      visit("check:attr_resident_bounds");
      if (uint64_t(a.value_off) + a.value_size > asize) {
        fired("attr_resident_bounds", "resident value past attribute end");
        return res;
      }
    }

    if (a.name_len) {
      uint64_t name_end = uint64_t(a.name_off) + 2 * uint64_t(a.name_len);
      if (mode == Mode::Hardened) {
        visit("check:attr_name_bound");
        if (name_end > a.payload_off()) {
          fired("attr_name_bound", "attribute name overlaps payload");
          return res;
        }
      } else if (uint64_t(off) + name_end > alloc) {
        // copying this name would run past the record buffer
        if (cov) cov->insert("crash:attr_name_copy");
        res.fault = Outcome::crash(CrashClass::OOB_Write, "attr_name_copy");
        return res;
      }
    }

    if (cov) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "attr:%02x", a.type & 0xFF);
      cov->insert(buf);
    }
    res.attrs.push_back(a);
    off = wrapped_end;
  }
  return res;
}

ByteSpan attr_value(const FileRecord& rec, const Attribute& a) {
  if (a.non_resident) return {};
  uint64_t start = uint64_t(a.rec_off) + a.value_off;
  if (!in_bounds(rec.raw.size(), start, a.value_size)) return {};
  return ByteSpan(rec.raw).subspan(size_t(start), a.value_size);
}

// ---------------------------------------------------------------------------
// Index structures

IndexHdr decode_index_hdr(ByteSpan b, size_t off) {
  IndexHdr h;
  h.entries_off = rd_u32(b, off);
  h.used = rd_u32(b, off + 4);
  h.total = rd_u32(b, off + 8);
  h.flags = rd_u32(b, off + 12);
  return h;
}

IndexBufDecode decode_index_buffer(ByteSpan bytes, uint32_t block_size, uint32_t sector_size,
                                   bool verify_usa) {
  if (bytes.size() != block_size) throw DecodeError("index buffer must be block_size bytes");
  IndexBufDecode out;
  if (block_size < kIndexHdrOff + 16 || rd_u32(bytes, 0) != kIndexMagic) {
    out.status = IndexBufStatus::NotAnIndexBuffer;
    return out;
  }
  IndexBuffer& ib = out.buf;
  ib.raw.assign(bytes.begin(), bytes.end());
  ib.magic = kIndexMagic;
  ib.usa.usa_offset = rd_u16(bytes, 0x04);
  ib.usa.usa_count = rd_u16(bytes, 0x06);
  if (verify_usa) {
    if (!usa_geometry_valid(ib.usa, block_size, sector_size) ||
        !usa_restore(MutByteSpan(ib.raw), ib.usa, sector_size)) {
      out.status = IndexBufStatus::Torn;
      return out;
    }
  }
  ByteSpan raw(ib.raw);
  ib.vbn = rd_u64(raw, 0x10);
  ib.hdr = decode_index_hdr(raw, kIndexHdrOff);
  return out;
}

IndexEntry decode_index_entry(ByteSpan b, size_t off) {
  IndexEntry e;
  e.ref = rd_u64(b, off);
  e.size = rd_u16(b, off + 0x08);
  e.key_len = rd_u16(b, off + 0x0A);
  e.flags = rd_u16(b, off + 0x0C);
  return e;
}

std::optional<FileNameValue> decode_file_name(ByteSpan value) {
  if (value.size() < kFileNameHdr) return std::nullopt;
  FileNameValue f;
  f.parent_ref = rd_u64(value, 0x00);
  f.name_len = rd_u8(value, 0x40);
  f.name_space = rd_u8(value, 0x41);
  if (value.size() < kFileNameHdr + 2 * size_t(f.name_len)) return std::nullopt;
  f.name.reserve(f.name_len);
  for (size_t i = 0; i < f.name_len; i++)
    f.name.push_back(char(value[kFileNameHdr + 2 * i]));
  return f;
}

// ---------------------------------------------------------------------------
// Data runs

std::optional<std::vector<DataRun>> decode_runs(ByteSpan b) {
  std::vector<DataRun> runs;
  int64_t lcn = 0;
  size_t off = 0;
  while (off < b.size()) {
    uint8_t hdr = b[off++];
    if (hdr == 0) return runs;
    size_t len_bytes = hdr & 0xF;
    size_t off_bytes = hdr >> 4;
    if (len_bytes == 0 || len_bytes > 8 || off_bytes > 8) return std::nullopt;
    if (off + len_bytes + off_bytes > b.size()) return std::nullopt;
    uint64_t length = 0;
    for (size_t i = 0; i < len_bytes; i++) length |= uint64_t(b[off + i]) << (8 * i);
    off += len_bytes;
    if (off_bytes == 0) return std::nullopt;  // sparse runs are out of scope
    int64_t delta = 0;
    for (size_t i = 0; i < off_bytes; i++) delta |= int64_t(b[off + i]) << (8 * i);
    // sign-extend
    if (b[off + off_bytes - 1] & 0x80) delta |= -(int64_t(1) << (8 * off_bytes));
    off += off_bytes;
    lcn += delta;
    if (lcn < 0 || length == 0) return std::nullopt;
    runs.push_back({uint64_t(lcn), length});
  }
  return std::nullopt;  // ran out of bytes before the terminator
}

static size_t min_bytes_u(uint64_t v) {
  size_t n = 1;
  while (v >> (8 * n) && n < 8) n++;
  return n;
}

static size_t min_bytes_s(int64_t v) {
  for (size_t n = 1; n < 8; n++) {
    int64_t lo = -(int64_t(1) << (8 * n - 1));
    int64_t hi = (int64_t(1) << (8 * n - 1)) - 1;
    if (v >= lo && v <= hi) return n;
  }
  return 8;
}

Bytes encode_runs(const std::vector<DataRun>& runs) {
  Bytes out;
  int64_t prev = 0;
  for (const auto& r : runs) {
    int64_t delta = int64_t(r.lcn) - prev;
    size_t ln = min_bytes_u(r.length);
    size_t on = min_bytes_s(delta);
    out.push_back(uint8_t(on << 4 | ln));
    for (size_t i = 0; i < ln; i++) out.push_back(uint8_t(r.length >> (8 * i)));
    for (size_t i = 0; i < on; i++) out.push_back(uint8_t(uint64_t(delta) >> (8 * i)));
    prev = int64_t(r.lcn);
  }
  out.push_back(0);
  return out;
}

}  // namespace papora::ondisk
