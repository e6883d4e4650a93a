#include "papora/forge.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <stdexcept>

#include "papora/corpus.hpp"
#include "papora/ondisk.hpp"

namespace papora::forge {
namespace {

constexpr uint64_t kTime = 0x01BC0FFEE1230000ull;  // one fixed timestamp everywhere
constexpr uint64_t kSerial = 0x5EEDF00D0BADC0DEull;
constexpr uint32_t kMftRecords = 64;
constexpr uint32_t kMirrorCopies = 4;  // records mirrored into $MFTMirr
constexpr size_t kResidentMax = 256;   // file content at or below stays resident

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument("forge: " + what); }

// Boot sector size encoding: cluster multiples store the multiplier, smaller
// power-of-two sizes store the negated bit count.
int8_t encode_size_raw(uint32_t size, uint32_t cluster, const char* what) {
  if (size >= cluster) {
    if (size % cluster) bad(std::string(what) + " is not a cluster multiple");
    uint32_t q = size / cluster;
    if (q > 127) bad(std::string(what) + " too large to encode");
    return int8_t(q);
  }
  if (!is_pow2(size)) bad(std::string(what) + " below the cluster size must be a power of two");
  int bits = 0;
  while ((1u << bits) < size) bits++;
  return int8_t(-bits);
}

Bytes utf16(const std::string& s) {
  Bytes b(2 * s.size());
  for (size_t i = 0; i < s.size(); i++) wr_u16(b, 2 * i, uint8_t(s[i]));
  return b;
}

Bytes std_info_value(bool dir) {
  Bytes v(0x30, 0);
  for (size_t off = 0; off <= 0x18; off += 8) wr_u64(v, off, kTime);
  wr_u32(v, 0x20, dir ? 0u : 0x20u);  // FILE_ATTRIBUTE_ARCHIVE on files
  return v;
}

Bytes file_name_value(const std::string& name, uint32_t parent, bool dir, uint64_t alloc,
                      uint64_t real) {
  Bytes v(ondisk::kFileNameHdr + 2 * name.size(), 0);
  wr_u64(v, 0x00, parent | (1ull << 48));
  for (size_t off = 0x08; off <= 0x20; off += 8) wr_u64(v, off, kTime);
  wr_u64(v, 0x28, alloc);
  wr_u64(v, 0x30, real);
  wr_u32(v, 0x38, dir ? 0x10000000u : 0x20u);
  v[0x40] = uint8_t(name.size());
  v[0x41] = 3;  // Win32 + DOS namespace
  wr_bytes(v, 0x42, utf16(name));
  return v;
}

// Packed EA list: u32 next, u8 flags, u8 name_len, u16 value_len, then the
// name, a NUL, and a one-byte value, padded to 4.
Bytes ea_value(const std::vector<std::string>& names) {
  Bytes v;
  for (const std::string& n : names) {
    size_t next = (8 + n.size() + 2 + 3) & ~size_t(3);
    size_t off = v.size();
    v.resize(off + next, 0);
    wr_u32(v, off, uint32_t(next));
    v[off + 5] = uint8_t(n.size());
    wr_u16(v, off + 6, 1);
    std::copy(n.begin(), n.end(), v.begin() + ptrdiff_t(off) + 8);
  }
  return v;
}

Bytes index_entry(uint64_t ref, ByteSpan key, uint16_t flags, std::optional<uint64_t> subnode) {
  size_t size = align8(ondisk::kIndexEntryHdr + key.size()) + (subnode ? 8 : 0);
  Bytes e(size, 0);
  wr_u64(e, 0x00, ref);
  wr_u16(e, 0x08, uint16_t(size));
  wr_u16(e, 0x0A, uint16_t(key.size()));
  wr_u16(e, 0x0C, flags);
  if (!key.empty()) wr_bytes(e, ondisk::kIndexEntryHdr, key);
  if (subnode) wr_u64(e, size - 8, *subnode);
  return e;
}

Bytes end_entry(std::optional<uint64_t> subnode) {
  return index_entry(0, {}, subnode ? uint16_t(3) : uint16_t(2), subnode);
}

// INDEX_ROOT value: 0x10 bytes of root info, INDEX_HDR, then the entries.
Bytes index_root_value(uint32_t ibs, uint8_t per_block, bool large,
                       const std::vector<Bytes>& entries) {
  Bytes v(0x20, 0);
  wr_u32(v, 0x00, ondisk::kAttrFileName);
  wr_u32(v, 0x04, 1);  // filename collation
  wr_u32(v, 0x08, ibs);
  v[0x0C] = per_block;
  for (const Bytes& e : entries) v.insert(v.end(), e.begin(), e.end());
  uint32_t used = uint32_t(v.size() - 0x10);
  wr_u32(v, 0x10, 0x10);  // entries_off, header-relative
  wr_u32(v, 0x14, used);
  wr_u32(v, 0x18, used);
  wr_u32(v, 0x1C, large ? 1u : 0u);
  return v;
}

class RecordBuilder {
 public:
  RecordBuilder(uint32_t record_size, uint32_t sector_size, uint32_t rec_no, bool dir)
      : rs_(record_size), bps_(sector_size), r_(record_size, 0) {
    usa_ = {0x30, uint16_t(record_size / sector_size + 1)};
    wr_u32(r_, 0x00, ondisk::kRecordMagic);
    wr_u16(r_, ondisk::kRecUsaOffsetOff, usa_.usa_offset);
    wr_u16(r_, ondisk::kRecUsaCountOff, usa_.usa_count);
    wr_u16(r_, ondisk::kRecSequenceOff, 1);
    wr_u16(r_, ondisk::kRecHardLinksOff, 1);
    off_ = uint32_t(align8(0x30 + 2u * usa_.usa_count));
    wr_u16(r_, ondisk::kRecAttrsOffsetOff, uint16_t(off_));
    wr_u16(r_, ondisk::kRecFlagsOff, dir ? 0x0003 : 0x0001);
    wr_u32(r_, ondisk::kRecBytesAllocatedOff, record_size);
    wr_u32(r_, ondisk::kRecNumberOff, rec_no);
    wr_u16(r_, usa_.usa_offset, uint16_t(0x0100 + (rec_no & 0xFF)));  // nonzero USN
  }

  void resident(uint32_t type, const std::string& name, ByteSpan value) {
    uint32_t name_off = uint32_t(ondisk::kResidentHdr);
    uint32_t value_off = uint32_t(align8(name_off + 2 * name.size()));
    uint32_t asize = uint32_t(align8(value_off + value.size()));
    uint32_t at = place(asize);
    common_hdr(at, type, asize, false, name, uint16_t(name_off));
    wr_u32(r_, at + 0x10, uint32_t(value.size()));
    wr_u16(r_, at + 0x14, uint16_t(value_off));
    if (!value.empty()) wr_bytes(r_, at + value_off, value);
  }

  void nonresident(uint32_t type, const std::string& name,
                   const std::vector<ondisk::DataRun>& runs, uint64_t alloc, uint64_t data) {
    Bytes rb = ondisk::encode_runs(runs);
    uint32_t name_off = uint32_t(ondisk::kNonResidentHdr);
    uint32_t run_off = uint32_t(align8(name_off + 2 * name.size()));
    uint32_t asize = uint32_t(align8(run_off + rb.size()));
    uint32_t at = place(asize);
    common_hdr(at, type, asize, true, name, uint16_t(name_off));
    uint64_t clusters = 0;
    for (const auto& r : runs) clusters += r.length;
    wr_u64(r_, at + 0x18, clusters ? clusters - 1 : 0);  // evcn; svcn stays 0
    wr_u16(r_, at + 0x20, uint16_t(run_off));
    wr_u64(r_, at + 0x28, alloc);
    wr_u64(r_, at + 0x30, data);
    wr_u64(r_, at + 0x38, data);
    wr_bytes(r_, at + run_off, rb);
  }

  Bytes finish() {
    wr_u32(r_, off_, ondisk::kAttrEnd);
    wr_u32(r_, ondisk::kRecBytesUsedOff, off_ + 8);
    ondisk::usa_protect(r_, usa_, bps_);
    return std::move(r_);
  }

 private:
  uint32_t place(uint32_t asize) {
    if (off_ + asize + 8 > rs_) bad("attributes exceed the record size");
    uint32_t at = off_;
    off_ += asize;
    return at;
  }

  void common_hdr(uint32_t at, uint32_t type, uint32_t asize, bool nonres,
                  const std::string& name, uint16_t name_off) {
    wr_u32(r_, at + 0x00, type);
    wr_u32(r_, at + 0x04, asize);
    r_[at + 0x08] = nonres ? 1 : 0;
    r_[at + 0x09] = uint8_t(name.size());
    wr_u16(r_, at + 0x0A, name_off);
    wr_u16(r_, at + 0x0E, next_id_++);
    if (!name.empty()) wr_bytes(r_, at + name_off, utf16(name));
  }

  uint32_t rs_, bps_;
  Bytes r_;
  ondisk::UsaGeometry usa_;
  uint32_t off_ = 0;
  uint16_t next_id_ = 0;
};

Bytes build_index_block(uint32_t ibs, uint32_t bps, uint64_t vbn,
                        const std::vector<Bytes>& entries, uint16_t usn) {
  Bytes b(ibs, 0);
  ondisk::UsaGeometry usa{0x28, uint16_t(ibs / bps + 1)};
  wr_u32(b, 0x00, ondisk::kIndexMagic);
  wr_u16(b, 0x04, usa.usa_offset);
  wr_u16(b, 0x06, usa.usa_count);
  wr_u64(b, 0x10, vbn);
  uint32_t off = uint32_t(align8(0x28 + 2u * usa.usa_count));
  wr_u32(b, ondisk::kIndexHdrOff + 0x00, off - uint32_t(ondisk::kIndexHdrOff));
  for (const Bytes& e : entries) {
    if (off + e.size() > ibs) bad("index entries exceed the index block size");
    wr_bytes(b, off, e);
    off += uint32_t(e.size());
  }
  wr_u32(b, ondisk::kIndexHdrOff + 0x04, off - uint32_t(ondisk::kIndexHdrOff));
  wr_u32(b, ondisk::kIndexHdrOff + 0x08, ibs - uint32_t(ondisk::kIndexHdrOff));
  wr_u16(b, usa.usa_offset, usn);
  ondisk::usa_protect(b, usa, bps);
  return b;
}

bool name_ok(const std::string& n) {
  if (n.empty() || n.size() > 120 || n == "." || n == "..") return false;
  for (char c : n) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '.' || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

struct Planned {
  const TreeEntry* e = nullptr;
  uint32_t rec = 0;
  uint32_t parent_rec = 0;
  std::string name;
  bool resident = true;
  uint64_t lcn = 0;  // nonresident content location
  uint32_t clusters = 0;
};

}  // namespace

ForgeSpec ForgeSpec::defaults() {
  ForgeSpec s;
  s.tree = {TreeEntry{"/a", false, {}, {}}, TreeEntry{"/d", true, {}, {}}};
  return s;
}

Bytes build_image(const ForgeSpec& spec) {
  const uint32_t bps = spec.bytes_per_sector;
  const uint32_t spc = spec.sectors_per_cluster;
  if (!is_pow2(bps) || bps < 512 || bps > 4096)
    bad("bytes_per_sector must be a power of two in [512, 4096]");
  if (spc == 0 || !is_pow2(spc) || spc > 128)
    bad("sectors_per_cluster must be a power of two in [1, 128]");
  const uint32_t cluster = bps * spc;
  const uint32_t rs = spec.record_size;
  const uint32_t ibs = spec.index_block_size;
  if (rs < ondisk::kSectorSize || rs > ondisk::kMaxBytesPerMft || rs % bps)
    bad("record_size must be a sector multiple in [512, 4096]");
  if (ibs < ondisk::kSectorSize || ibs > (1u << 20) || ibs % bps)
    bad("index_block_size must be a sector multiple in [512, 1 MiB]");
  const int8_t rs_raw = encode_size_raw(rs, cluster, "record_size");
  const int8_t ibs_raw = encode_size_raw(ibs, cluster, "index_block_size");
  if (!ondisk::usa_geometry_valid({0x30, uint16_t(rs / bps + 1)}, rs, bps))
    bad("record update sequence array does not fit the first sector");
  if (!ondisk::usa_geometry_valid({0x28, uint16_t(ibs / bps + 1)}, ibs, bps))
    bad("index update sequence array does not fit the first sector");
  if (spec.image_size % cluster || spec.image_size < (1u << 20))
    bad("image_size must be a cluster multiple of at least 1 MiB");

  // Plan the tree: record numbers in input order, parents before children.
  std::vector<Planned> plan;
  std::map<std::string, uint32_t> dir_rec{{"/", uint32_t(ondisk::kRecRoot)}};
  std::map<std::string, size_t> by_path;
  for (const TreeEntry& e : spec.tree) {
    if (ondisk::kRecReservedEnd + plan.size() >= kMftRecords) bad("tree too large for the MFT");
    const std::string& p = e.path;
    if (p.size() < 2 || p[0] != '/' || p.back() == '/') bad("tree path must be absolute: " + p);
    size_t slash = p.rfind('/');
    std::string parent = slash == 0 ? "/" : p.substr(0, slash);
    Planned pl;
    pl.name = p.substr(slash + 1);
    if (!name_ok(pl.name)) bad("unusable component name in " + p);
    if (by_path.count(p)) bad("duplicate tree path " + p);
    auto it = dir_rec.find(parent);
    if (it == dir_rec.end()) bad("parent of " + p + " is not an earlier directory");
    if (e.is_dir && !e.content.empty()) bad("directory with content: " + p);
    if (e.content.size() > (1u << 20)) bad("content too large: " + p);
    if (e.xattrs.size() > 8) bad("too many xattrs: " + p);
    for (const std::string& x : e.xattrs)
      if (!name_ok(x)) bad("unusable xattr name on " + p);
    pl.e = &e;
    pl.rec = uint32_t(ondisk::kRecReservedEnd + plan.size());
    pl.parent_rec = it->second;
    if (e.is_dir) dir_rec[p] = pl.rec;
    by_path[p] = plan.size();
    plan.push_back(std::move(pl));
  }

  // Children per directory, name-sorted for deterministic indexes.
  std::vector<size_t> root_children;
  std::vector<std::vector<size_t>> kids(plan.size());
  for (size_t i = 0; i < plan.size(); i++) {
    if (plan[i].parent_rec == ondisk::kRecRoot)
      root_children.push_back(i);
    else
      kids[plan[i].parent_rec - ondisk::kRecReservedEnd].push_back(i);
  }
  auto by_name = [&](size_t a, size_t b) { return plan[a].name < plan[b].name; };
  std::sort(root_children.begin(), root_children.end(), by_name);
  for (auto& k : kids) std::sort(k.begin(), k.end(), by_name);

  // Cluster allocation: boot owns cluster 0, then mirror, MFT, the root index
  // block, then nonresident file content.
  const uint64_t total_clusters = spec.image_size / cluster;
  uint64_t next_lcn = 1;
  auto clusters_for = [&](uint64_t bytes) { return (bytes + cluster - 1) / cluster; };
  auto take = [&](uint64_t n) {
    uint64_t at = next_lcn;
    next_lcn += n;
    if (next_lcn > total_clusters) bad("image_size too small for the layout");
    return at;
  };
  const uint64_t mirror_clusters = clusters_for(uint64_t(kMirrorCopies) * rs);
  const uint64_t mirror_lcn = take(mirror_clusters);
  const uint64_t mft_clusters = clusters_for(uint64_t(kMftRecords) * rs);
  const uint64_t mft_lcn = take(mft_clusters);
  const uint64_t indx_clusters = clusters_for(ibs);
  const uint64_t indx_lcn = take(indx_clusters);
  for (Planned& pl : plan) {
    if (!pl.e->is_dir && pl.e->content.size() > kResidentMax) {
      pl.resident = false;
      pl.clusters = uint32_t(clusters_for(pl.e->content.size()));
      pl.lcn = take(pl.clusters);
    }
  }

  const uint8_t per_block = uint8_t(ibs >= cluster ? ibs / cluster : ibs / bps);
  std::vector<Bytes> records(kMftRecords);

  {
    RecordBuilder b(rs, bps, ondisk::kRecMft, false);
    b.resident(ondisk::kAttrStdInfo, "", std_info_value(false));
    uint64_t bytes = uint64_t(kMftRecords) * rs;
    b.resident(ondisk::kAttrFileName, "",
               file_name_value("$MFT", ondisk::kRecRoot, false, mft_clusters * cluster, bytes));
    b.nonresident(ondisk::kAttrData, "", {{mft_lcn, mft_clusters}}, mft_clusters * cluster, bytes);
    records[ondisk::kRecMft] = b.finish();
  }
  {
    RecordBuilder b(rs, bps, ondisk::kRecMirror, false);
    b.resident(ondisk::kAttrStdInfo, "", std_info_value(false));
    uint64_t bytes = uint64_t(kMirrorCopies) * rs;
    b.resident(ondisk::kAttrFileName, "",
               file_name_value("$MFTMirr", ondisk::kRecRoot, false, mirror_clusters * cluster,
                               bytes));
    b.nonresident(ondisk::kAttrData, "", {{mirror_lcn, mirror_clusters}},
                  mirror_clusters * cluster, bytes);
    records[ondisk::kRecMirror] = b.finish();
  }
  auto sys_stub = [&](uint32_t rec, const char* name) {
    RecordBuilder b(rs, bps, rec, false);
    b.resident(ondisk::kAttrStdInfo, "", std_info_value(false));
    b.resident(ondisk::kAttrFileName, "",
               file_name_value(name, ondisk::kRecRoot, false, 0, 0));
    b.resident(ondisk::kAttrData, "", {});
    records[rec] = b.finish();
  };
  sys_stub(ondisk::kRecLog, "$LogFile");
  sys_stub(ondisk::kRecVolume, "$Volume");
  sys_stub(ondisk::kRecAttrDef, "$AttrDef");
  {
    RecordBuilder b(rs, bps, ondisk::kRecRoot, true);
    b.resident(ondisk::kAttrStdInfo, "", std_info_value(true));
    b.resident(ondisk::kAttrFileName, "",
               file_name_value(".", ondisk::kRecRoot, true, 0, 0));
    // Large index: the resident part holds a single end entry pointing at
    // index block 0, where the actual entries live.
    b.resident(ondisk::kAttrIndexRoot, "$I30",
               index_root_value(ibs, per_block, true, {end_entry(0)}));
    b.nonresident(ondisk::kAttrIndexAlloc, "$I30", {{indx_lcn, indx_clusters}},
                  indx_clusters * cluster, ibs);
    Bytes bitmap(8, 0);
    bitmap[0] = 1;
    b.resident(ondisk::kAttrBitmap, "$I30", bitmap);
    records[ondisk::kRecRoot] = b.finish();
  }
  const char* tail_names[] = {"$Bitmap", "$Boot", "$BadClus", "$Secure", "$UpCase",
                              "$Extend", "$Reserved12", "$Reserved13", "$Reserved14",
                              "$Reserved15"};
  for (uint32_t r = ondisk::kRecBitmap; r < ondisk::kRecReservedEnd; r++)
    sys_stub(r, tail_names[r - ondisk::kRecBitmap]);

  for (size_t i = 0; i < plan.size(); i++) {
    const Planned& pl = plan[i];
    const TreeEntry& e = *pl.e;
    RecordBuilder b(rs, bps, pl.rec, e.is_dir);
    b.resident(ondisk::kAttrStdInfo, "", std_info_value(e.is_dir));
    uint64_t real = e.content.size();
    uint64_t alloc = pl.resident ? real : uint64_t(pl.clusters) * cluster;
    b.resident(ondisk::kAttrFileName, "",
               file_name_value(pl.name, pl.parent_rec, e.is_dir, alloc, real));
    if (e.is_dir) {
      std::vector<Bytes> entries;
      for (size_t k : kids[i]) {
        const Planned& c = plan[k];
        entries.push_back(index_entry(c.rec | (1ull << 48),
                                      file_name_value(c.name, pl.rec, c.e->is_dir, 0, 0), 0,
                                      std::nullopt));
      }
      entries.push_back(end_entry(std::nullopt));
      // Small index: entries stay resident in the root attribute.
      b.resident(ondisk::kAttrIndexRoot, "$I30",
                 index_root_value(ibs, per_block, false, entries));
    } else if (pl.resident) {
      b.resident(ondisk::kAttrData, "", e.content);
    } else {
      b.nonresident(ondisk::kAttrData, "", {{pl.lcn, pl.clusters}},
                    uint64_t(pl.clusters) * cluster, real);
    }
    if (!e.xattrs.empty()) b.resident(ondisk::kAttrEa, "", ea_value(e.xattrs));
    records[pl.rec] = b.finish();
  }

  std::vector<Bytes> indx_entries;
  for (size_t k : root_children) {
    const Planned& c = plan[k];
    indx_entries.push_back(index_entry(c.rec | (1ull << 48),
                                       file_name_value(c.name, ondisk::kRecRoot, c.e->is_dir, 0, 0),
                                       0, std::nullopt));
  }
  indx_entries.push_back(end_entry(std::nullopt));
  Bytes indx = build_index_block(ibs, bps, 0, indx_entries, 0x0201);

  Bytes image(spec.image_size, 0);
  {
    MutByteSpan boot(image.data(), ondisk::kBootSize);
    boot[0] = 0xEB;
    boot[1] = 0x52;
    boot[2] = 0x90;
    std::memcpy(boot.data() + ondisk::kBootOemOff, "NTFS    ", 8);
    wr_u16(boot, ondisk::kBootBytesPerSectorOff, uint16_t(bps));
    boot[ondisk::kBootSectorsPerClusterOff] = uint8_t(spc);
    boot[0x15] = 0xF8;       // media descriptor
    wr_u16(boot, 0x18, 63);  // sectors per track, heads: CHS filler
    wr_u16(boot, 0x1A, 255);
    wr_u64(boot, ondisk::kBootTotalSectorsOff, spec.image_size / bps);
    wr_u64(boot, ondisk::kBootMftClusterOff, mft_lcn);
    wr_u64(boot, ondisk::kBootMftMirrorClusterOff, mirror_lcn);
    boot[ondisk::kBootRecordSizeRawOff] = uint8_t(rs_raw);
    boot[ondisk::kBootIndexSizeRawOff] = uint8_t(ibs_raw);
    wr_u64(boot, ondisk::kBootSerialOff, kSerial);
    wr_u16(boot, ondisk::kBootEndMarkerOff, ondisk::kBootEndMarker);
  }
  const uint64_t mft_off = mft_lcn * cluster;
  for (uint32_t r = 0; r < kMftRecords; r++)
    if (!records[r].empty()) wr_bytes(image, mft_off + uint64_t(r) * rs, records[r]);
  const uint64_t mirror_off = mirror_lcn * cluster;
  for (uint32_t r = 0; r < kMirrorCopies; r++)
    if (!records[r].empty()) wr_bytes(image, mirror_off + uint64_t(r) * rs, records[r]);
  wr_bytes(image, indx_lcn * cluster, indx);
  for (const Planned& pl : plan)
    if (!pl.resident) wr_bytes(image, pl.lcn * cluster, pl.e->content);
  return image;
}

std::vector<ForgeSpec> geometry_sweep() {
  auto make = [](uint32_t bps, uint32_t spc, uint32_t rs, uint32_t ibs) {
    ForgeSpec s = ForgeSpec::defaults();
    s.bytes_per_sector = bps;
    s.sectors_per_cluster = spc;
    s.record_size = rs;
    s.index_block_size = ibs;
    return s;
  };
  std::vector<ForgeSpec> out{
      make(512, 8, 1024, 4096),   make(512, 1, 1024, 4096),  make(512, 2, 2048, 4096),
      make(1024, 1, 1024, 4096),  make(1024, 2, 1024, 4096), make(1024, 8, 1024, 8192),
      make(2048, 1, 2048, 4096),  make(2048, 2, 2048, 8192), make(4096, 1, 4096, 4096),
      make(4096, 2, 4096, 16384), make(512, 16, 1024, 8192), make(512, 8, 1024, 2048),
      make(512, 8, 2048, 4096),   make(512, 8, 4096, 4096),  make(1024, 4, 2048, 4096),
      make(2048, 4, 2048, 16384), make(4096, 8, 4096, 32768),
  };
  ForgeSpec empty = make(512, 8, 1024, 4096);
  empty.tree.clear();
  out.push_back(empty);
  ForgeSpec nested = make(512, 8, 1024, 4096);
  nested.tree = {
      {"/b", false, {}, {"user.one", "user.two"}},
      {"/d", true, {}, {}},
      {"/d/e", true, {}, {}},
      {"/d/e/f", false, Bytes(100, 0x41), {}},
      {"/d/g", false, Bytes(3000, 0x42), {}},
  };
  out.push_back(nested);
  ForgeSpec content = make(4096, 1, 4096, 4096);
  content.tree = {
      {"/a", false, Bytes(600, 0x43), {"user.big"}},
      {"/x", true, {}, {}},
      {"/x/y", false, Bytes(10, 0x44), {}},
  };
  out.push_back(content);
  return out;
}

// ---------------------------------------------------------------------------
// Crafted cases

const char* case_name(Case c) {
  switch (c) {
    case Case::RecordSizeNpd: return "rec_size_npd";
    case Case::AttrSizeWrap: return "asize_overflow";
    case Case::RootIndexNpd: return "root_iop_npd";
    case Case::AttrNameListOverflow: return "namelen_oob_write";
    case Case::IndexUsedOverrun: return "index_used_oob_read";
  }
  return "?";
}

std::vector<Case> all_cases() {
  return {Case::RecordSizeNpd, Case::AttrSizeWrap, Case::RootIndexNpd,
          Case::AttrNameListOverflow, Case::IndexUsedOverrun};
}

std::optional<Case> case_from_name(const std::string& name) {
  for (Case c : all_cases())
    if (name == case_name(c)) return c;
  return std::nullopt;
}

namespace {

size_t blob_offset_of(const corpus::Corpus& c, uint64_t image_offset) {
  for (size_t i = 0; i < c.extents.size(); i++)
    if (c.extents[i].image_offset == image_offset)
      return corpus::extent_blob_offset(c.extents, i);
  throw std::logic_error("craft: no extent at image offset " + std::to_string(image_offset));
}

// Patches land on protected bytes; they must stay clear of sector tails or
// the update sequence fixups would rewrite them.
void check_clear_of_tails(uint64_t struct_rel_off, size_t len, uint32_t bps) {
  if (struct_rel_off % bps + len > bps - 2)
    throw std::logic_error("craft: patch overlaps a sector tail");
}

prog::FileOp open_op(const std::string& path, const char* flag) {
  prog::FileOp op;
  op.kind = prog::OpKind::open;
  op.args = {prog::Arg::path(path), prog::Arg::open_flag(flag)};
  op.result_slot = 0;
  return op;
}

}  // namespace

CraftedCase craft_case(Case which) {
  Bytes base = build_image(ForgeSpec::defaults());
  corpus::Corpus cp = corpus::extract_corpus(base);

  const auto boot = ondisk::decode_boot(ByteSpan(base).first(ondisk::kBootSize));
  const uint32_t bps = boot.bytes_per_sector;
  const uint32_t cluster = bps * boot.sectors_per_cluster();
  const uint32_t rs = ondisk::record_size_bytes(boot.record_size_raw, ondisk::blksize_bits(cluster));
  const uint64_t mft_off = boot.mft_cluster * cluster;

  Bytes& blob = cp.metadata;
  prog::OpProgram program;

  switch (which) {
    case Case::RecordSizeNpd: {
      // 0xF8 decodes to 1 << 8 = 256 bytes, below the one-sector floor.
      size_t at = blob_offset_of(cp, 0);
      blob[at + ondisk::kBootRecordSizeRawOff] = 0xF8;
      break;
    }
    case Case::AttrSizeWrap: {
      size_t at = blob_offset_of(cp, mft_off);
      uint16_t attrs_off = rd_u16(blob, at + ondisk::kRecAttrsOffsetOff);
      check_clear_of_tails(attrs_off + 4u, 4, bps);
      // off + asize wraps to 0x10, which still passes the bytes_used bound.
      wr_u32(blob, at + attrs_off + 4, uint32_t(0x10) - attrs_off);
      break;
    }
    case Case::RootIndexNpd: {
      size_t at = blob_offset_of(cp, mft_off + uint64_t(ondisk::kRecRoot) * rs);
      auto dec = ondisk::decode_file_record(ByteSpan(blob).subspan(at, rs), rs, bps, true);
      if (dec.status != ondisk::RecordStatus::Ok)
        throw std::logic_error("craft: root record does not decode");
      auto en = ondisk::enum_attributes(dec.record, Mode::Hardened);
      const ondisk::Attribute* root_attr = nullptr;
      for (const auto& a : en.attrs)
        if (a.type == ondisk::kAttrIndexRoot) root_attr = &a;
      if (!root_attr) throw std::logic_error("craft: root record has no index root");
      check_clear_of_tails(root_attr->rec_off, 4, bps);
      // Retype the attribute: the chain stays walkable, the root index is gone.
      wr_u32(blob, at + root_attr->rec_off, 0x95);
      break;
    }
    case Case::AttrNameListOverflow: {
      // First tree record, the file /a.
      size_t at = blob_offset_of(cp, mft_off + uint64_t(ondisk::kRecReservedEnd) * rs);
      auto dec = ondisk::decode_file_record(ByteSpan(blob).subspan(at, rs), rs, bps, true);
      if (dec.status != ondisk::RecordStatus::Ok)
        throw std::logic_error("craft: record 16 does not decode");
      auto en = ondisk::enum_attributes(dec.record, Mode::Hardened);
      if (en.fault || en.attrs.size() < 2 || en.attrs[1].type != ondisk::kAttrFileName)
        throw std::logic_error("craft: unexpected attribute layout in record 16");
      Bytes raw = dec.record.raw;  // fixups restored; assembly re-protects
      uint32_t off = en.attrs[1].rec_off + en.attrs[1].size;
      // Two minimal resident attributes whose claimed names (255 units at the
      // attribute end) stay inside the record allocation but dominate the
      // attribute-list size accounting.
      for (int i = 0; i < 2; i++) {
        check_clear_of_tails(off, 0x18, bps);
        wr_u32(raw, off + 0x00, ondisk::kAttrData);
        wr_u32(raw, off + 0x04, 0x18);
        raw[off + 0x09] = 0xFF;         // name_len
        wr_u16(raw, off + 0x0A, 0x18);  // name_off == asize
        wr_u16(raw, off + 0x0E, uint16_t(0x10 + i));
        wr_u16(raw, off + 0x14, 0x18);  // value_off == asize, empty value
        off += 0x18;
      }
      wr_u32(raw, off, ondisk::kAttrEnd);
      // Nearly full record: any xattr append must go down the attr-list path.
      wr_u32(raw, ondisk::kRecBytesUsedOff, rs - 24);
      wr_bytes(blob, at, raw);
      program.ops = {open_op("/a", "RDWR")};
      prog::FileOp sx;
      sx.kind = prog::OpKind::setxattr;
      sx.args = {prog::Arg::path("/a"), prog::Arg::str("user.attr"),
                 prog::Arg::payload(Bytes(127, 0x5A)), prog::Arg::number(1)};
      program.ops.push_back(std::move(sx));
      break;
    }
    case Case::IndexUsedOverrun: {
      size_t idx = cp.extents.size();
      for (size_t i = 0; i < cp.extents.size(); i++)
        if (cp.extents[i].kind == corpus::ExtentKind::IndexBuffer) {
          idx = i;
          break;
        }
      if (idx == cp.extents.size()) throw std::logic_error("craft: no index buffer extent");
      size_t at = corpus::extent_blob_offset(cp.extents, idx);
      // End pointer = header + used lands one header past the block.
      wr_u32(blob, at + ondisk::kIndexHdrOff + 4, cp.extents[idx].length);
      program.ops = {open_op("/a", "RDONLY")};
      break;
    }
  }

  CraftedCase out;
  out.which = which;
  out.image = corpus::assemble_image(base, cp);
  out.program = std::move(program);
  return out;
}

}  // namespace papora::forge
