#include "papora/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace papora::corpus {

using namespace papora::ondisk;

const char* to_string(ExtentKind k) {
  switch (k) {
    case ExtentKind::Boot: return "boot";
    case ExtentKind::MftRecord: return "mft_record";
    case ExtentKind::IndexBuffer: return "index_buffer";
  }
  return "?";
}

size_t extent_blob_offset(const std::vector<Extent>& extents, size_t idx) {
  size_t off = 0;
  for (size_t i = 0; i < idx && i < extents.size(); ++i) off += extents[i].length;
  return off;
}

std::optional<std::pair<size_t, uint64_t>> blob_to_image(const std::vector<Extent>& extents,
                                                         size_t blob_off) {
  size_t off = 0;
  for (size_t i = 0; i < extents.size(); ++i) {
    if (blob_off < off + extents[i].length)
      return std::make_pair(i, extents[i].image_offset + (blob_off - off));
    off += extents[i].length;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shared image walk

std::optional<uint64_t> stream_to_image(const std::vector<StreamSeg>& segs, uint64_t stream_off,
                                        uint64_t len) {
  uint64_t pos = 0;
  for (const auto& seg : segs) {
    if (stream_off >= pos && stream_off + len <= pos + seg.length)
      return seg.image_off + (stream_off - pos);
    pos += seg.length;
  }
  return std::nullopt;
}

std::vector<StreamSeg> attr_stream_segs(ByteSpan image, const FileRecord& rec, const Attribute& a,
                                        uint64_t cluster) {
  std::vector<StreamSeg> segs;
  if (!a.non_resident || a.run_off > a.size) return segs;
  uint64_t start = uint64_t(a.rec_off) + a.run_off;
  if (!in_bounds(rec.raw.size(), start, a.size - a.run_off)) return segs;
  auto runs = decode_runs(ByteSpan(rec.raw).subspan(size_t(start), a.size - a.run_off));
  if (!runs) return segs;
  uint64_t remaining = a.data_size;
  for (const auto& r : *runs) {
    if (!remaining) break;
    uint64_t off = static_cast<uint64_t>(r.lcn) * cluster;
    uint64_t len = std::min<uint64_t>(r.length * cluster, remaining);
    if (off >= image.size()) break;
    len = std::min<uint64_t>(len, image.size() - off);
    if (!len) break;
    segs.push_back({off, len});
    remaining -= len;
  }
  return segs;
}

namespace {

constexpr uint32_t kMaxWalkRecords = 4096;
constexpr uint32_t kMaxWalkIndexBlocks = 4096;

struct ImageView {
  PartitionBootSector boot;
  uint32_t bps = 0;
  uint64_t cluster = 0;
  uint32_t record_size = 0;
  uint32_t index_block_size = 0;  // 0 when the boot value is unusable
  uint64_t mft_offset = 0;
  std::vector<StreamSeg> mft_segs;
  uint32_t record_count = 0;
  // Decoded in-use records (USA verified); slots empty for free/undecodable.
  std::vector<std::optional<FileRecord>> records;
};

const Attribute* find_attr(const FileRecord& rec, uint32_t type, bool named_i30 = false) {
  for (const auto& a : rec.attributes) {
    if (a.type != type) continue;
    if (named_i30 && a.name_len == 0) continue;
    return &a;
  }
  return nullptr;
}

ImageView load_image_view(ByteSpan image) {
  ImageView v;
  if (image.size() < kBootSize) throw CorpusError("boot", "image smaller than a boot sector");
  v.boot = decode_boot(image.first(kBootSize));
  if (v.boot.end_marker != kBootEndMarker) throw CorpusError("boot", "missing end marker");
  v.bps = v.boot.bytes_per_sector;
  if (!is_pow2(v.bps) || v.bps < 512 || v.bps > 32768)
    throw CorpusError("boot", "bytes per sector out of range");
  uint32_t spc = v.boot.sectors_per_cluster();
  if (!spc) throw CorpusError("boot", "sectors per cluster undecodable");
  v.cluster = static_cast<uint64_t>(v.bps) * spc;
  uint32_t cluster_bits = blksize_bits(static_cast<uint32_t>(v.cluster));
  v.record_size = record_size_bytes(v.boot.record_size_raw, cluster_bits);
  if (v.record_size < 512 || v.record_size > 65536 || v.record_size % v.bps)
    throw CorpusError("boot", "record size unusable");
  uint32_t ibs = record_size_bytes(v.boot.index_size_raw, cluster_bits);
  v.index_block_size = (ibs >= 512 && ibs <= (1u << 20) && ibs % v.bps == 0) ? ibs : 0;

  v.mft_offset = v.boot.mft_cluster * v.cluster;
  if (v.mft_offset + v.record_size > image.size())
    throw CorpusError("mft", "record 0 outside the image");

  auto rec0d = decode_file_record(image.subspan(v.mft_offset, v.record_size), v.record_size,
                                  v.bps, /*verify_usa=*/true);
  if (rec0d.status != RecordStatus::Ok) throw CorpusError("mft", "record 0 undecodable");
  rec0d.record.attributes = enum_attributes(rec0d.record, Mode::Hardened).attrs;

  const Attribute* data = nullptr;
  for (const auto& a : rec0d.record.attributes)
    if (a.type == kAttrData && a.non_resident && a.name_len == 0) {
      data = &a;
      break;
    }
  if (!data) throw CorpusError("mft", "record 0 has no usable data attribute");
  v.mft_segs = attr_stream_segs(image, rec0d.record, *data, v.cluster);
  uint64_t stream = 0;
  for (const auto& s : v.mft_segs) stream += s.length;
  v.record_count = static_cast<uint32_t>(std::min<uint64_t>(stream / v.record_size,
                                                            kMaxWalkRecords));
  if (v.record_count <= kRecRoot) throw CorpusError("mft", "too few records");

  v.records.resize(v.record_count);
  for (uint32_t i = 0; i < v.record_count; ++i) {
    auto off = stream_to_image(v.mft_segs, static_cast<uint64_t>(i) * v.record_size,
                               v.record_size);
    if (!off) continue;
    ByteSpan slice = image.subspan(*off, v.record_size);
    if (rd_u32(slice, 0) != kRecordMagic) continue;
    if (!(rd_u16(slice, kRecFlagsOff) & 0x1)) continue;  // free record
    auto d = decode_file_record(slice, v.record_size, v.bps, /*verify_usa=*/true);
    if (d.status != RecordStatus::Ok) continue;
    d.record.attributes = enum_attributes(d.record, Mode::Hardened).attrs;
    v.records[i] = std::move(d.record);
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Roster / status

namespace {

// Names unusable as path components (empty, '/', control bytes or blanks that
// would break status text) are dropped from the roster.
bool name_usable(const std::string& name) {
  if (name.empty()) return false;
  for (unsigned char c : name)
    if (c <= 0x20 || c == 0x7F || c == '/') return false;
  return true;
}

// Xattr names from a resident extended-attribute stream:
// { u32 next_entry_off, u8 flags, u8 name_len, u16 value_len, name, value }.
std::vector<std::string> ea_names(ByteSpan value) {
  std::vector<std::string> out;
  size_t off = 0;
  while (off + 8 <= value.size() && out.size() < 64) {
    uint32_t next = rd_u32(value, off);
    uint8_t nlen = rd_u8(value, off + 5);
    if (off + 8 + nlen > value.size()) break;
    std::string name(reinterpret_cast<const char*>(value.data() + off + 8), nlen);
    if (!name.empty() && name.find('\0') == std::string::npos &&
        name.find(' ') == std::string::npos && name.find(',') == std::string::npos)
      out.push_back(std::move(name));
    if (next < 8 || off + next <= off) break;
    off += next;
  }
  return out;
}

}  // namespace

Roster build_roster(const std::vector<std::optional<FileRecord>>& records) {
  struct NodeInfo {
    std::string name;
    uint32_t parent;
    bool is_dir;
    std::vector<std::string> xattrs;
  };
  std::map<uint32_t, NodeInfo> nodes;
  for (uint32_t i = kRecReservedEnd; i < records.size(); ++i) {
    if (!records[i]) continue;
    const FileRecord& rec = *records[i];
    const Attribute* fn = find_attr(rec, kAttrFileName);
    if (!fn || fn->non_resident) continue;
    auto value = attr_value(rec, *fn);
    auto parsed = decode_file_name(value);
    if (!parsed || !name_usable(parsed->name)) continue;
    NodeInfo info{parsed->name, static_cast<uint32_t>(parsed->parent_record()),
                  rec.is_directory(), {}};
    if (const Attribute* ea = find_attr(rec, kAttrEa); ea && !ea->non_resident)
      info.xattrs = ea_names(attr_value(rec, *ea));
    nodes[i] = std::move(info);
  }

  Roster roster;
  roster.status = prog::FsStatus::with_root();
  roster.path_to_record.emplace_back("/", kRecRoot);
  for (const auto& [rec_no, info] : nodes) {
    // Resolve the parent chain up to the root; drop records whose chain dies
    // in reserved space or cycles.
    std::vector<const std::string*> parts{&info.name};
    uint32_t cur = info.parent;
    bool ok = true;
    for (int hops = 0; cur != kRecRoot; ++hops) {
      auto it = nodes.find(cur);
      if (it == nodes.end() || !it->second.is_dir || hops > 64) {
        ok = false;
        break;
      }
      parts.push_back(&it->second.name);
      cur = it->second.parent;
    }
    if (!ok) continue;
    std::string path;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      path += '/';
      path += **it;
    }
    prog::Entry e;
    e.kind = info.is_dir ? prog::EntryKind::Dir : prog::EntryKind::File;
    e.xattrs.insert(info.xattrs.begin(), info.xattrs.end());
    roster.status.entries[path] = std::move(e);
    roster.path_to_record.emplace_back(path, rec_no);
  }
  std::sort(roster.path_to_record.begin(), roster.path_to_record.end());
  return roster;
}

prog::FsStatus status_from_image(ByteSpan image) {
  return build_roster(load_image_view(image).records).status;
}

std::string status_to_text(const prog::FsStatus& s) {
  std::string out;
  for (const auto& [path, e] : s.entries) {
    out += prog::to_string(e.kind);
    out += ' ';
    out += path;
    for (int fd : e.open_fds) {
      out += " fd=";
      out += std::to_string(fd);
    }
    if (!e.xattrs.empty()) {
      out += " xattr=";
      bool first = true;
      for (const auto& x : e.xattrs) {
        if (!first) out += ',';
        first = false;
        out += x;
      }
    }
    out += '\n';
  }
  out += "next_slot " + std::to_string(s.next_slot) + "\n";
  return out;
}

prog::FsStatus status_from_text(const std::string& text) {
  prog::FsStatus s;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "next_slot") {
      ls >> s.next_slot;
      continue;
    }
    prog::Entry e;
    if (kind == "file") e.kind = prog::EntryKind::File;
    else if (kind == "dir") e.kind = prog::EntryKind::Dir;
    else if (kind == "symlink") e.kind = prog::EntryKind::Symlink;
    else throw CorpusError("status", "line " + std::to_string(lineno) + ": bad kind");
    std::string path;
    ls >> path;
    if (path.empty() || path[0] != '/')
      throw CorpusError("status", "line " + std::to_string(lineno) + ": bad path");
    std::string tok;
    while (ls >> tok) {
      if (tok.rfind("fd=", 0) == 0) {
        e.open_fds.insert(std::stoi(tok.substr(3)));
      } else if (tok.rfind("xattr=", 0) == 0) {
        std::string names = tok.substr(6);
        size_t pos = 0;
        while (pos <= names.size()) {
          size_t comma = names.find(',', pos);
          std::string n = names.substr(pos, comma == std::string::npos ? comma : comma - pos);
          if (!n.empty()) e.xattrs.insert(n);
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
      } else {
        throw CorpusError("status", "line " + std::to_string(lineno) + ": bad token " + tok);
      }
    }
    s.entries[path] = std::move(e);
  }
  if (!s.entries.count("/")) s.entries["/"] = prog::Entry{prog::EntryKind::Dir, {}, {}};
  for (const auto& [p, e] : s.entries)
    for (int fd : e.open_fds) s.next_slot = std::max(s.next_slot, fd + 1);
  return s;
}

// ---------------------------------------------------------------------------
// Extraction

Corpus extract_corpus(ByteSpan image) {
  ImageView v = load_image_view(image);
  Corpus c;
  c.extents.push_back({0, kBootSize, ExtentKind::Boot});

  for (uint32_t i = 0; i < v.record_count; ++i) {
    auto off = stream_to_image(v.mft_segs, static_cast<uint64_t>(i) * v.record_size,
                               v.record_size);
    if (!off) continue;
    ByteSpan slice = image.subspan(*off, v.record_size);
    if (rd_u32(slice, 0) != kRecordMagic) continue;
    if (!(rd_u16(slice, kRecFlagsOff) & 0x1)) continue;
    c.extents.push_back({*off, v.record_size, ExtentKind::MftRecord});
  }

  // Mirror copies of the first records, located straight from the boot field.
  uint64_t mirror_off = v.boot.mft_mirror_cluster * v.cluster;
  for (uint32_t i = 0; i < std::min<uint32_t>(4, v.record_count); ++i) {
    uint64_t off = mirror_off + static_cast<uint64_t>(i) * v.record_size;
    if (off + v.record_size > image.size()) break;
    ByteSpan slice = image.subspan(off, v.record_size);
    if (rd_u32(slice, 0) != kRecordMagic) continue;
    if (!(rd_u16(slice, kRecFlagsOff) & 0x1)) continue;
    c.extents.push_back({off, v.record_size, ExtentKind::MftRecord});
  }

  // Index buffers reachable from the root index allocation.
  if (v.index_block_size && v.record_count > kRecRoot && v.records[kRecRoot]) {
    const FileRecord& root = *v.records[kRecRoot];
    if (const Attribute* alloc = find_attr(root, kAttrIndexAlloc); alloc) {
      auto segs = attr_stream_segs(image, root, *alloc, v.cluster);
      uint64_t stream = 0;
      for (const auto& s : segs) stream += s.length;
      uint64_t blocks = std::min<uint64_t>(stream / v.index_block_size, kMaxWalkIndexBlocks);
      for (uint64_t b = 0; b < blocks; ++b) {
        auto off = stream_to_image(segs, b * v.index_block_size, v.index_block_size);
        if (!off) continue;
        if (rd_u32(image.subspan(*off, 4), 0) != kIndexMagic) continue;
        c.extents.push_back({*off, v.index_block_size, ExtentKind::IndexBuffer});
      }
    }
  }

  std::sort(c.extents.begin(), c.extents.end(),
            [](const Extent& a, const Extent& b) { return a.image_offset < b.image_offset; });
  std::vector<Extent> kept;
  uint64_t prev_end = 0;
  for (const auto& e : c.extents) {
    if (!kept.empty() && e.image_offset < prev_end) continue;  // overlap: keep first
    kept.push_back(e);
    prev_end = e.image_offset + e.length;
  }
  c.extents = std::move(kept);

  for (const auto& e : c.extents) {
    ByteSpan slice = image.subspan(e.image_offset, e.length);
    c.metadata.insert(c.metadata.end(), slice.begin(), slice.end());
  }

  c.status = build_roster(v.records).status;
  return c;
}

// ---------------------------------------------------------------------------
// Fixups

namespace {

// Derives the sector size a protected structure claims through its own
// update-sequence header: length / (usa_count - 1). Returns 0 when that is
// not a consistent geometry.
uint32_t derived_sector(ByteSpan st) {
  if (st.size() < 8) return 0;
  uint16_t count = rd_u16(st, 6);
  if (count < 2) return 0;
  if (st.size() % (count - 1)) return 0;
  uint64_t sector = st.size() / (count - 1);
  if (sector < 16 || sector > st.size()) return 0;
  UsaGeometry g{rd_u16(st, 4), count};
  if (!usa_geometry_valid(g, st.size(), static_cast<uint32_t>(sector))) return 0;
  return static_cast<uint32_t>(sector);
}

}  // namespace

bool fix_structure(MutByteSpan st, uint32_t sector_size, FixupOptions opt) {
  if (st.size() < 8 || !sector_size) return false;
  UsaGeometry g{rd_u16(st, 4), rd_u16(st, 6)};
  if (!usa_geometry_valid(g, st.size(), sector_size)) return false;
  uint16_t old_usn = rd_u16(st, g.usa_offset);
  uint16_t usn = old_usn;
  if (opt.increment_usn) {
    usn = static_cast<uint16_t>(old_usn + 1);
    if (!usn) usn = 1;
    wr_u16(st, g.usa_offset, usn);
  }
  for (uint16_t i = 1; i < g.usa_count; ++i) {
    size_t tail = static_cast<size_t>(i) * sector_size - 2;
    uint16_t cur = rd_u16(st, tail);
    if (cur == usn) continue;
    // A tail equal to the pre-increment value was already protected; its true
    // bytes sit in the slot. Anything else is fresh data to save.
    if (cur != old_usn) wr_u16(st, g.usa_offset + 2 * i, cur);
    wr_u16(st, tail, usn);
  }
  return true;
}

namespace {

const uint8_t kOemId[8] = {'N', 'T', 'F', 'S', ' ', ' ', ' ', ' '};

void fix_boot_bytes(MutByteSpan image, FixupLog* log) {
  if (image.size() < kBootSize) return;
  for (size_t i = 0; i < 8; ++i) image[kBootOemOff + i] = kOemId[i];
  wr_u16(image, kBootEndMarkerOff, kBootEndMarker);
  if (log) log->push_back({0, "boot oem id and end marker restored"});
}

}  // namespace

FixupLog apply_fixups(MutByteSpan image, FixupOptions opt) {
  FixupLog log;
  fix_boot_bytes(image, &log);
  if (image.size() < kBootSize) return log;

  ImageView v;
  try {
    // Record 0 must be normalized before the view decodes it with USA checks.
    auto pre = decode_boot(ByteSpan(image).first(kBootSize));
    uint32_t spc = pre.sectors_per_cluster();
    if (is_pow2(pre.bytes_per_sector) && pre.bytes_per_sector >= 512 &&
        pre.bytes_per_sector <= 32768 && spc) {
      uint64_t cluster = static_cast<uint64_t>(pre.bytes_per_sector) * spc;
      uint32_t rs = record_size_bytes(pre.record_size_raw,
                                      blksize_bits(static_cast<uint32_t>(cluster)));
      uint64_t off = pre.mft_cluster * cluster;
      if (rs >= 512 && rs <= 65536 && rs % pre.bytes_per_sector == 0 &&
          off + rs <= image.size() && rd_u32(image, off) == kRecordMagic)
        fix_structure(image.subspan(off, rs), pre.bytes_per_sector, opt);
    }
    v = load_image_view(image);
  } catch (const CorpusError& e) {
    log.push_back({0, std::string("usa walk skipped: ") + e.what()});
    return log;
  }

  auto fix_records_at = [&](const std::vector<StreamSeg>& segs, uint32_t count) {
    for (uint32_t i = 0; i < count; ++i) {
      auto off = stream_to_image(segs, static_cast<uint64_t>(i) * v.record_size, v.record_size);
      if (!off) continue;
      if (rd_u32(image, *off) != kRecordMagic) continue;
      if (!fix_structure(image.subspan(*off, v.record_size), v.bps, opt))
        log.push_back({*off, "record skipped: bad usa geometry"});
      else
        log.push_back({*off, "record normalized"});
    }
  };
  fix_records_at(v.mft_segs, v.record_count);

  uint64_t mirror_off = v.boot.mft_mirror_cluster * v.cluster;
  for (uint32_t i = 0; i < std::min<uint32_t>(4, v.record_count); ++i) {
    uint64_t off = mirror_off + static_cast<uint64_t>(i) * v.record_size;
    if (off + v.record_size > image.size()) break;
    if (rd_u32(image, off) != kRecordMagic) continue;
    if (fix_structure(image.subspan(off, v.record_size), v.bps, opt))
      log.push_back({off, "mirror record normalized"});
  }

  if (v.index_block_size && v.record_count > kRecRoot && v.records[kRecRoot]) {
    const FileRecord& root = *v.records[kRecRoot];
    if (const Attribute* alloc = find_attr(root, kAttrIndexAlloc); alloc) {
      auto segs = attr_stream_segs(image, root, *alloc, v.cluster);
      uint64_t stream = 0;
      for (const auto& s : segs) stream += s.length;
      uint64_t blocks = std::min<uint64_t>(stream / v.index_block_size, kMaxWalkIndexBlocks);
      for (uint64_t b = 0; b < blocks; ++b) {
        auto off = stream_to_image(segs, b * v.index_block_size, v.index_block_size);
        if (!off) continue;
        if (rd_u32(image, *off) != kIndexMagic) continue;
        if (fix_structure(image.subspan(*off, v.index_block_size), v.bps, opt))
          log.push_back({*off, "index buffer normalized"});
        else
          log.push_back({*off, "index buffer skipped: bad usa geometry"});
      }
    }
  }
  return log;
}

FixupLog apply_fixups_extents(MutByteSpan image, const std::vector<Extent>& extents,
                              FixupOptions opt) {
  FixupLog log;
  for (const auto& e : extents) {
    if (e.image_offset + e.length > image.size()) {
      log.push_back({e.image_offset, "extent outside image, skipped"});
      continue;
    }
    MutByteSpan st = image.subspan(e.image_offset, e.length);
    switch (e.kind) {
      case ExtentKind::Boot:
        if (e.image_offset == 0 && e.length >= kBootSize)
          fix_boot_bytes(st, &log);
        else
          log.push_back({e.image_offset, "boot extent not at offset 0, skipped"});
        break;
      case ExtentKind::MftRecord:
      case ExtentKind::IndexBuffer: {
        uint32_t sector = derived_sector(st);
        if (!sector || !fix_structure(st, sector, opt))
          log.push_back({e.image_offset, "usa geometry unparseable, skipped"});
        else
          log.push_back({e.image_offset, "structure normalized"});
        break;
      }
    }
  }
  return log;
}

Bytes assemble_image(ByteSpan base, const Corpus& c, FixupOptions opt, FixupLog* log) {
  size_t total = 0;
  uint64_t prev_end = 0;
  for (const auto& e : c.extents) {
    if (e.image_offset < prev_end) throw std::invalid_argument("extents overlap or unsorted");
    if (e.image_offset + e.length > base.size())
      throw std::invalid_argument("extent outside base image");
    prev_end = e.image_offset + e.length;
    total += e.length;
  }
  if (total != c.metadata.size())
    throw std::invalid_argument("metadata blob does not match extent table");

  Bytes out(base.begin(), base.end());
  size_t blob = 0;
  for (const auto& e : c.extents) {
    std::copy_n(c.metadata.begin() + blob, e.length, out.begin() + e.image_offset);
    blob += e.length;
  }
  FixupLog l = apply_fixups_extents(out, c.extents, opt);
  if (log) *log = std::move(l);
  return out;
}

std::vector<FixupNote> verify_fixups(ByteSpan image, const std::vector<Extent>& extents) {
  std::vector<FixupNote> issues;
  for (const auto& e : extents) {
    if (e.image_offset + e.length > image.size()) {
      issues.push_back({e.image_offset, "extent outside image"});
      continue;
    }
    ByteSpan st = image.subspan(e.image_offset, e.length);
    switch (e.kind) {
      case ExtentKind::Boot: {
        if (e.image_offset != 0 || e.length < kBootSize) break;
        if (!std::equal(std::begin(kOemId), std::end(kOemId), st.begin() + kBootOemOff))
          issues.push_back({e.image_offset, "oem id not restored"});
        if (rd_u16(st, kBootEndMarkerOff) != kBootEndMarker)
          issues.push_back({e.image_offset, "end marker not restored"});
        break;
      }
      case ExtentKind::MftRecord:
      case ExtentKind::IndexBuffer: {
        uint32_t sector = derived_sector(st);
        if (!sector) break;  // geometry-exempt, mirroring the fixup skip
        UsaGeometry g{rd_u16(st, 4), rd_u16(st, 6)};
        uint16_t usn = rd_u16(st, g.usa_offset);
        for (uint16_t i = 1; i < g.usa_count; ++i) {
          size_t tail = static_cast<size_t>(i) * sector - 2;
          if (rd_u16(st, tail) != usn) {
            issues.push_back({e.image_offset + tail, "sector tail not stamped with usn"});
            break;
          }
        }
        break;
      }
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Container IO

namespace {

constexpr char kMagic[4] = {'P', 'P', 'R', 'A'};
constexpr uint16_t kVersion = 1;

void put_u16(Bytes& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v));
  b.push_back(static_cast<uint8_t>(v >> 8));
}
void put_u32(Bytes& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

struct Reader {
  ByteSpan s;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > s.size()) throw CorpusError("container", "truncated");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = rd_u16(s, pos);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = rd_u32(s, pos);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = rd_u64(s, pos);
    pos += 8;
    return v;
  }
  uint8_t u8() {
    need(1);
    return s[pos++];
  }
  ByteSpan take(size_t n) {
    need(n);
    ByteSpan out = s.subspan(pos, n);
    pos += n;
    return out;
  }
};

}  // namespace

Bytes save(const Corpus& c) {
  Bytes out(kMagic, kMagic + 4);
  put_u16(out, kVersion);

  Bytes table;
  put_u32(table, static_cast<uint32_t>(c.extents.size()));
  for (const auto& e : c.extents) {
    put_u64(table, e.image_offset);
    put_u32(table, e.length);
    table.push_back(static_cast<uint8_t>(e.kind));
  }
  std::string program = prog::serialize_program(c.program);
  std::string status = status_to_text(c.status);

  put_u64(out, table.size());
  out.insert(out.end(), table.begin(), table.end());
  put_u64(out, c.metadata.size());
  out.insert(out.end(), c.metadata.begin(), c.metadata.end());
  put_u64(out, program.size());
  out.insert(out.end(), program.begin(), program.end());
  put_u64(out, status.size());
  out.insert(out.end(), status.begin(), status.end());
  put_u64(out, c.base_image.size());
  out.insert(out.end(), c.base_image.begin(), c.base_image.end());
  return out;
}

Corpus load(ByteSpan raw) {
  Reader r{raw};
  auto magic = r.take(4);
  if (!std::equal(std::begin(kMagic), std::end(kMagic), magic.begin()))
    throw CorpusError("container", "bad magic");
  if (r.u16() != kVersion) throw CorpusError("container", "unsupported version");

  Corpus c;
  uint64_t table_len = r.u64();
  Reader t{r.take(table_len)};
  uint32_t count = t.u32();
  if (count > (1u << 20)) throw CorpusError("container", "extent count implausible");
  size_t total = 0;
  uint64_t prev_end = 0;
  for (uint32_t i = 0; i < count; ++i) {
    Extent e;
    e.image_offset = t.u64();
    e.length = t.u32();
    uint8_t kind = t.u8();
    if (kind > 2) throw CorpusError("container", "bad extent kind");
    e.kind = static_cast<ExtentKind>(kind);
    if (!e.length) throw CorpusError("container", "empty extent");
    if (e.image_offset < prev_end) throw CorpusError("container", "extents overlap or unsorted");
    prev_end = e.image_offset + e.length;
    total += e.length;
    c.extents.push_back(e);
  }
  if (t.pos != t.s.size()) throw CorpusError("container", "trailing bytes in extent table");

  uint64_t blob_len = r.u64();
  if (blob_len != total) throw CorpusError("container", "blob length mismatch");
  auto blob = r.take(blob_len);
  c.metadata.assign(blob.begin(), blob.end());

  uint64_t prog_len = r.u64();
  auto ptxt = r.take(prog_len);
  try {
    c.program = prog::parse_program(std::string(ptxt.begin(), ptxt.end()));
  } catch (const prog::ParseError& e) {
    throw CorpusError("container", std::string("program: ") + e.what());
  }

  uint64_t status_len = r.u64();
  auto stxt = r.take(status_len);
  c.status = status_from_text(std::string(stxt.begin(), stxt.end()));

  uint64_t base_len = r.u64();
  auto btxt = r.take(base_len);
  c.base_image.assign(btxt.begin(), btxt.end());
  if (r.pos != raw.size()) throw CorpusError("container", "trailing bytes");
  return c;
}

void save_file(const Corpus& c, const std::filesystem::path& path) {
  Bytes raw = save(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("io", "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw CorpusError("io", "write failed: " + path.string());
}

Corpus load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("io", "cannot open " + path.string());
  Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load(raw);
}

}  // namespace papora::corpus
