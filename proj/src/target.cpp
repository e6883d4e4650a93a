#include "papora/target.hpp"

#include <cerrno>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "papora/corpus.hpp"
#include "papora/sites.hpp"

namespace papora::target {
namespace {

constexpr uint32_t kNoRec = 0xFFFFFFFFu;
constexpr int kMaxSymlinkHops = 8;
constexpr int kMaxIndexDepth = 8;
constexpr uint32_t kMaxIndexBlockBytes = 1u << 20;
constexpr uint32_t kMaxClusterBytes = 2u << 20;
constexpr uint32_t kMaxRecords = 4096;  // record slots a mount will load

struct Ctx {
  Mode mode = Mode::Hardened;
  CoverageSet* cov = nullptr;

  void visit(const std::string& key) const {
    if (cov) cov->insert(key);
  }
  void check(const char* id) const {
    if (cov) cov->insert(std::string("check:") + id);
  }
  Outcome fired(const char* id, std::string detail) const {
    if (cov) cov->insert(std::string("check:") + id + ":fired");
    return Outcome::validation(id, std::move(detail));
  }
  Outcome crash(CrashClass c, const char* site, std::string detail) const {
    if (cov) cov->insert(std::string("crash:") + site);
    return Outcome::crash(c, site, std::move(detail));
  }
};

const char* errno_name(int e) {
  switch (e) {
    case ENOENT: return "ENOENT";
    case ENOTDIR: return "ENOTDIR";
    case EISDIR: return "EISDIR";
    case EBADF: return "EBADF";
    case EEXIST: return "EEXIST";
    case ENOTEMPTY: return "ENOTEMPTY";
    case EINVAL: return "EINVAL";
    case ELOOP: return "ELOOP";
    case EIO: return "EIO";
    case ENODATA: return "ENODATA";
    case EBUSY: return "EBUSY";
    case EPERM: return "EPERM";
    default: return "ERR";
  }
}

// --------------------------------------------------------------------------
// Path helpers. The model only deals in canonical absolute paths ("/", no
// empty or dot components); anything else earns EINVAL at the executor.

std::vector<std::string> split_path(const std::string& p) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < p.size()) {
    while (i < p.size() && p[i] == '/') i++;
    size_t j = i;
    while (j < p.size() && p[j] != '/') j++;
    if (j > i) out.push_back(p.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string canon_path(const std::string& p) {
  std::string out;
  for (const auto& c : split_path(p)) {
    out += '/';
    out += c;
  }
  return out.empty() ? "/" : out;
}

bool is_canonical(const std::string& p) {
  return !p.empty() && p[0] == '/' && p == canon_path(p);
}

std::string parent_of(const std::string& p) {
  size_t slash = p.find_last_of('/');
  return slash == 0 ? "/" : p.substr(0, slash);
}

std::string basename_of(const std::string& p) {
  return p.substr(p.find_last_of('/') + 1);
}

const ondisk::Attribute* find_attr(const ondisk::FileRecord& rec, uint32_t type) {
  for (const auto& a : rec.attributes)
    if (a.type == type) return &a;
  return nullptr;
}

const ondisk::Attribute* unnamed_data(const ondisk::FileRecord& rec) {
  for (const auto& a : rec.attributes)
    if (a.type == ondisk::kAttrData && a.name_len == 0) return &a;
  return nullptr;
}

// --------------------------------------------------------------------------
// Directory index search

struct ScanHit {
  enum Kind { NotFound, Found, Descend } what = NotFound;
  uint64_t value = 0;  // record number (Found) or subnode VCN (Descend)
};

// Linear walk over one entry list; exact-match only, descending through the
// trailing entry's subnode pointer. `end` is an absolute offset into buf and
// must already be validated against buf's size.
ScanHit scan_entries(ByteSpan buf, size_t hdr_start, uint32_t entries_off, uint64_t end,
                     const std::string& name) {
  uint64_t off = uint64_t(hdr_start) + entries_off;
  while (off + ondisk::kIndexEntryHdr <= end) {
    ondisk::IndexEntry e = ondisk::decode_index_entry(buf, size_t(off));
    if (e.size < ondisk::kIndexEntryHdr || off + e.size > end) break;
    if (e.is_last()) {
      if (e.has_subnode() && e.size >= ondisk::kIndexEntryHdr + 8)
        return {ScanHit::Descend, rd_u64(buf, size_t(off + e.size - 8))};
      return {};
    }
    if (off + ondisk::kIndexEntryHdr + e.key_len <= end) {
      auto fn = ondisk::decode_file_name(
          buf.subspan(size_t(off + ondisk::kIndexEntryHdr), e.key_len));
      if (fn && fn->name == name) return {ScanHit::Found, e.record()};
    }
    off += e.size;
  }
  return {};
}

struct Search {
  std::optional<Outcome> abort;
  std::optional<uint64_t> found;  // referenced record number
};

Search index_search(const MountedVolume& vol, uint32_t dir_rec, const std::string& name,
                    const Ctx& ctx) {
  Search out;
  if (dir_rec >= vol.records.size() || !vol.records[dir_rec]) return out;
  const ondisk::FileRecord& dir = *vol.records[dir_rec];

  const ondisk::Attribute* iroot = find_attr(dir, ondisk::kAttrIndexRoot);
  ctx.check("index_root");
  if (!iroot || iroot->non_resident) {
    out.abort = ctx.fired("index_root", "directory without a resident index root");
    return out;
  }
  ByteSpan value = ondisk::attr_value(dir, *iroot);
  if (value.size() < 0x20) {
    out.abort = ctx.fired("index_root", "index root value too small");
    return out;
  }
  ondisk::IndexHdr ih = ondisk::decode_index_hdr(value, 0x10);
  uint64_t rend = 0x10 + uint64_t(ih.used);
  if (ih.entries_off < 0x10 || rend > value.size()) {
    out.abort = ctx.fired("index_root", "index header bounds beyond the root value");
    return out;
  }
  ScanHit hit = scan_entries(value, 0x10, ih.entries_off, rend, name);

  std::vector<corpus::StreamSeg> segs;
  bool have_segs = false;
  int depth = 0;
  while (true) {
    if (hit.what == ScanHit::Found) {
      ctx.visit("index:hit");
      out.found = hit.value;
      return out;
    }
    if (hit.what == ScanHit::NotFound) {
      ctx.visit("index:miss");
      return out;
    }
    if (++depth > kMaxIndexDepth) {  // subnode cycle guard
      ctx.visit("index:miss");
      return out;
    }
    ctx.visit("index:descend");
    if (!have_segs) {
      const ondisk::Attribute* alloc = find_attr(dir, ondisk::kAttrIndexAlloc);
      ctx.check("index_io");
      if (!alloc || !alloc->non_resident) {
        out.abort = ctx.fired("index_io", "large index without an allocation stream");
        return out;
      }
      segs = corpus::attr_stream_segs(vol.image, dir, *alloc, vol.cluster_size);
      have_segs = true;
    }
    uint32_t ibs = vol.index_block_size;
    uint64_t block_byte = ibs >= vol.cluster_size ? hit.value * vol.cluster_size
                                                  : hit.value * vol.sector_size;
    ctx.check("index_io");
    auto ioff = corpus::stream_to_image(segs, block_byte, ibs);
    if (!ioff) {
      out.abort = ctx.fired("index_io", "index block outside the backing stream");
      return out;
    }
    auto dec = ondisk::decode_index_buffer(vol.image.subspan(size_t(*ioff), ibs), ibs,
                                           vol.sector_size, true);
    ctx.check("index_block");
    if (dec.status == ondisk::IndexBufStatus::NotAnIndexBuffer) {
      out.abort = ctx.fired("index_block", "block without INDX magic");
      return out;
    }
    ctx.check("index_usa");
    if (dec.status == ondisk::IndexBufStatus::Torn) {
      out.abort = ctx.fired("index_usa", "torn index block");
      return out;
    }
    // The entry walk's end pointer comes straight from hdr.used; past-the-block
    // values mean every entry probe reads outside the buffer.
    uint64_t bend = ondisk::kIndexHdrOff + uint64_t(dec.buf.hdr.used);
    ctx.check("index_hdr_bound");
    if (bend > ibs) {
      if (ctx.mode == Mode::Hardened) {
        out.abort = ctx.fired("index_hdr_bound", "used bytes run past the index block");
      } else {
        out.abort = ctx.crash(CrashClass::OOB_Read, "hdr_find_e",
                              "entry end pointer past the index block");
      }
      return out;
    }
    hit = scan_entries(dec.buf.raw, ondisk::kIndexHdrOff, dec.buf.hdr.entries_off, bend, name);
  }
}

// A search hit loads the referenced inode. Reserved records carry fixed types;
// one referenced back as a directory rebuilds the in-memory inode under an
// already-live union with the wrong layout.
std::optional<Outcome> inode_gate(const MountedVolume& vol, uint64_t rec, const Ctx& ctx) {
  ctx.check("inode_type");
  if (rec >= ondisk::kRecReservedEnd || rec == ondisk::kRecRoot) return std::nullopt;
  if (rec >= vol.records.size() || !vol.records[size_t(rec)]) return std::nullopt;
  if (!vol.records[size_t(rec)]->is_directory()) return std::nullopt;
  if (ctx.mode == Mode::Hardened)
    return ctx.fired("inode_type", "reserved record referenced as a directory");
  return ctx.crash(CrashClass::Heap_Corruption, "inode_union",
                   "reserved inode reloaded with directory type");
}

// --------------------------------------------------------------------------
// Run state and path resolution

struct FdInfo {
  std::string path;
  uint32_t rec = kNoRec;
  prog::EntryKind kind = prog::EntryKind::File;
  bool readable = true;
  bool writable = false;
  uint64_t pos = 0;
};

struct RunState {
  const MountedVolume* vol = nullptr;
  prog::FsStatus status;
  std::map<std::string, uint32_t> backing;         // path -> MFT record
  std::map<std::string, std::string> symlink_target;
  std::map<int, FdInfo> fds;                       // slot -> open description
};

struct Lookup {
  std::optional<Outcome> abort;
  int err = 0;
  std::string path;  // canonical resolved path
  uint32_t rec = kNoRec;
  prog::EntryKind kind = prog::EntryKind::File;
};

// One literal walk. Every component lookup in an image-backed directory runs
// the on-disk index search first, so its faults surface even for paths whose
// liveness the modeled status decides. Symlinks resolve only in the final
// position (resolve() handles that); one in the middle reports ENOTDIR.
Lookup walk_once(RunState& st, const std::string& path, const Ctx& ctx) {
  Lookup out;
  std::vector<std::string> comps = split_path(path);
  std::string cur = "/";
  for (const std::string& name : comps) {
    auto de = st.status.entries.find(cur);
    if (de == st.status.entries.end()) {
      out.err = ENOENT;
      return out;
    }
    if (de->second.kind != prog::EntryKind::Dir) {
      out.err = ENOTDIR;
      return out;
    }
    if (auto b = st.backing.find(cur); b != st.backing.end()) {
      Search s = index_search(*st.vol, b->second, name, ctx);
      if (s.abort) {
        out.abort = s.abort;
        return out;
      }
      if (s.found) {
        if (auto gate = inode_gate(*st.vol, *s.found, ctx)) {
          out.abort = gate;
          return out;
        }
      }
    }
    cur = cur == "/" ? "/" + name : cur + "/" + name;
  }
  auto e = st.status.entries.find(cur);
  if (e == st.status.entries.end()) {
    out.err = ENOENT;
    return out;
  }
  out.path = cur;
  out.kind = e->second.kind;
  if (auto b = st.backing.find(cur); b != st.backing.end()) out.rec = b->second;
  return out;
}

Lookup resolve(RunState& st, std::string path, bool follow_last, const Ctx& ctx) {
  for (int hops = 0; hops < kMaxSymlinkHops; hops++) {
    Lookup lk = walk_once(st, path, ctx);
    if (lk.abort || lk.err) return lk;
    if (follow_last && lk.kind == prog::EntryKind::Symlink) {
      auto t = st.symlink_target.find(lk.path);
      if (t == st.symlink_target.end()) {
        lk.err = ENOENT;  // target unknown: treat as dangling
        return lk;
      }
      path = t->second;
      continue;
    }
    return lk;
  }
  Lookup lk;
  lk.err = ELOOP;
  return lk;
}

// Existence probe for the final component of a creation op: the kernel looks
// the name up in the parent index before inserting, so index faults and the
// inode gate fire here too.
std::optional<Outcome> dir_child_probe(RunState& st, const Lookup& parent,
                                       const std::string& name, const Ctx& ctx) {
  if (parent.rec == kNoRec) return std::nullopt;
  Search s = index_search(*st.vol, parent.rec, name, ctx);
  if (s.abort) return s.abort;
  if (s.found) return inode_gate(*st.vol, *s.found, ctx);
  return std::nullopt;
}

bool has_children(const prog::FsStatus& s, const std::string& dir) {
  std::string prefix = dir == "/" ? "/" : dir + "/";
  auto it = s.entries.upper_bound(prefix);
  return it != s.entries.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

template <class T>
void move_keys(std::map<std::string, T>& m, const std::string& oldp, const std::string& newp) {
  std::map<std::string, T> moved;
  for (auto it = m.begin(); it != m.end();) {
    const std::string& k = it->first;
    bool is_sub = k.size() > oldp.size() && k.compare(0, oldp.size(), oldp) == 0 &&
                  k[oldp.size()] == '/';
    if (k == oldp || is_sub) {
      moved[newp + k.substr(oldp.size())] = std::move(it->second);
      it = m.erase(it);
    } else {
      ++it;
    }
  }
  for (auto& [k, v] : moved) m[k] = std::move(v);
}

// --------------------------------------------------------------------------
// Content reads

struct ReadRes {
  int err = 0;
  uint64_t n = 0;
};

uint64_t backed_size(const RunState& st, uint32_t rec) {
  if (rec == kNoRec || rec >= st.vol->records.size() || !st.vol->records[rec]) return 0;
  const ondisk::Attribute* da = unnamed_data(*st.vol->records[rec]);
  if (!da) return 0;
  return da->non_resident ? da->data_size : da->value_size;
}

ReadRes read_range(const RunState& st, const FdInfo& fi, uint64_t off, uint64_t len) {
  ReadRes rr;
  if (fi.rec == kNoRec || fi.rec >= st.vol->records.size() || !st.vol->records[fi.rec])
    return rr;  // runtime-created files read as empty
  const ondisk::FileRecord& rec = *st.vol->records[fi.rec];
  const ondisk::Attribute* da = unnamed_data(rec);
  if (!da) return rr;
  uint64_t size = da->non_resident ? da->data_size : da->value_size;
  if (off >= size) return rr;
  uint64_t n = std::min(len, size - off);
  if (da->non_resident) {
    auto segs = corpus::attr_stream_segs(st.vol->image, rec, *da, st.vol->cluster_size);
    uint64_t total = 0;
    for (const auto& s : segs) total += s.length;
    if (off + n > total) {  // device bytes missing behind the claimed size
      rr.err = EIO;
      return rr;
    }
  }
  // resident values were bounds-checked inside the record at decode time
  rr.n = n;
  return rr;
}

// --------------------------------------------------------------------------
// Syscall execution

struct OpResult {
  std::optional<Outcome> abort;
  int err = 0;
};

OpResult exec_op(RunState& st, const prog::FileOp& op, const Ctx& ctx) {
  OpResult r;
  auto fail = [&](int e) {
    r.err = e;
    return r;
  };
  auto aborted = [&](const Lookup& lk) {
    r.abort = lk.abort;
    return r;
  };
  auto apply = [&] { prog::apply_effect(st.status, op); };

  for (const auto& a : op.args)
    if (a.type == prog::ArgType::Path && !is_canonical(a.s)) return fail(EINVAL);

  switch (op.kind) {
    case prog::OpKind::open: {
      const std::string& flag = op.args[1].s;
      bool rd = flag == "RDONLY" || flag == "RDWR";
      bool wr = flag == "WRONLY" || flag == "RDWR";
      if (!rd && !wr) return fail(EINVAL);
      if (op.result_slot < 0) return fail(EINVAL);
      Lookup lk = resolve(st, op.args[0].s, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      if (lk.kind == prog::EntryKind::Dir && wr) return fail(EISDIR);
      FdInfo fi;
      fi.path = lk.path;
      fi.rec = lk.rec;
      fi.kind = lk.kind;
      fi.readable = rd;
      fi.writable = wr;
      st.fds[op.result_slot] = std::move(fi);
      apply();
      return r;
    }
    case prog::OpKind::close: {
      int slot = int(op.args[0].num);
      if (!st.fds.count(slot)) return fail(EBADF);
      st.fds.erase(slot);
      apply();
      return r;
    }
    case prog::OpKind::read:
    case prog::OpKind::pread64: {
      auto it = st.fds.find(int(op.args[0].num));
      if (it == st.fds.end() || !it->second.readable) return fail(EBADF);
      if (it->second.kind == prog::EntryKind::Dir) return fail(EISDIR);
      int64_t count = op.args[1].num;
      if (count < 0) return fail(EINVAL);
      uint64_t off = it->second.pos;
      if (op.kind == prog::OpKind::pread64) {
        if (op.args[2].num < 0) return fail(EINVAL);
        off = uint64_t(op.args[2].num);
      }
      ReadRes rr = read_range(st, it->second, off, uint64_t(count));
      if (rr.err) return fail(rr.err);
      if (op.kind == prog::OpKind::read) it->second.pos += rr.n;
      return r;
    }
    case prog::OpKind::write:
    case prog::OpKind::pwrite64: {
      auto it = st.fds.find(int(op.args[0].num));
      if (it == st.fds.end() || !it->second.writable) return fail(EBADF);
      if (op.args[1].num < 0) return fail(EINVAL);
      if (op.kind == prog::OpKind::pwrite64 && op.args[2].num < 0) return fail(EINVAL);
      return r;  // content bytes are not modeled; the volume is never written back
    }
    case prog::OpKind::lseek: {
      auto it = st.fds.find(int(op.args[0].num));
      if (it == st.fds.end()) return fail(EBADF);
      int64_t off = op.args[1].num;
      const std::string& whence = op.args[2].s;
      uint64_t base;
      if (whence == "SET")
        base = 0;
      else if (whence == "CUR")
        base = it->second.pos;
      else if (whence == "END")
        base = backed_size(st, it->second.rec);
      else
        return fail(EINVAL);
      __int128 np = __int128(base) + off;
      if (np < 0 || np > INT64_MAX) return fail(EINVAL);
      it->second.pos = uint64_t(np);
      return r;
    }
    case prog::OpKind::truncate: {
      Lookup lk = resolve(st, op.args[0].s, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      if (lk.kind == prog::EntryKind::Dir) return fail(EISDIR);
      if (op.args[1].num < 0) return fail(EINVAL);
      return r;
    }
    case prog::OpKind::ftruncate: {
      auto it = st.fds.find(int(op.args[0].num));
      if (it == st.fds.end()) return fail(EBADF);
      if (!it->second.writable || it->second.kind == prog::EntryKind::Dir ||
          op.args[1].num < 0)
        return fail(EINVAL);
      return r;
    }
    case prog::OpKind::fsync:
    case prog::OpKind::fdatasync: {
      if (!st.fds.count(int(op.args[0].num))) return fail(EBADF);
      return r;
    }
    case prog::OpKind::link: {
      const std::string& newp = op.args[1].s;
      Lookup lo = resolve(st, op.args[0].s, false, ctx);
      if (lo.abort) return aborted(lo);
      if (lo.err) return fail(lo.err);
      if (lo.kind == prog::EntryKind::Dir) return fail(EPERM);
      if (lo.kind != prog::EntryKind::File) return fail(EPERM);  // symlink links unmodeled
      if (st.status.entries.count(newp)) return fail(EEXIST);
      Lookup lp = resolve(st, parent_of(newp), false, ctx);
      if (lp.abort) return aborted(lp);
      if (lp.err) return fail(lp.err);
      if (lp.kind != prog::EntryKind::Dir) return fail(ENOTDIR);
      if (auto a = dir_child_probe(st, lp, basename_of(newp), ctx)) {
        r.abort = a;
        return r;
      }
      apply();
      if (lo.rec != kNoRec) st.backing[newp] = lo.rec;  // same inode, same bytes
      return r;
    }
    case prog::OpKind::symlink: {
      const std::string& linkp = op.args[1].s;
      if (st.status.entries.count(linkp)) return fail(EEXIST);
      Lookup lp = resolve(st, parent_of(linkp), false, ctx);
      if (lp.abort) return aborted(lp);
      if (lp.err) return fail(lp.err);
      if (lp.kind != prog::EntryKind::Dir) return fail(ENOTDIR);
      if (auto a = dir_child_probe(st, lp, basename_of(linkp), ctx)) {
        r.abort = a;
        return r;
      }
      apply();
      st.symlink_target[linkp] = op.args[0].s;
      return r;
    }
    case prog::OpKind::unlink: {
      const std::string& p = op.args[0].s;
      Lookup lk = resolve(st, p, false, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      if (lk.kind == prog::EntryKind::Dir) return fail(EISDIR);
      apply();
      st.backing.erase(p);
      st.symlink_target.erase(p);
      return r;  // open fds keep their record binding, as after a real unlink
    }
    case prog::OpKind::mkdir: {
      const std::string& p = op.args[0].s;
      if (st.status.entries.count(p)) return fail(EEXIST);
      Lookup lp = resolve(st, parent_of(p), false, ctx);
      if (lp.abort) return aborted(lp);
      if (lp.err) return fail(lp.err);
      if (lp.kind != prog::EntryKind::Dir) return fail(ENOTDIR);
      if (auto a = dir_child_probe(st, lp, basename_of(p), ctx)) {
        r.abort = a;
        return r;
      }
      apply();
      return r;
    }
    case prog::OpKind::rmdir: {
      const std::string& p = op.args[0].s;
      Lookup lk = resolve(st, p, false, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      if (lk.kind != prog::EntryKind::Dir) return fail(ENOTDIR);
      if (p == "/") return fail(EBUSY);
      if (has_children(st.status, p)) return fail(ENOTEMPTY);
      apply();
      st.backing.erase(p);
      return r;
    }
    case prog::OpKind::rename: {
      const std::string& oldp = op.args[0].s;
      const std::string& newp = op.args[1].s;
      if (oldp == "/" || newp == "/") return fail(EBUSY);
      Lookup lo = resolve(st, oldp, false, ctx);
      if (lo.abort) return aborted(lo);
      if (lo.err) return fail(lo.err);
      if (newp == oldp) return r;
      if (newp.size() > oldp.size() && newp.compare(0, oldp.size(), oldp) == 0 &&
          newp[oldp.size()] == '/')
        return fail(EINVAL);  // cannot move a directory under itself
      auto ne = st.status.entries.find(newp);
      if (ne != st.status.entries.end()) {
        bool old_dir = lo.kind == prog::EntryKind::Dir;
        bool new_dir = ne->second.kind == prog::EntryKind::Dir;
        if (old_dir && !new_dir) return fail(ENOTDIR);
        if (!old_dir && new_dir) return fail(EISDIR);
        if (new_dir && has_children(st.status, newp)) return fail(ENOTEMPTY);
      }
      Lookup lp = resolve(st, parent_of(newp), false, ctx);
      if (lp.abort) return aborted(lp);
      if (lp.err) return fail(lp.err);
      if (lp.kind != prog::EntryKind::Dir) return fail(ENOTDIR);
      if (auto a = dir_child_probe(st, lp, basename_of(newp), ctx)) {
        r.abort = a;
        return r;
      }
      st.backing.erase(newp);  // a replaced target is gone entirely
      st.symlink_target.erase(newp);
      apply();
      move_keys(st.backing, oldp, newp);
      move_keys(st.symlink_target, oldp, newp);
      for (auto& [slot, fi] : st.fds) {
        bool is_sub = fi.path.size() > oldp.size() &&
                      fi.path.compare(0, oldp.size(), oldp) == 0 &&
                      fi.path[oldp.size()] == '/';
        if (fi.path == oldp || is_sub) fi.path = newp + fi.path.substr(oldp.size());
      }
      return r;
    }
    case prog::OpKind::stat:
    case prog::OpKind::utimes: {
      Lookup lk = resolve(st, op.args[0].s, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      return r;
    }
    case prog::OpKind::lstat: {
      Lookup lk = resolve(st, op.args[0].s, false, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      return r;
    }
    case prog::OpKind::setxattr: {
      const std::string& p = op.args[0].s;
      const std::string& name = op.args[1].s;
      if (name.empty() || name.size() > 255) return fail(EINVAL);
      Lookup lk = resolve(st, p, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      // xattr bookkeeping lives on the literal entry (matching apply_effect)
      auto ent = st.status.entries.find(p);
      bool present = ent != st.status.entries.end() && ent->second.xattrs.count(name);
      int64_t flags = op.args[3].num;
      if (flags == 1 && present) return fail(EEXIST);   // XATTR_CREATE
      if (flags == 2 && !present) return fail(ENODATA);  // XATTR_REPLACE
      if (lk.rec != kNoRec && lk.rec < st.vol->records.size() && st.vol->records[lk.rec]) {
        const ondisk::FileRecord& rec = *st.vol->records[lk.rec];
        uint32_t alloc = std::min<uint32_t>(rec.bytes_allocated, uint32_t(rec.raw.size()));
        uint32_t used = std::min(rec.bytes_used, alloc);
        uint64_t need = align8(0x20 + name.size() + op.args[2].bytes.size());
        if (need <= uint64_t(alloc - used)) {
          ctx.visit("setxattr:fits");
        } else {
          // No room in the record: every attribute moves behind an attribute
          // list built in a record-size scratch buffer. Each list entry is
          // 0x1A bytes plus the attribute name, 8-aligned.
          ctx.visit("setxattr:attr_list");
          uint32_t scratch = (st.vol->record_size + 1023u) & ~1023u;
          uint64_t acc = 0;
          ctx.check("attr_list_full");
          auto overflow = [&](uint8_t name_units) {
            acc += align8(0x1A + 2ull * name_units);
            return acc > scratch;
          };
          bool over = false;
          for (const auto& a : rec.attributes)
            if (overflow(a.name_len)) {
              over = true;
              break;
            }
          if (!over && overflow(0)) over = true;  // entry for the new EA stream
          if (over) {
            if (ctx.mode == Mode::Hardened) {
              r.abort = ctx.fired("attr_list_full", "attribute list exceeds its buffer");
            } else {
              r.abort = ctx.crash(CrashClass::OOB_Write, "attr_list_copy",
                                  "list entry copied past the scratch buffer");
            }
            return r;
          }
        }
      }
      apply();
      return r;
    }
    case prog::OpKind::getxattr:
    case prog::OpKind::removexattr: {
      const std::string& p = op.args[0].s;
      const std::string& name = op.args[1].s;
      Lookup lk = resolve(st, p, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      auto ent = st.status.entries.find(p);
      bool present = ent != st.status.entries.end() && ent->second.xattrs.count(name);
      if (!present) return fail(ENODATA);
      if (op.kind == prog::OpKind::removexattr) apply();
      return r;
    }
    case prog::OpKind::listxattr: {
      Lookup lk = resolve(st, op.args[0].s, true, ctx);
      if (lk.abort) return aborted(lk);
      if (lk.err) return fail(lk.err);
      return r;
    }
  }
  return fail(EINVAL);  // unreachable with a complete switch
}

}  // namespace

// --------------------------------------------------------------------------
// Mount

MountResult mount_image(ByteSpan image, const TargetConfig& cfg, CoverageSet* cov) {
  Ctx ctx{cfg.mode, cov};
  MountResult mr;
  auto fail = [&](Outcome o) {
    mr.outcome = std::move(o);
    return mr;
  };

  ctx.visit("mount:decode_boot");
  ctx.check("boot_magic");
  if (image.size() < ondisk::kBootSize)
    return fail(ctx.fired("boot_magic", "image smaller than a boot sector"));
  ondisk::PartitionBootSector boot = ondisk::decode_boot(image.subspan(0, ondisk::kBootSize));
  if (boot.end_marker != ondisk::kBootEndMarker)
    return fail(ctx.fired("boot_magic", "boot sector end marker missing"));
  ctx.check("boot_oem");
  static const uint8_t kOem[8] = {'N', 'T', 'F', 'S', ' ', ' ', ' ', ' '};
  if (!std::equal(boot.oem_id.begin(), boot.oem_id.end(), kOem))
    return fail(ctx.fired("boot_oem", "OEM id is not NTFS"));

  ctx.check("boot_geometry");
  uint32_t bps = boot.bytes_per_sector;
  if (!is_pow2(bps) || bps < 512 || bps > 4096)
    return fail(ctx.fired("boot_geometry", "bytes per sector out of range"));
  uint32_t spc = boot.sectors_per_cluster();
  if (spc == 0) return fail(ctx.fired("boot_geometry", "sectors per cluster undecodable"));
  uint64_t cluster64 = uint64_t(bps) * spc;
  if (cluster64 > kMaxClusterBytes)
    return fail(ctx.fired("boot_geometry", "cluster size out of range"));
  uint32_t cluster = uint32_t(cluster64);
  if (boot.total_sectors == 0 || boot.total_sectors > image.size() / bps)
    return fail(ctx.fired("boot_geometry", "sector count does not fit the device"));

  uint32_t cluster_bits = ondisk::blksize_bits(cluster);
  uint32_t rs = ondisk::record_size_bytes(boot.record_size_raw, cluster_bits);
  ctx.check("record_size_range");
  if (rs > cfg.max_mft_bytes)
    return fail(ctx.fired("record_size_range", "record size above the mount limit"));
  if (rs < ondisk::kSectorSize) {
    // Records smaller than a sector make the record shift come out zero; the
    // unchecked kernel dereferences a null MFT runlist soon after.
    if (ctx.mode == Mode::Vulnerable)
      return fail(ctx.crash(CrashClass::NPD, "fill_super_shift",
                            "record size below one sector"));
    return fail(ctx.fired("record_size_range", "record size below one sector"));
  }
  if (ctx.mode == Mode::Hardened && rs % bps != 0)
    return fail(ctx.fired("record_size_range", "record size not sector aligned"));

  uint32_t ibs = ondisk::record_size_bytes(boot.index_size_raw, cluster_bits);
  ctx.check("index_size_range");
  if (ibs < ondisk::kSectorSize || ibs > kMaxIndexBlockBytes || ibs % bps != 0)
    return fail(ctx.fired("index_size_range", "index block size out of range"));

  ctx.check("mft_extent");
  uint64_t total_clusters = boot.total_sectors / spc;
  if (boot.mft_cluster >= total_clusters)
    return fail(ctx.fired("mft_extent", "MFT cluster outside the volume"));
  uint64_t mft_offset = boot.mft_cluster * cluster;
  if (mft_offset + rs > image.size())
    return fail(ctx.fired("mft_extent", "record 0 does not fit the device"));

  ctx.visit("mount:load_mft");
  auto rec0dec = ondisk::decode_file_record(image.subspan(size_t(mft_offset), rs), rs, bps, true);
  ctx.check("record_magic");
  if (rec0dec.status == ondisk::RecordStatus::NotARecord)
    return fail(ctx.fired("record_magic", "record 0 lacks the FILE signature"));
  ctx.check("record_usa");
  if (rec0dec.status == ondisk::RecordStatus::Torn)
    return fail(ctx.fired("record_usa", "record 0 is torn"));
  ondisk::FileRecord rec0 = std::move(rec0dec.record);
  auto en0 = ondisk::enum_attributes(rec0, cfg.mode, cov);
  if (en0.fault) return fail(*en0.fault);
  rec0.attributes = std::move(en0.attrs);
  ctx.check("mft_load");
  if (!rec0.in_use()) return fail(ctx.fired("mft_load", "record 0 not in use"));
  const ondisk::Attribute* mft_data = unnamed_data(rec0);
  if (!mft_data || !mft_data->non_resident)
    return fail(ctx.fired("mft_load", "record 0 has no non-resident data stream"));
  ctx.check("run_list");
  std::vector<corpus::StreamSeg> segs =
      corpus::attr_stream_segs(image, rec0, *mft_data, cluster);
  if (segs.empty()) return fail(ctx.fired("run_list", "MFT run list undecodable"));
  uint64_t stream_total = 0;
  for (const auto& s : segs) stream_total += s.length;
  uint32_t record_count = uint32_t(std::min<uint64_t>(stream_total / rs, kMaxRecords));
  if (record_count <= ondisk::kRecRoot)
    return fail(ctx.fired("mft_load", "MFT stream too small for the system records"));

  std::vector<std::optional<ondisk::FileRecord>> records(record_count);
  for (uint32_t i = 0; i < record_count; i++) {
    auto off = corpus::stream_to_image(segs, uint64_t(i) * rs, rs);
    if (!off) continue;  // hole in the stream: slot stays free
    ByteSpan slice = image.subspan(size_t(*off), rs);
    if (rd_u32(slice, 0) != ondisk::kRecordMagic) continue;
    if ((rd_u16(slice, ondisk::kRecFlagsOff) & 0x1) == 0) continue;
    auto dec = ondisk::decode_file_record(slice, rs, bps, true);
    if (dec.status == ondisk::RecordStatus::NotARecord) continue;
    if (dec.status == ondisk::RecordStatus::Torn)
      return fail(ctx.fired("record_usa", "record " + std::to_string(i) + " is torn"));
    auto en = ondisk::enum_attributes(dec.record, cfg.mode, cov);
    if (en.fault) return fail(*en.fault);
    dec.record.attributes = std::move(en.attrs);
    records[i] = std::move(dec.record);
  }

  ctx.visit("mount:load_root");
  ctx.check("root_load");
  if (!records[ondisk::kRecRoot] || !records[ondisk::kRecRoot]->is_directory())
    return fail(ctx.fired("root_load", "Failed to load root."));
  const ondisk::FileRecord& root = *records[ondisk::kRecRoot];
  const ondisk::Attribute* iroot = find_attr(root, ondisk::kAttrIndexRoot);
  if (!iroot) {
    // Without the index root the root inode never gets directory ops; the
    // unchecked kernel calls through the null pointer on first lookup.
    if (ctx.mode == Mode::Vulnerable)
      return fail(ctx.crash(CrashClass::NPD, "root_iop", "root index operations are null"));
    return fail(ctx.fired("root_load", "Failed to load root."));
  }
  ctx.check("index_root");
  if (iroot->non_resident)
    return fail(ctx.fired("index_root", "root index root must be resident"));
  ByteSpan value = ondisk::attr_value(root, *iroot);
  if (value.size() < 0x20)
    return fail(ctx.fired("index_root", "index root value too small"));
  ondisk::IndexHdr ih = ondisk::decode_index_hdr(value, 0x10);
  if (ih.entries_off < 0x10 || 0x10 + uint64_t(ih.used) > value.size())
    return fail(ctx.fired("index_root", "index header bounds beyond the root value"));
  if (ih.flags & 0x1) {
    const ondisk::Attribute* alloc = find_attr(root, ondisk::kAttrIndexAlloc);
    if (!alloc || !alloc->non_resident)
      return fail(ctx.fired("index_root", "large index without an allocation stream"));
  }

  MountedVolume vol;
  vol.image = image;
  vol.boot = std::move(boot);
  vol.sector_size = bps;
  vol.cluster_size = cluster;
  vol.record_size = rs;
  vol.index_block_size = ibs;
  vol.record_count = record_count;
  vol.records = std::move(records);
  mr.volume = std::move(vol);
  mr.outcome = Outcome::ok();
  ctx.visit("mount:ok");
  return mr;
}

// --------------------------------------------------------------------------
// Case execution

RunResult run_case(ByteSpan image, const prog::OpProgram& p, const TargetConfig& cfg) {
  RunResult rr;
  rr.status = prog::FsStatus::with_root();
  MountResult m = mount_image(image, cfg, &rr.coverage);
  if (!m.outcome.is_ok()) {
    rr.outcome = std::move(m.outcome);
    return rr;
  }
  RunState st;
  st.vol = &*m.volume;
  corpus::Roster roster = corpus::build_roster(m.volume->records);
  st.status = std::move(roster.status);
  for (const auto& [path, rec] : roster.path_to_record) st.backing[path] = rec;

  Ctx ctx{cfg.mode, &rr.coverage};
  for (const auto& op : p.ops) {
    rr.ops_executed++;
    OpResult res = exec_op(st, op, ctx);
    if (res.abort) {
      rr.outcome = std::move(*res.abort);
      rr.status = std::move(st.status);
      return rr;
    }
    ctx.visit(std::string("op:") + prog::schema_for(op.kind).name + ":" +
              (res.err ? errno_name(res.err) : "ok"));
  }
  rr.outcome = Outcome::ok();
  rr.status = std::move(st.status);
  return rr;
}

// --------------------------------------------------------------------------
// Lint

std::vector<LintFinding> lint_image(ByteSpan image, uint32_t max_mft_bytes) {
  std::vector<LintFinding> out;
  auto add = [&](const std::string& check, std::string detail) {
    for (const auto& f : out)
      if (f.check == check) return;
    out.push_back({check, sites::commit_for_check(check), std::move(detail)});
  };

  TargetConfig cfg;
  cfg.mode = Mode::Hardened;
  cfg.max_mft_bytes = max_mft_bytes;
  CoverageSet cov;
  MountResult m = mount_image(image, cfg, &cov);
  if (!m.outcome.is_ok()) {
    add(m.outcome.id, m.outcome.detail);
    return out;
  }

  // Mount only validates structures on its own path; sweep every directory's
  // index so block-level damage surfaces without a matching lookup.
  const MountedVolume& vol = *m.volume;
  for (size_t rn = 0; rn < vol.records.size(); rn++) {
    if (!vol.records[rn] || !vol.records[rn]->is_directory()) continue;
    const ondisk::FileRecord& dir = *vol.records[rn];
    std::string where = "record " + std::to_string(rn) + ": ";
    const ondisk::Attribute* iroot = find_attr(dir, ondisk::kAttrIndexRoot);
    if (!iroot || iroot->non_resident) {
      add("index_root", where + "no resident index root");
      continue;
    }
    ByteSpan value = ondisk::attr_value(dir, *iroot);
    if (value.size() < 0x20) {
      add("index_root", where + "index root value too small");
      continue;
    }
    ondisk::IndexHdr ih = ondisk::decode_index_hdr(value, 0x10);
    if (ih.entries_off < 0x10 || 0x10 + uint64_t(ih.used) > value.size()) {
      add("index_root", where + "index header bounds beyond the root value");
      continue;
    }
    if (!(ih.flags & 0x1)) continue;
    const ondisk::Attribute* alloc = find_attr(dir, ondisk::kAttrIndexAlloc);
    if (!alloc || !alloc->non_resident) {
      add("index_root", where + "large index without an allocation stream");
      continue;
    }
    auto segs = corpus::attr_stream_segs(image, dir, *alloc, vol.cluster_size);
    uint64_t total = 0;
    for (const auto& s : segs) total += s.length;
    uint32_t ibs = vol.index_block_size;
    uint64_t blocks = std::min<uint64_t>(total / ibs, kMaxRecords);
    for (uint64_t b = 0; b < blocks; b++) {
      std::string blk = where + "index block " + std::to_string(b) + " ";
      auto ioff = corpus::stream_to_image(segs, b * ibs, ibs);
      if (!ioff) {
        add("index_io", blk + "unmapped");
        continue;
      }
      auto dec = ondisk::decode_index_buffer(image.subspan(size_t(*ioff), ibs), ibs,
                                             vol.sector_size, true);
      if (dec.status == ondisk::IndexBufStatus::NotAnIndexBuffer) {
        add("index_block", blk + "without INDX magic");
        continue;
      }
      if (dec.status == ondisk::IndexBufStatus::Torn) {
        add("index_usa", blk + "torn");
        continue;
      }
      if (ondisk::kIndexHdrOff + uint64_t(dec.buf.hdr.used) > ibs)
        add("index_hdr_bound", blk + "claims used bytes past the block");
    }
  }
  return out;
}

}  // namespace papora::target
