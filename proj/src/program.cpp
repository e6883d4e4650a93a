#include "papora/program.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace papora::prog {

const std::vector<OpSchema>& op_schemas() {
  using A = ArgType;
  static const std::vector<OpSchema> s = {
      {OpKind::open, "open", {A::Path, A::OpenFlag}, true},
      {OpKind::close, "close", {A::Fd}, false},
      {OpKind::read, "read", {A::Fd, A::Num}, false},
      {OpKind::pread64, "pread64", {A::Fd, A::Num, A::Num}, false},
      {OpKind::write, "write", {A::Fd, A::Num}, false},
      {OpKind::pwrite64, "pwrite64", {A::Fd, A::Num, A::Num}, false},
      {OpKind::lseek, "lseek", {A::Fd, A::Num, A::Whence}, false},
      {OpKind::truncate, "truncate", {A::Path, A::Num}, false},
      {OpKind::ftruncate, "ftruncate", {A::Fd, A::Num}, false},
      {OpKind::fsync, "fsync", {A::Fd}, false},
      {OpKind::fdatasync, "fdatasync", {A::Fd}, false},
      {OpKind::link, "link", {A::Path, A::Path}, false},
      {OpKind::symlink, "symlink", {A::Path, A::Path}, false},
      {OpKind::unlink, "unlink", {A::Path}, false},
      {OpKind::mkdir, "mkdir", {A::Path}, false},
      {OpKind::rmdir, "rmdir", {A::Path}, false},
      {OpKind::rename, "rename", {A::Path, A::Path}, false},
      {OpKind::stat, "stat", {A::Path}, false},
      {OpKind::lstat, "lstat", {A::Path}, false},
      {OpKind::setxattr, "setxattr", {A::Path, A::Str, A::Bytes, A::Num}, false},
      {OpKind::getxattr, "getxattr", {A::Path, A::Str, A::Num}, false},
      {OpKind::listxattr, "listxattr", {A::Path, A::Num}, false},
      {OpKind::removexattr, "removexattr", {A::Path, A::Str}, false},
      {OpKind::utimes, "utimes", {A::Path}, false},
  };
  return s;
}

const OpSchema& schema_for(OpKind k) {
  for (const auto& s : op_schemas())
    if (s.kind == k) return s;
  throw std::logic_error("unknown op kind");
}

std::optional<OpKind> kind_from_name(const std::string& name) {
  for (const auto& s : op_schemas())
    if (name == s.name) return s.kind;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

const char* kOpenFlags[] = {"RDONLY", "WRONLY", "RDWR"};
const char* kWhences[] = {"SET", "CUR", "END"};

bool is_open_flag(const std::string& s) {
  return std::any_of(std::begin(kOpenFlags), std::end(kOpenFlags),
                     [&](const char* f) { return s == f; });
}

bool is_whence(const std::string& s) {
  return std::any_of(std::begin(kWhences), std::end(kWhences),
                     [&](const char* f) { return s == f; });
}

void quote_into(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  out += '"';
}

void arg_into(std::string& out, const Arg& a) {
  switch (a.type) {
    case ArgType::Path:
    case ArgType::Str: quote_into(out, a.s); break;
    case ArgType::Fd: out += '$'; out += std::to_string(a.num); break;
    case ArgType::Num: out += std::to_string(a.num); break;
    case ArgType::OpenFlag:
    case ArgType::Whence: out += a.s; break;
    case ArgType::Bytes: out += "h:"; out += to_hex(a.bytes); break;
  }
}

}  // namespace

std::string serialize_op(const FileOp& op) {
  std::string out = schema_for(op.kind).name;
  out += '(';
  for (size_t i = 0; i < op.args.size(); ++i) {
    if (i) out += ", ";
    arg_into(out, op.args[i]);
  }
  out += ')';
  if (op.result_slot >= 0) {
    out += " -> $";
    out += std::to_string(op.result_slot);
  }
  return out;
}

std::string serialize_program(const OpProgram& p) {
  std::string out;
  for (const auto& op : p.ops) {
    out += serialize_op(op);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Cursor {
  const std::string& s;
  size_t pos = 0;
  size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line, what); }

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= s.size();
  }
  char peek() {
    skip_ws();
    if (pos >= s.size()) fail("unexpected end of line");
    return s[pos];
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  bool accept(char c) {
    if (!at_end() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (pos == start) fail("expected identifier");
    return s.substr(start, pos - start);
  }

  int64_t integer() {
    skip_ws();
    size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    size_t digits = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == digits) fail("expected integer");
    return std::stoll(s.substr(start, pos - start));
  }

  std::string quoted() {
    expect('"');
    std::string out;
    while (true) {
      if (pos >= s.size()) fail("unterminated string");
      char c = s[pos++];
      if (c == '"') return out;
      if (c == '\\') {
        if (pos >= s.size()) fail("dangling escape");
        char e = s[pos++];
        if (e == 'n') out += '\n';
        else if (e == '\\' || e == '"') out += e;
        else fail("unknown escape");
      } else {
        out += c;
      }
    }
  }
};

Arg parse_arg(Cursor& c, ArgType want) {
  switch (want) {
    case ArgType::Path:
    case ArgType::Str: {
      Arg a = want == ArgType::Path ? Arg::path(c.quoted()) : Arg::str(c.quoted());
      return a;
    }
    case ArgType::Fd: {
      c.expect('$');
      return Arg::fd(c.integer());
    }
    case ArgType::Num:
      return Arg::number(c.integer());
    case ArgType::OpenFlag: {
      std::string f = c.ident();
      if (!is_open_flag(f)) c.fail("expected open flag, got '" + f + "'");
      return Arg::open_flag(f);
    }
    case ArgType::Whence: {
      std::string w = c.ident();
      if (!is_whence(w)) c.fail("expected whence, got '" + w + "'");
      return Arg::whence(w);
    }
    case ArgType::Bytes: {
      c.skip_ws();
      if (c.s.compare(c.pos, 2, "h:") != 0) c.fail("expected h:<hex> payload");
      c.pos += 2;
      size_t start = c.pos;
      while (c.pos < c.s.size() && std::isxdigit(static_cast<unsigned char>(c.s[c.pos]))) ++c.pos;
      if ((c.pos - start) % 2) c.fail("hex payload has odd length");
      return Arg::payload(from_hex(c.s.substr(start, c.pos - start)));
    }
  }
  c.fail("bad argument type");
}

}  // namespace

OpProgram parse_program(const std::string& text) {
  OpProgram p;
  std::istringstream in(text);
  std::string raw;
  size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    Cursor c{raw, 0, lineno};
    if (c.at_end()) continue;
    if (c.peek() == '#') continue;

    FileOp op;
    std::string name = c.ident();
    auto kind = kind_from_name(name);
    if (!kind) c.fail("unknown op '" + name + "'");
    op.kind = *kind;
    const OpSchema& schema = schema_for(op.kind);

    c.expect('(');
    for (size_t i = 0; i < schema.args.size(); ++i) {
      if (i) c.expect(',');
      op.args.push_back(parse_arg(c, schema.args[i]));
    }
    c.expect(')');

    if (!c.at_end()) {
      c.expect('-');
      c.expect('>');
      c.expect('$');
      int64_t slot = c.integer();
      if (!schema.has_result) c.fail("'" + name + "' does not bind a result");
      op.result_slot = static_cast<int32_t>(slot);
    } else if (schema.has_result) {
      c.fail("'" + name + "' requires '-> $N'");
    }
    if (!c.at_end()) c.fail("trailing characters");
    p.ops.push_back(std::move(op));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Effects

namespace {

// Moves entry old_path (and its subtree when it is a directory) to new_path.
void move_entry(FsStatus& s, const std::string& oldp, const std::string& newp) {
  std::map<std::string, Entry> moved;
  for (auto it = s.entries.begin(); it != s.entries.end();) {
    const std::string& k = it->first;
    if (k == oldp) {
      moved[newp] = std::move(it->second);
      it = s.entries.erase(it);
    } else if (k.size() > oldp.size() && k.compare(0, oldp.size(), oldp) == 0 &&
               k[oldp.size()] == '/') {
      moved[newp + k.substr(oldp.size())] = std::move(it->second);
      it = s.entries.erase(it);
    } else {
      ++it;
    }
  }
  for (auto& [k, v] : moved) s.entries[k] = std::move(v);
}

bool dir_has_children(const FsStatus& s, const std::string& dir) {
  std::string prefix = dir == "/" ? "/" : dir + "/";
  for (const auto& [k, v] : s.entries)
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0 &&
        k.find('/', prefix.size()) == std::string::npos)
      return true;
  return false;
}

}  // namespace

void apply_effect(FsStatus& s, const FileOp& op) {
  auto entry = [&](const std::string& p) -> Entry* {
    auto it = s.entries.find(p);
    return it == s.entries.end() ? nullptr : &it->second;
  };
  switch (op.kind) {
    case OpKind::open: {
      Entry* e = entry(op.args[0].s);
      if (e && e->kind == EntryKind::File && op.result_slot >= 0) {
        e->open_fds.insert(op.result_slot);
        s.next_slot = std::max(s.next_slot, op.result_slot + 1);
      }
      break;
    }
    case OpKind::close: {
      for (auto& [p, e] : s.entries) e.open_fds.erase(static_cast<int>(op.args[0].num));
      break;
    }
    case OpKind::link: {
      Entry* src = entry(op.args[0].s);
      if (src && src->kind == EntryKind::File && !entry(op.args[1].s))
        s.entries[op.args[1].s] = Entry{EntryKind::File, {}, src->xattrs};
      break;
    }
    case OpKind::symlink: {
      if (!entry(op.args[1].s)) s.entries[op.args[1].s] = Entry{EntryKind::Symlink, {}, {}};
      break;
    }
    case OpKind::unlink: {
      Entry* e = entry(op.args[0].s);
      if (e && e->kind != EntryKind::Dir) s.entries.erase(op.args[0].s);
      break;
    }
    case OpKind::mkdir: {
      if (!entry(op.args[0].s)) s.entries[op.args[0].s] = Entry{EntryKind::Dir, {}, {}};
      break;
    }
    case OpKind::rmdir: {
      Entry* e = entry(op.args[0].s);
      if (e && e->kind == EntryKind::Dir && op.args[0].s != "/" &&
          !dir_has_children(s, op.args[0].s))
        s.entries.erase(op.args[0].s);
      break;
    }
    case OpKind::rename: {
      const std::string& oldp = op.args[0].s;
      const std::string& newp = op.args[1].s;
      if (entry(oldp) && oldp != "/" && newp != "/" && oldp != newp &&
          newp.compare(0, oldp.size() + 1, oldp + "/") != 0) {
        s.entries.erase(newp);
        move_entry(s, oldp, newp);
      }
      break;
    }
    case OpKind::setxattr: {
      Entry* e = entry(op.args[0].s);
      if (e) e->xattrs.insert(op.args[1].s);
      break;
    }
    case OpKind::removexattr: {
      Entry* e = entry(op.args[0].s);
      if (e) e->xattrs.erase(op.args[1].s);
      break;
    }
    default:
      break;  // reads, seeks, syncs, stats, truncates: no status change
  }
}

FsStatus replay_status(const FsStatus& initial, const OpProgram& p, size_t upto_op) {
  FsStatus s = initial;
  size_t n = std::min(upto_op, p.ops.size());
  for (size_t i = 0; i < n; ++i) apply_effect(s, p.ops[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Validity

bool is_valid(const OpProgram& p, const FsStatus& initial, std::string* why) {
  auto fail = [&](size_t i, const std::string& what) {
    if (why) *why = "op " + std::to_string(i) + ": " + what;
    return false;
  };
  std::vector<bool> slot_open;
  slot_open.resize(static_cast<size_t>(std::max(initial.next_slot, 0)), false);
  // Slots already live in the initial status count as open.
  for (const auto& [path, e] : initial.entries)
    for (int fd : e.open_fds)
      if (fd >= 0 && static_cast<size_t>(fd) < slot_open.size()) slot_open[fd] = true;
  int next_slot = initial.next_slot;

  for (size_t i = 0; i < p.ops.size(); ++i) {
    const FileOp& op = p.ops[i];
    const OpSchema& schema = schema_for(op.kind);
    if (op.args.size() != schema.args.size()) return fail(i, "arity mismatch");
    for (size_t a = 0; a < op.args.size(); ++a) {
      const Arg& arg = op.args[a];
      if (arg.type != schema.args[a]) return fail(i, "argument type mismatch");
      switch (arg.type) {
        case ArgType::Path:
          if (arg.s.empty() || arg.s[0] != '/') return fail(i, "path not rooted");
          break;
        case ArgType::Fd:
          if (arg.num < 0 || static_cast<size_t>(arg.num) >= slot_open.size() ||
              !slot_open[static_cast<size_t>(arg.num)])
            return fail(i, "fd slot not open");
          break;
        case ArgType::Num:
          break;
        case ArgType::OpenFlag:
          if (!is_open_flag(arg.s)) return fail(i, "bad open flag");
          break;
        case ArgType::Whence:
          if (!is_whence(arg.s)) return fail(i, "bad whence");
          break;
        case ArgType::Str:
          if (arg.s.empty()) return fail(i, "empty string arg");
          break;
        case ArgType::Bytes:
          break;
      }
    }
    // Byte-count caps: read/write style sizes and payload lengths.
    auto check_count = [&](size_t idx) {
      return op.args[idx].num >= 0 && op.args[idx].num <= kMaxByteCount;
    };
    switch (op.kind) {
      case OpKind::read:
      case OpKind::write:
      case OpKind::pread64:
      case OpKind::pwrite64:
      case OpKind::listxattr:
        if (!check_count(1)) return fail(i, "byte count out of range");
        break;
      case OpKind::getxattr:
        if (!check_count(2)) return fail(i, "byte count out of range");
        break;
      case OpKind::setxattr:
        if (op.args[2].bytes.size() > static_cast<size_t>(kMaxByteCount))
          return fail(i, "payload too large");
        break;
      default:
        break;
    }
    if (schema.has_result) {
      if (op.result_slot != next_slot) return fail(i, "result slot not sequential");
      slot_open.resize(static_cast<size_t>(next_slot) + 1, false);
      slot_open[static_cast<size_t>(next_slot)] = true;
      ++next_slot;
    } else if (op.result_slot != -1) {
      return fail(i, "unexpected result slot");
    }
    if (op.kind == OpKind::close) {
      slot_open[static_cast<size_t>(op.args[0].num)] = false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Generation helpers

namespace {

std::vector<int> open_slots(const FsStatus& s) {
  std::set<int> acc;
  for (const auto& [p, e] : s.entries) acc.insert(e.open_fds.begin(), e.open_fds.end());
  return {acc.begin(), acc.end()};
}

std::vector<std::string> paths_of_kind(const FsStatus& s, std::optional<EntryKind> k) {
  std::vector<std::string> out;
  for (const auto& [p, e] : s.entries)
    if (!k || e.kind == *k) out.push_back(p);
  return out;
}

std::vector<std::string> empty_dirs(const FsStatus& s) {
  std::vector<std::string> out;
  for (const auto& [p, e] : s.entries)
    if (e.kind == EntryKind::Dir && p != "/" && !dir_has_children(s, p)) out.push_back(p);
  return out;
}

std::string fresh_path(const FsStatus& s, Rng& rng, char prefix) {
  auto dirs = paths_of_kind(s, EntryKind::Dir);
  const std::string& dir = dirs[rng.below(dirs.size())];
  std::string base = dir == "/" ? dir : dir + "/";
  uint64_t n = rng.below(100);
  for (int tries = 0; tries < 200; ++tries, ++n) {
    std::string cand = base + prefix + std::to_string(n);
    if (!s.entries.count(cand)) return cand;
  }
  return base + prefix + "fallback" + std::to_string(rng.next_u64() & 0xFFFF);
}

std::string fresh_xattr_name(Rng& rng) { return "user.a" + std::to_string(rng.below(30)); }

int64_t draw_count(Rng& rng) {
  static const int64_t pool[] = {0, 1, 16, 64, 127, 128, 512, 4096, 65536};
  return pool[rng.below(std::size(pool))];
}

int64_t draw_offset(Rng& rng) {
  static const int64_t pool[] = {0, 1, 8, 511, 512, 1024, 4095, 4096, 1 << 20};
  return pool[rng.below(std::size(pool))];
}

Bytes draw_payload(Rng& rng) {
  static const size_t sizes[] = {0, 1, 8, 11, 32, 127, 255, 1024};
  size_t n = sizes[rng.below(std::size(sizes))];
  Bytes b(n);
  for (auto& c : b) c = rng.byte();
  return b;
}

// Picks a context-valid op of a feasible kind; returns nullopt when the drawn
// kind has no valid arguments in this status.
std::optional<FileOp> build_op(OpKind kind, const FsStatus& s, Rng& rng) {
  auto pick = [&](const std::vector<std::string>& v) -> std::optional<std::string> {
    if (v.empty()) return std::nullopt;
    return v[rng.below(v.size())];
  };
  auto files = paths_of_kind(s, EntryKind::File);
  auto any = paths_of_kind(s, std::nullopt);
  auto fds = open_slots(s);

  FileOp op;
  op.kind = kind;
  switch (kind) {
    case OpKind::open: {
      auto p = pick(files);
      if (!p) return std::nullopt;
      const char* flags[] = {"RDONLY", "WRONLY", "RDWR"};
      op.args = {Arg::path(*p), Arg::open_flag(flags[rng.below(3)])};
      op.result_slot = s.next_slot;
      return op;
    }
    case OpKind::close:
    case OpKind::fsync:
    case OpKind::fdatasync: {
      if (fds.empty()) return std::nullopt;
      op.args = {Arg::fd(fds[rng.below(fds.size())])};
      return op;
    }
    case OpKind::read:
    case OpKind::write: {
      if (fds.empty()) return std::nullopt;
      op.args = {Arg::fd(fds[rng.below(fds.size())]), Arg::number(draw_count(rng))};
      return op;
    }
    case OpKind::pread64:
    case OpKind::pwrite64: {
      if (fds.empty()) return std::nullopt;
      op.args = {Arg::fd(fds[rng.below(fds.size())]), Arg::number(draw_count(rng)),
                 Arg::number(draw_offset(rng))};
      return op;
    }
    case OpKind::lseek: {
      if (fds.empty()) return std::nullopt;
      const char* wh[] = {"SET", "CUR", "END"};
      op.args = {Arg::fd(fds[rng.below(fds.size())]), Arg::number(draw_offset(rng)),
                 Arg::whence(wh[rng.below(3)])};
      return op;
    }
    case OpKind::ftruncate: {
      if (fds.empty()) return std::nullopt;
      op.args = {Arg::fd(fds[rng.below(fds.size())]), Arg::number(draw_offset(rng))};
      return op;
    }
    case OpKind::truncate: {
      auto p = pick(files);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p), Arg::number(draw_offset(rng))};
      return op;
    }
    case OpKind::link: {
      auto p = pick(files);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p), Arg::path(fresh_path(s, rng, 'f'))};
      return op;
    }
    case OpKind::symlink: {
      auto target = pick(any);
      if (!target) return std::nullopt;
      op.args = {Arg::path(*target), Arg::path(fresh_path(s, rng, 's'))};
      return op;
    }
    case OpKind::unlink: {
      std::vector<std::string> cands;
      for (const auto& [p, e] : s.entries)
        if (e.kind != EntryKind::Dir) cands.push_back(p);
      auto p = pick(cands);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p)};
      return op;
    }
    case OpKind::mkdir: {
      op.args = {Arg::path(fresh_path(s, rng, 'd'))};
      return op;
    }
    case OpKind::rmdir: {
      auto p = pick(empty_dirs(s));
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p)};
      return op;
    }
    case OpKind::rename: {
      std::vector<std::string> cands;
      for (const auto& [p, e] : s.entries)
        if (p != "/") cands.push_back(p);
      auto p = pick(cands);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p), Arg::path(fresh_path(s, rng, 'r'))};
      return op;
    }
    case OpKind::stat:
    case OpKind::lstat:
    case OpKind::utimes: {
      auto p = pick(any);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p)};
      return op;
    }
    case OpKind::setxattr: {
      auto p = pick(any);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p), Arg::str("user.a" + std::to_string(rng.below(30))),
                 Arg::payload(draw_payload(rng)), Arg::number(static_cast<int64_t>(rng.below(3)))};
      return op;
    }
    case OpKind::getxattr:
    case OpKind::removexattr: {
      std::vector<std::pair<std::string, std::string>> cands;
      for (const auto& [p, e] : s.entries)
        for (const auto& x : e.xattrs) cands.emplace_back(p, x);
      if (cands.empty()) {
        // Fall back to probing a random name; still context-valid (errno op).
        auto p = pick(any);
        if (!p) return std::nullopt;
        op.args = {Arg::path(*p), Arg::str(fresh_xattr_name(rng))};
      } else {
        auto& [p, x] = cands[rng.below(cands.size())];
        op.args = {Arg::path(p), Arg::str(x)};
      }
      if (kind == OpKind::getxattr) op.args.push_back(Arg::number(draw_count(rng)));
      return op;
    }
    case OpKind::listxattr: {
      auto p = pick(any);
      if (!p) return std::nullopt;
      op.args = {Arg::path(*p), Arg::number(draw_count(rng))};
      return op;
    }
  }
  return std::nullopt;
}

}  // namespace

OpProgram generate_op(const OpProgram& p, const FsStatus& initial, uint64_t seed) {
  Rng rng(seed);
  FsStatus s = replay_status(initial, p, p.ops.size());
  const auto& schemas = op_schemas();
  for (int tries = 0; tries < 64; ++tries) {
    OpKind kind = schemas[rng.below(schemas.size())].kind;
    auto op = build_op(kind, s, rng);
    if (!op) continue;
    OpProgram out = p;
    out.ops.push_back(std::move(*op));
    if (is_valid(out, initial)) return out;
  }
  // mkdir is always feasible.
  OpProgram out = p;
  auto op = build_op(OpKind::mkdir, s, rng);
  out.ops.push_back(std::move(*op));
  return out;
}

OpProgram mutate_program(const OpProgram& p, const FsStatus& initial, uint64_t seed) {
  Rng rng(seed);
  if (p.ops.empty()) return generate_op(p, initial, rng.next_u64());

  for (int tries = 0; tries < 16; ++tries) {
    size_t i = rng.below(p.ops.size());
    FsStatus at = replay_status(initial, p, i);
    // Rebuild the op in the context it executes in, keeping its kind. For
    // open the original slot binding is kept so later fds stay valid.
    auto repl = build_op(p.ops[i].kind, at, rng);
    if (!repl) continue;
    repl->result_slot = p.ops[i].result_slot;
    if (*repl == p.ops[i]) continue;
    OpProgram out = p;
    out.ops[i] = std::move(*repl);
    if (is_valid(out, initial)) return out;
  }
  return generate_op(p, initial, rng.next_u64());
}

}  // namespace papora::prog
