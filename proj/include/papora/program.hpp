#pragma once

// Syscall programs executed against a mounted volume, plus the lightweight
// file-system status model that keeps mutation and generation context-aware.
//
// Text form, one op per line:
//   open("/a", RDWR) -> $0
//   setxattr("/a", "user.x", h:00ff.., 1)
// Paths and xattr names are double-quoted, fd arguments are $N symbolic slots
// bound by an earlier open's result slot, payloads are h:<hex>.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "papora/bytes.hpp"
#include "papora/rng.hpp"

namespace papora::prog {

enum class OpKind {
  open, close, read, pread64, write, pwrite64, lseek, truncate, ftruncate,
  fsync, fdatasync, link, symlink, unlink, mkdir, rmdir, rename, stat, lstat,
  setxattr, getxattr, listxattr, removexattr, utimes,
};

enum class ArgType { Path, Str, Fd, Num, OpenFlag, Whence, Bytes };

struct Arg {
  ArgType type = ArgType::Num;
  std::string s;    // Path / Str / OpenFlag / Whence
  int64_t num = 0;  // Num value or Fd slot index
  Bytes bytes;      // Bytes payload

  static Arg path(std::string p) { return {ArgType::Path, std::move(p), 0, {}}; }
  static Arg str(std::string v) { return {ArgType::Str, std::move(v), 0, {}}; }
  static Arg fd(int64_t slot) { return {ArgType::Fd, "", slot, {}}; }
  static Arg number(int64_t v) { return {ArgType::Num, "", v, {}}; }
  static Arg open_flag(std::string f) { return {ArgType::OpenFlag, std::move(f), 0, {}}; }
  static Arg whence(std::string w) { return {ArgType::Whence, std::move(w), 0, {}}; }
  static Arg payload(Bytes b) { return {ArgType::Bytes, "", 0, std::move(b)}; }

  bool operator==(const Arg&) const = default;
};

struct FileOp {
  OpKind kind = OpKind::stat;
  std::vector<Arg> args;
  int32_t result_slot = -1;  // set for open only

  bool operator==(const FileOp&) const = default;
};

struct OpProgram {
  std::vector<FileOp> ops;

  bool operator==(const OpProgram&) const = default;
};

// Per-kind argument schema; generation, mutation and the parser all follow it.
struct OpSchema {
  OpKind kind;
  const char* name;
  std::vector<ArgType> args;
  bool has_result;  // binds a new fd slot
};

const std::vector<OpSchema>& op_schemas();
const OpSchema& schema_for(OpKind k);
std::optional<OpKind> kind_from_name(const std::string& name);

// Byte counts carried by read/write style ops never exceed this.
constexpr int64_t kMaxByteCount = 64 * 1024;

// ---------------------------------------------------------------------------
// File-system status

enum class EntryKind { File, Dir, Symlink };

inline const char* to_string(EntryKind k) {
  switch (k) {
    case EntryKind::File: return "file";
    case EntryKind::Dir: return "dir";
    case EntryKind::Symlink: return "symlink";
  }
  return "?";
}

struct Entry {
  EntryKind kind = EntryKind::File;
  std::set<int> open_fds;
  std::set<std::string> xattrs;

  bool operator==(const Entry&) const = default;
};

struct FsStatus {
  std::map<std::string, Entry> entries;  // absolute path -> entry; "/" always present
  int next_slot = 0;

  static FsStatus with_root() {
    FsStatus s;
    s.entries["/"] = Entry{EntryKind::Dir, {}, {}};
    return s;
  }

  bool operator==(const FsStatus&) const = default;
};

// ---------------------------------------------------------------------------
// Text round-trip

std::string serialize_program(const OpProgram& p);

struct ParseError : std::runtime_error {
  explicit ParseError(size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  size_t line;
};

OpProgram parse_program(const std::string& text);

std::string serialize_op(const FileOp& op);

// ---------------------------------------------------------------------------
// Effects, mutation, generation

// Folds one op into the status. Pre: the op is context-valid for s (see
// is_valid); on out-of-context input this is a tolerant no-op so replay of
// stale programs cannot corrupt the model.
void apply_effect(FsStatus& s, const FileOp& op);

FsStatus replay_status(const FsStatus& initial, const OpProgram& p, size_t upto_op);

// Internal validity used by mutate/generate retry loops: schema arity and
// types, paths rooted at '/', fd slots opened before use and not yet closed,
// byte counts within kMaxByteCount, result slots dense in creation order.
bool is_valid(const OpProgram& p, const FsStatus& initial, std::string* why = nullptr);

// Rewrites the arguments of exactly one op, context-sensitively: fd args are
// redrawn from slots open at that program point, paths from entries present
// there, numbers from a boundary pool. Falls back to appending a generated op
// when no in-place rewrite validates.
OpProgram mutate_program(const OpProgram& p, const FsStatus& initial, uint64_t seed);

// Appends one context-valid op drawn from the kinds feasible in the status
// reached after p. mkdir is always feasible, so generation cannot get stuck.
OpProgram generate_op(const OpProgram& p, const FsStatus& initial, uint64_t seed);

}  // namespace papora::prog
