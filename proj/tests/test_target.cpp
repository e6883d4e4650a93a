#include "doctest.h"

#include <string>
#include <vector>

#include "papora/corpus.hpp"
#include "papora/forge.hpp"
#include "papora/target.hpp"

using namespace papora;
using prog::Arg;
using prog::FileOp;
using prog::OpKind;

namespace {

const Bytes& default_image() {
  static Bytes img = forge::build_image(forge::ForgeSpec::defaults());
  return img;
}

target::MountResult mount(ByteSpan img, Mode mode = Mode::Hardened,
                          CoverageSet* cov = nullptr) {
  target::TargetConfig cfg;
  cfg.mode = mode;
  return target::mount_image(img, cfg, cov);
}

target::RunResult run(ByteSpan img, const prog::OpProgram& p, Mode mode) {
  target::TargetConfig cfg;
  cfg.mode = mode;
  return target::run_case(img, p, cfg);
}

FileOp op_open(std::string p, std::string flag, int slot) {
  FileOp op;
  op.kind = OpKind::open;
  op.args = {Arg::path(std::move(p)), Arg::open_flag(std::move(flag))};
  op.result_slot = slot;
  return op;
}

FileOp make(OpKind k, std::vector<Arg> args) {
  FileOp op;
  op.kind = k;
  op.args = std::move(args);
  return op;
}

// Image offset of record `rec` in the default geometry.
size_t rec_off(ByteSpan img, uint32_t rec) {
  auto boot = ondisk::decode_boot(img.subspan(0, ondisk::kBootSize));
  uint64_t cluster = uint64_t(boot.bytes_per_sector) * boot.sectors_per_cluster();
  return size_t(boot.mft_cluster * cluster + rec * 1024ull);
}

}  // namespace

TEST_CASE("pristine mount succeeds and reports stage coverage") {
  CoverageSet cov;
  auto m = mount(default_image(), Mode::Hardened, &cov);
  REQUIRE(m.outcome.is_ok());
  CHECK(cov.count("mount:decode_boot"));
  CHECK(cov.count("mount:load_mft"));
  CHECK(cov.count("mount:load_root"));
  CHECK(cov.count("mount:ok"));
  CHECK(cov.count("check:boot_magic"));
  CHECK(cov.count("check:record_size_range"));
  CHECK(cov.count("attr:30"));
  CHECK(cov.count("attr:80"));
  for (const auto& key : cov) CHECK(key.find(":fired") == std::string::npos);
}

TEST_CASE("empty program runs to the rostered status") {
  auto rr = run(default_image(), {}, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.ops_executed == 0);
  CHECK(rr.status.entries.count("/"));
  CHECK(rr.status.entries.count("/a"));
  CHECK(rr.status.entries.count("/d"));
}

TEST_CASE("boot sector damage maps to named validation errors") {
  const Bytes& base = default_image();

  struct Damage {
    const char* expect;
    void (*apply)(Bytes&);
  };
  const Damage table[] = {
      {"boot_magic", [](Bytes& b) { wr_u16(b, ondisk::kBootEndMarkerOff, 0); }},
      {"boot_oem", [](Bytes& b) { b[ondisk::kBootOemOff] = 'X'; }},
      {"boot_geometry", [](Bytes& b) { wr_u16(b, ondisk::kBootBytesPerSectorOff, 300); }},
      {"boot_geometry", [](Bytes& b) { b[ondisk::kBootSectorsPerClusterOff] = 0; }},
      {"boot_geometry", [](Bytes& b) { wr_u64(b, ondisk::kBootTotalSectorsOff, 0); }},
      {"mft_extent", [](Bytes& b) { wr_u64(b, ondisk::kBootMftClusterOff, 1ull << 20); }},
      {"record_size_range", [](Bytes& b) { b[ondisk::kBootRecordSizeRawOff] = 0x7F; }},
      {"index_size_range", [](Bytes& b) { b[ondisk::kBootIndexSizeRawOff] = 0x81; }},
  };
  for (const auto& d : table) {
    CAPTURE(d.expect);
    Bytes img = base;
    d.apply(img);
    for (Mode mode : {Mode::Hardened, Mode::Vulnerable}) {
      auto m = mount(img, mode);
      REQUIRE(m.outcome.is_validation());
      CHECK(m.outcome.id == d.expect);
    }
  }

  Bytes tiny(100, 0);
  auto m = mount(tiny);
  REQUIRE(m.outcome.is_validation());
  CHECK(m.outcome.id == "boot_magic");
}

TEST_CASE("MFT damage maps to named validation errors") {
  const Bytes& base = default_image();
  size_t mft = rec_off(base, 0);

  SUBCASE("record zero without the FILE signature") {
    Bytes img = base;
    wr_u32(img, mft, 0);
    auto m = mount(img);
    REQUIRE(m.outcome.is_validation());
    CHECK(m.outcome.id == "record_magic");
  }
  SUBCASE("record zero torn") {
    Bytes img = base;
    img[mft + 510] ^= 0xFF;
    auto m = mount(img);
    REQUIRE(m.outcome.is_validation());
    CHECK(m.outcome.id == "record_usa");
  }
  SUBCASE("torn record later in the table") {
    Bytes img = base;
    img[rec_off(base, 17) + 510] ^= 0xFF;
    for (Mode mode : {Mode::Hardened, Mode::Vulnerable}) {
      auto m = mount(img, mode);
      REQUIRE(m.outcome.is_validation());
      CHECK(m.outcome.id == "record_usa");
    }
  }
  SUBCASE("record zero data stream retyped") {
    auto pristine = mount(base);
    REQUIRE(pristine.outcome.is_ok());
    const ondisk::Attribute* data = nullptr;
    for (const auto& a : pristine.volume->records[0]->attributes)
      if (a.type == ondisk::kAttrData) data = &a;
    REQUIRE(data);
    Bytes img = base;
    wr_u32(img, mft + data->rec_off, 0x85);  // unknown attribute type
    auto m = mount(img);
    REQUIRE(m.outcome.is_validation());
    CHECK(m.outcome.id == "mft_load");
  }
  SUBCASE("root record demoted to a file") {
    Bytes img = base;
    wr_u16(img, rec_off(base, 5) + ondisk::kRecFlagsOff, 0x01);
    for (Mode mode : {Mode::Hardened, Mode::Vulnerable}) {
      auto m = mount(img, mode);
      REQUIRE(m.outcome.is_validation());
      CHECK(m.outcome.id == "root_load");
    }
  }
  SUBCASE("root index root value shrunk below the header") {
    auto pristine = mount(base);
    REQUIRE(pristine.outcome.is_ok());
    const ondisk::Attribute* iroot = nullptr;
    for (const auto& a : pristine.volume->records[5]->attributes)
      if (a.type == ondisk::kAttrIndexRoot) iroot = &a;
    REQUIRE(iroot);
    Bytes img = base;
    wr_u32(img, rec_off(base, 5) + iroot->rec_off + 0x10, 8);
    auto m = mount(img);
    REQUIRE(m.outcome.is_validation());
    CHECK(m.outcome.id == "index_root");
  }
}

TEST_CASE("the five crafted cases split by mode and lint with their commits") {
  struct Expect {
    forge::Case which;
    CrashClass crash_class;
    const char* site;
    const char* hardened_id;
    const char* commit;
  };
  const Expect table[] = {
      {forge::Case::RecordSizeNpd, CrashClass::NPD, "fill_super_shift",
       "record_size_range", "0b66046"},
      {forge::Case::AttrSizeWrap, CrashClass::OOB_Read, "enum_attr_overflow",
       "enum_attr_overflow", "e19c627"},
      {forge::Case::RootIndexNpd, CrashClass::NPD, "root_iop", "root_load", "c1ca8ef"},
      {forge::Case::AttrNameListOverflow, CrashClass::OOB_Write, "attr_list_copy",
       "attr_name_bound", "54e4570"},
      {forge::Case::IndexUsedOverrun, CrashClass::OOB_Read, "hdr_find_e",
       "index_hdr_bound", "4d42ecd"},
  };
  for (const auto& e : table) {
    CAPTURE(forge::case_name(e.which));
    forge::CraftedCase cc = forge::craft_case(e.which);

    auto vuln = run(cc.image, cc.program, Mode::Vulnerable);
    REQUIRE(vuln.outcome.is_crash());
    CHECK(vuln.outcome.crash_class == e.crash_class);
    CHECK(vuln.outcome.id == e.site);
    CHECK(vuln.coverage.count(std::string("crash:") + e.site));

    auto hard = run(cc.image, cc.program, Mode::Hardened);
    REQUIRE(hard.outcome.is_validation());
    CHECK(hard.outcome.id == e.hardened_id);

    auto findings = target::lint_image(cc.image);
    bool seen = false;
    for (const auto& f : findings)
      if (f.check == e.hardened_id) {
        seen = true;
        CHECK(f.commit == e.commit);
      }
    CHECK(seen);
  }

  CHECK(target::lint_image(default_image()).empty());
}

TEST_CASE("index block damage surfaces on lookup in both modes") {
  const Bytes& base = default_image();
  corpus::Corpus cp = corpus::extract_corpus(base);
  uint64_t indx = 0;
  bool found = false;
  for (const auto& e : cp.extents)
    if (e.kind == corpus::ExtentKind::IndexBuffer && !found) {
      indx = e.image_offset;
      found = true;
    }
  REQUIRE(found);

  prog::OpProgram p;
  p.ops = {op_open("/a", "RDONLY", 0)};

  SUBCASE("scribbled INDX magic") {
    Bytes img = base;
    wr_u32(img, size_t(indx), 0);
    for (Mode mode : {Mode::Hardened, Mode::Vulnerable}) {
      auto rr = run(img, p, mode);
      REQUIRE(rr.outcome.is_validation());
      CHECK(rr.outcome.id == "index_block");
      CHECK(rr.ops_executed == 1);
    }
  }
  SUBCASE("torn index block") {
    Bytes img = base;
    img[size_t(indx) + 510] ^= 0xFF;
    for (Mode mode : {Mode::Hardened, Mode::Vulnerable}) {
      auto rr = run(img, p, mode);
      REQUIRE(rr.outcome.is_validation());
      CHECK(rr.outcome.id == "index_usa");
    }
  }
  SUBCASE("a reserved record referenced as a directory") {
    Bytes img = base;
    wr_u64(img, size_t(indx) + 0x40, 3);  // first entry ("a") now points at record 3
    wr_u16(img, rec_off(base, 3) + ondisk::kRecFlagsOff, 0x03);  // and 3 claims directory

    auto hard = run(img, p, Mode::Hardened);
    REQUIRE(hard.outcome.is_validation());
    CHECK(hard.outcome.id == "inode_type");

    auto vuln = run(img, p, Mode::Vulnerable);
    REQUIRE(vuln.outcome.is_crash());
    CHECK(vuln.outcome.crash_class == CrashClass::Heap_Corruption);
    CHECK(vuln.outcome.id == "inode_union");

    auto findings = target::lint_image(img);
    bool seen = false;
    for (const auto& f : findings)
      if (f.check == "inode_type") seen = true;
    CHECK_FALSE(seen);  // the gate only fires on lookup, not in the sweep
  }
}

TEST_CASE("runtime deletion wins over the on-disk index") {
  prog::OpProgram p;
  p.ops = {make(OpKind::unlink, {Arg::path("/a")}), op_open("/a", "RDONLY", 0)};
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.ops_executed == 2);
  CHECK(rr.coverage.count("op:unlink:ok"));
  CHECK(rr.coverage.count("op:open:ENOENT"));
  CHECK_FALSE(rr.status.entries.count("/a"));
}

TEST_CASE("directory creation, rename and removal") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::mkdir, {Arg::path("/d/sub")}),
      make(OpKind::stat, {Arg::path("/d/sub")}),
      make(OpKind::rename, {Arg::path("/d"), Arg::path("/e")}),
      make(OpKind::stat, {Arg::path("/e/sub")}),
      make(OpKind::stat, {Arg::path("/d")}),
      make(OpKind::rmdir, {Arg::path("/e")}),
      make(OpKind::rmdir, {Arg::path("/e/sub")}),
      make(OpKind::rmdir, {Arg::path("/e")}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:mkdir:ok"));
  CHECK(rr.coverage.count("op:rename:ok"));
  CHECK(rr.coverage.count("op:stat:ok"));
  CHECK(rr.coverage.count("op:stat:ENOENT"));
  CHECK(rr.coverage.count("op:rmdir:ENOTEMPTY"));
  CHECK(rr.coverage.count("op:rmdir:ok"));
  CHECK_FALSE(rr.status.entries.count("/d"));
  CHECK_FALSE(rr.status.entries.count("/e"));
}

TEST_CASE("rename corner cases") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::rename, {Arg::path("/"), Arg::path("/x")}),
      make(OpKind::rename, {Arg::path("/a"), Arg::path("/a")}),
      make(OpKind::rename, {Arg::path("/a"), Arg::path("/d")}),
      make(OpKind::rename, {Arg::path("/d"), Arg::path("/a")}),
      make(OpKind::rename, {Arg::path("/d"), Arg::path("/d/x")}),
      make(OpKind::rename, {Arg::path("/a"), Arg::path("/nope/x")}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:rename:EBUSY"));
  CHECK(rr.coverage.count("op:rename:ok"));
  CHECK(rr.coverage.count("op:rename:EISDIR"));
  CHECK(rr.coverage.count("op:rename:ENOTDIR"));
  CHECK(rr.coverage.count("op:rename:EINVAL"));
  CHECK(rr.coverage.count("op:rename:ENOENT"));
}

TEST_CASE("symlinks resolve in the final position only") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::symlink, {Arg::path("/a"), Arg::path("/s")}),
      make(OpKind::stat, {Arg::path("/s")}),
      make(OpKind::lstat, {Arg::path("/s")}),
      op_open("/s", "RDONLY", 0),
      make(OpKind::read, {Arg::fd(0), Arg::number(16)}),
      make(OpKind::mkdir, {Arg::path("/s/x")}),
      make(OpKind::symlink, {Arg::path("/l2"), Arg::path("/l1")}),
      make(OpKind::symlink, {Arg::path("/l1"), Arg::path("/l2")}),
      make(OpKind::stat, {Arg::path("/l1")}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:symlink:ok"));
  CHECK(rr.coverage.count("op:stat:ok"));
  CHECK(rr.coverage.count("op:lstat:ok"));
  CHECK(rr.coverage.count("op:open:ok"));
  CHECK(rr.coverage.count("op:read:ok"));
  CHECK(rr.coverage.count("op:mkdir:ENOTDIR"));
  CHECK(rr.coverage.count("op:stat:ELOOP"));
}

TEST_CASE("descriptor semantics") {
  prog::OpProgram p;
  p.ops = {
      op_open("/a", "RDONLY", 0),
      make(OpKind::write, {Arg::fd(0), Arg::number(8)}),
      make(OpKind::ftruncate, {Arg::fd(0), Arg::number(0)}),
      make(OpKind::read, {Arg::fd(0), Arg::number(4)}),
      make(OpKind::fsync, {Arg::fd(0)}),
      make(OpKind::lseek, {Arg::fd(0), Arg::number(-1), Arg::whence("SET")}),
      make(OpKind::lseek, {Arg::fd(0), Arg::number(0), Arg::whence("END")}),
      make(OpKind::close, {Arg::fd(0)}),
      make(OpKind::read, {Arg::fd(0), Arg::number(4)}),
      make(OpKind::close, {Arg::fd(0)}),
      op_open("/d", "RDONLY", 1),
      make(OpKind::read, {Arg::fd(1), Arg::number(4)}),
      op_open("/d", "RDWR", 2),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:write:EBADF"));
  CHECK(rr.coverage.count("op:ftruncate:EINVAL"));
  CHECK(rr.coverage.count("op:read:ok"));
  CHECK(rr.coverage.count("op:fsync:ok"));
  CHECK(rr.coverage.count("op:lseek:EINVAL"));
  CHECK(rr.coverage.count("op:lseek:ok"));
  CHECK(rr.coverage.count("op:close:ok"));
  CHECK(rr.coverage.count("op:read:EBADF"));
  CHECK(rr.coverage.count("op:close:EBADF"));
  CHECK(rr.coverage.count("op:read:EISDIR"));
  CHECK(rr.coverage.count("op:open:EISDIR"));
}

TEST_CASE("reads after unlink keep their record binding") {
  prog::OpProgram p;
  p.ops = {
      op_open("/a", "RDONLY", 0),
      make(OpKind::unlink, {Arg::path("/a")}),
      make(OpKind::read, {Arg::fd(0), Arg::number(4)}),
      make(OpKind::stat, {Arg::path("/a")}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:read:ok"));
  CHECK(rr.coverage.count("op:stat:ENOENT"));
}

TEST_CASE("hard links copy the backing record") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::link, {Arg::path("/a"), Arg::path("/h")}),
      make(OpKind::link, {Arg::path("/a"), Arg::path("/h")}),
      make(OpKind::link, {Arg::path("/d"), Arg::path("/h2")}),
      make(OpKind::unlink, {Arg::path("/a")}),
      op_open("/h", "RDONLY", 0),
      make(OpKind::read, {Arg::fd(0), Arg::number(4)}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:link:ok"));
  CHECK(rr.coverage.count("op:link:EEXIST"));
  CHECK(rr.coverage.count("op:link:EPERM"));
  CHECK(rr.coverage.count("op:read:ok"));
  CHECK(rr.status.entries.count("/h"));
}

TEST_CASE("xattr round trip against the modeled status") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::setxattr, {Arg::path("/a"), Arg::str("user.x"),
                              Arg::payload(Bytes(4, 0x41)), Arg::number(0)}),
      make(OpKind::getxattr, {Arg::path("/a"), Arg::str("user.x"), Arg::number(16)}),
      make(OpKind::listxattr, {Arg::path("/a"), Arg::number(64)}),
      make(OpKind::setxattr, {Arg::path("/a"), Arg::str("user.x"),
                              Arg::payload(Bytes(4, 0x42)), Arg::number(1)}),
      make(OpKind::setxattr, {Arg::path("/a"), Arg::str("user.y"),
                              Arg::payload(Bytes(4, 0x42)), Arg::number(2)}),
      make(OpKind::removexattr, {Arg::path("/a"), Arg::str("user.x")}),
      make(OpKind::getxattr, {Arg::path("/a"), Arg::str("user.x"), Arg::number(16)}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("setxattr:fits"));
  CHECK(rr.coverage.count("op:setxattr:ok"));
  CHECK(rr.coverage.count("op:getxattr:ok"));
  CHECK(rr.coverage.count("op:listxattr:ok"));
  CHECK(rr.coverage.count("op:setxattr:EEXIST"));
  CHECK(rr.coverage.count("op:setxattr:ENODATA"));
  CHECK(rr.coverage.count("op:removexattr:ok"));
  CHECK(rr.coverage.count("op:getxattr:ENODATA"));
}

TEST_CASE("content reads honor sizes and device mapping") {
  forge::ForgeSpec spec = forge::ForgeSpec::defaults();
  spec.tree = {
      {"/d", true, {}, {}},
      {"/d/g", false, Bytes(3000, 0x42), {}},
  };
  Bytes img = forge::build_image(spec);

  auto pristine = mount(img);
  REQUIRE(pristine.outcome.is_ok());
  corpus::Roster roster = corpus::build_roster(pristine.volume->records);
  uint32_t grec = 0;
  for (const auto& [path, rec] : roster.path_to_record)
    if (path == "/d/g") grec = rec;
  REQUIRE(grec >= ondisk::kRecReservedEnd);
  const ondisk::Attribute* data = nullptr;
  for (const auto& a : pristine.volume->records[grec]->attributes)
    if (a.type == ondisk::kAttrData) data = &a;
  REQUIRE(data);
  REQUIRE(data->non_resident);

  prog::OpProgram p;
  p.ops = {
      op_open("/d/g", "RDONLY", 0),
      make(OpKind::read, {Arg::fd(0), Arg::number(8192)}),
      make(OpKind::pread64, {Arg::fd(0), Arg::number(100), Arg::number(2000000)}),
  };
  auto ok = run(img, p, Mode::Hardened);
  REQUIRE(ok.outcome.is_ok());
  CHECK(ok.coverage.count("op:read:ok"));
  CHECK(ok.coverage.count("op:pread64:ok"));

  // Claim a megabyte of data behind the same single-cluster run: reads past
  // the mapped bytes now fail at the device.
  Bytes damaged = img;
  wr_u64(damaged, rec_off(img, grec) + data->rec_off + 0x30, 1u << 20);
  auto io = run(damaged, p, Mode::Hardened);
  REQUIRE(io.outcome.is_ok());
  CHECK(io.coverage.count("op:read:EIO"));
}

TEST_CASE("non-canonical paths earn EINVAL") {
  prog::OpProgram p;
  p.ops = {
      make(OpKind::stat, {Arg::path("/a/")}),
      make(OpKind::stat, {Arg::path("//a")}),
      make(OpKind::mkdir, {Arg::path("/d//x")}),
  };
  auto rr = run(default_image(), p, Mode::Hardened);
  REQUIRE(rr.outcome.is_ok());
  CHECK(rr.coverage.count("op:stat:EINVAL"));
  CHECK(rr.coverage.count("op:mkdir:EINVAL"));
  CHECK_FALSE(rr.coverage.count("op:stat:ok"));
}
