#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "papora/forge.hpp"
#include "papora/fuzzer.hpp"
#include "papora/program.hpp"

using namespace papora;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  explicit TmpDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("papora_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

void put_file(const fs::path& p, ByteSpan data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  REQUIRE(bool(out));
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
}

void put_text(const fs::path& p, const std::string& s) {
  put_file(p, ByteSpan(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

std::string get_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_case_bundle(const fs::path& dir, forge::Case c) {
  forge::CraftedCase cc = forge::craft_case(c);
  fs::create_directories(dir);
  put_file(dir / "case.img", cc.image);
  put_text(dir / "program.txt", prog::serialize_program(cc.program));
}

void write_all_cases(const fs::path& seed_dir) {
  for (forge::Case c : forge::all_cases()) write_case_bundle(seed_dir / forge::case_name(c), c);
}

const std::set<std::string> kCraftedIds = {
    "NPD_fill_super_shift",        "OOB_Read_enum_attr_overflow", "NPD_root_iop",
    "OOB_Write_attr_list_copy",    "OOB_Read_hdr_find_e",
};

}  // namespace

TEST_CASE("seed dry runs surface every crafted case") {
  TmpDir seeds("seeds_crafted");
  TmpDir findings("findings_crafted");
  write_all_cases(seeds.path);

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.findings_dir = findings.path.string();
  cfg.mode = Mode::Vulnerable;
  cfg.iterations = 0;  // dry runs only
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);

  CHECK(rep.executions == 5);
  CHECK(rep.harness_violations == 0);
  REQUIRE(rep.findings.size() == 5);
  std::set<std::string> ids;
  for (const fuzz::Finding& f : rep.findings) {
    ids.insert(f.id);
    CHECK(f.iteration == 0);
    REQUIRE(!f.bundle_dir.empty());
    for (const char* name :
         {"base.img", "corpus.ppra", "mutations.log", "program.txt", "outcome.txt"})
      CHECK(fs::is_regular_file(fs::path(f.bundle_dir) / name));
    CHECK(fs::path(f.bundle_dir).filename().string() == f.id);
  }
  CHECK(ids == kCraftedIds);

  // crash totals match bundles on disk
  size_t bundles = 0;
  for (const auto& de : fs::directory_iterator(findings.path))
    if (de.is_directory()) bundles++;
  CHECK(bundles == rep.findings.size());
}

TEST_CASE("hardened campaign reports no findings") {
  TmpDir seeds("seeds_hardened");
  TmpDir findings("findings_hardened");
  write_all_cases(seeds.path);
  put_file(seeds.path / "clean.img", forge::build_image(forge::ForgeSpec::defaults()));

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.findings_dir = findings.path.string();
  cfg.mode = Mode::Hardened;
  cfg.iterations = 300;
  cfg.mutation.rng_seed = 1;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);

  CHECK(rep.findings.empty());
  CHECK(rep.harness_violations == 0);
  CHECK(rep.executions == 6 + 300);  // 6 dry runs + 300 rounds
  CHECK(fs::is_empty(findings.path));
}

TEST_CASE("bundles reproduce to the recorded id") {
  TmpDir seeds("seeds_repro");
  TmpDir findings("findings_repro");
  write_all_cases(seeds.path);

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.findings_dir = findings.path.string();
  cfg.mode = Mode::Vulnerable;
  cfg.iterations = 0;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);
  REQUIRE(rep.findings.size() == 5);

  for (const fuzz::Finding& f : rep.findings) {
    fuzz::ReproResult rr = fuzz::reproduce(f.bundle_dir);
    CHECK(rr.match);
    CHECK(rr.expected_id == f.id);
    CHECK(fuzz::outcome_id(rr.outcome) == f.id);
    CHECK(f.reproduce_cmd == "papora repro --bundle " + f.bundle_dir);
    // the attribute-list overwrite is driven by its setxattr program
    if (f.id == "OOB_Write_attr_list_copy")
      CHECK(get_text(fs::path(f.bundle_dir) / "program.txt").find("setxattr") !=
            std::string::npos);
  }
}

TEST_CASE("tampered bundles fail to reproduce") {
  TmpDir seeds("seeds_tamper");
  TmpDir findings("findings_tamper");
  write_case_bundle(seeds.path / "index_used_oob_read", forge::Case::IndexUsedOverrun);

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.findings_dir = findings.path.string();
  cfg.mode = Mode::Vulnerable;
  cfg.iterations = 0;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);
  REQUIRE(rep.findings.size() == 1);
  fs::path bundle = rep.findings[0].bundle_dir;

  SUBCASE("swapped program no longer triggers the crash") {
    put_text(bundle / "program.txt", "");
    fuzz::ReproResult rr = fuzz::reproduce(bundle.string());
    CHECK(!rr.match);
  }
  SUBCASE("edited finding id no longer matches") {
    std::string txt = get_text(bundle / "outcome.txt");
    size_t pos = txt.find("id=OOB_Read_hdr_find_e");
    REQUIRE(pos != std::string::npos);
    txt.replace(pos, 22, "id=OOB_Read_somewhere!");
    put_text(bundle / "outcome.txt", txt);
    fuzz::ReproResult rr = fuzz::reproduce(bundle.string());
    CHECK(!rr.match);
  }
  SUBCASE("corrupt mutation log throws") {
    put_text(bundle / "mutations.log", "bitflip 0 2 ff\n");
    CHECK_THROWS(fuzz::reproduce(bundle.string()));
  }
  SUBCASE("missing corpus throws") {
    fs::remove(bundle / "corpus.ppra");
    CHECK_THROWS(fuzz::reproduce(bundle.string()));
  }
}

TEST_CASE("single-worker campaigns are deterministic and dedup findings") {
  TmpDir seeds("seeds_det");
  put_file(seeds.path / "seed.img", forge::build_image(forge::ForgeSpec::defaults()));

  auto run_once = [&](const fs::path& out) {
    fuzz::CampaignConfig cfg;
    cfg.seed_dir = seeds.path.string();
    cfg.findings_dir = out.string();
    cfg.mode = Mode::Vulnerable;
    cfg.iterations = 800;
    cfg.mutation.rng_seed = 0xC0FFEE;
    return fuzz::run_campaign(cfg);
  };
  TmpDir fa("findings_det_a");
  TmpDir fb("findings_det_b");
  fuzz::CampaignReport a = run_once(fa.path);
  fuzz::CampaignReport b = run_once(fb.path);

  CHECK(a.executions == 801);
  CHECK(b.executions == 801);
  CHECK(a.coverage_size == b.coverage_size);
  CHECK(a.queue_added == b.queue_added);
  CHECK(a.queue_added > 0);  // mutants that grew coverage joined the queue
  REQUIRE(a.findings.size() == b.findings.size());
  std::set<std::string> ids;
  for (size_t i = 0; i < a.findings.size(); i++) {
    CHECK(a.findings[i].id == b.findings[i].id);
    CHECK(a.findings[i].iteration == b.findings[i].iteration);
    ids.insert(a.findings[i].id);
  }
  CHECK(ids.size() == a.findings.size());  // one finding per id
  CHECK(a.harness_violations == 0);
}

TEST_CASE("multi-worker campaign completes every claimed round") {
  TmpDir seeds("seeds_mt");
  put_file(seeds.path / "seed.img", forge::build_image(forge::ForgeSpec::defaults()));

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.mode = Mode::Hardened;
  cfg.iterations = 120;
  cfg.workers = 3;
  cfg.mutation.rng_seed = 7;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);
  CHECK(rep.executions == 121);
  CHECK(rep.findings.empty());
}

TEST_CASE("campaigns demand a usable configuration") {
  TmpDir empty("seeds_empty");
  fuzz::CampaignConfig cfg;
  cfg.seed_dir = (empty.path / "nope").string();
  CHECK_THROWS_AS(fuzz::run_campaign(cfg), std::runtime_error);
  cfg.seed_dir = empty.path.string();
  CHECK_THROWS_AS(fuzz::run_campaign(cfg), std::runtime_error);
  TmpDir seeds("seeds_badcfg");
  put_file(seeds.path / "seed.img", forge::build_image(forge::ForgeSpec::defaults()));
  cfg.seed_dir = seeds.path.string();
  cfg.workers = 0;
  CHECK_THROWS_AS(fuzz::run_campaign(cfg), std::runtime_error);
  cfg.workers = 1;
  cfg.program_ratio = 1.5;
  CHECK_THROWS_AS(fuzz::run_campaign(cfg), std::runtime_error);
}

TEST_CASE("ppra seeds join the queue with their program") {
  TmpDir seeds("seeds_ppra");
  Bytes img = forge::build_image(forge::ForgeSpec::defaults());
  put_file(seeds.path / "base.img", img);
  corpus::Corpus cp = corpus::extract_corpus(img);
  cp.base_image = "base.img";
  prog::OpProgram p;
  p.ops.push_back({prog::OpKind::stat, {prog::Arg::path("/a")}, -1});
  cp.program = p;
  corpus::save_file(cp, seeds.path / "seed.ppra");

  fuzz::CampaignConfig cfg;
  cfg.seed_dir = seeds.path.string();
  cfg.mode = Mode::Hardened;
  cfg.iterations = 50;
  cfg.mutation.rng_seed = 11;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);
  // base.img dry run + seed.ppra dry run + 50 rounds
  CHECK(rep.executions == 52);
  CHECK(rep.findings.empty());
}
