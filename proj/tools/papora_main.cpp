// papora — NTFS on-disk format fuzzing toolkit.
//
// Exit codes: 0 success (or no findings), 1 findings produced (fuzz, lint,
// run hitting a simulated crash), 2 usage or IO error.
// PAPORA_MAX_MFT_BYTES overrides the mount record-size guard.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "papora/corpus.hpp"
#include "papora/forge.hpp"
#include "papora/fuzzer.hpp"
#include "papora/mutator.hpp"
#include "papora/program.hpp"
#include "papora/target.hpp"

namespace fs = std::filesystem;
using namespace papora;

namespace {

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& p) {
  Bytes raw = read_file(p);
  return std::string(raw.begin(), raw.end());
}

void write_file(const fs::path& p, ByteSpan data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  if (!out) throw std::runtime_error("short write to " + p.string());
}

void write_text(const fs::path& p, const std::string& s) {
  write_file(p, ByteSpan(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

std::optional<uint32_t> env_max_mft() {
  const char* v = std::getenv("PAPORA_MAX_MFT_BYTES");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  unsigned long n = std::strtoul(v, &end, 0);
  if (*end || n == 0 || n > (1ul << 30))
    throw std::runtime_error(std::string("bad PAPORA_MAX_MFT_BYTES: ") + v);
  return uint32_t(n);
}

Mode parse_mode(const std::string& m) {
  return m == "hardened" ? Mode::Hardened : Mode::Vulnerable;
}

void write_case_bundle(const fs::path& dir, forge::Case c) {
  forge::CraftedCase cc = forge::craft_case(c);
  fs::create_directories(dir);
  write_file(dir / "case.img", cc.image);
  write_text(dir / "program.txt", prog::serialize_program(cc.program));
  std::cout << "wrote " << (dir / "case.img").string() << "\n";
}

int cmd_forge(const std::string& out, const std::string& which) {
  fs::create_directories(out);
  if (which.empty()) {
    Bytes img = forge::build_image(forge::ForgeSpec::defaults());
    fs::path p = fs::path(out) / "seed.img";
    write_file(p, img);
    std::cout << "wrote " << p.string() << " bytes=" << img.size() << "\n";
    return 0;
  }
  if (which == "all") {
    for (forge::Case c : forge::all_cases())
      write_case_bundle(fs::path(out) / forge::case_name(c), c);
    return 0;
  }
  std::optional<forge::Case> c = forge::case_from_name(which);
  if (!c) throw std::runtime_error("unknown case: " + which);
  write_case_bundle(fs::path(out) / which, *c);
  return 0;
}

int cmd_extract(const std::string& image, const std::string& out) {
  Bytes img = read_file(image);
  corpus::Corpus c = corpus::extract_corpus(img);
  c.base_image = fs::absolute(image).string();
  corpus::save_file(c, out);
  std::cout << "extracted extents=" << c.extents.size() << " metadata_bytes=" << c.metadata.size()
            << " -> " << out << "\n";
  return 0;
}

int cmd_assemble(const std::string& image, const std::string& corpus_path,
                 const std::string& out) {
  Bytes base = read_file(image);
  corpus::Corpus c = corpus::load_file(corpus_path);
  Bytes img = corpus::assemble_image(base, c);
  write_file(out, img);
  std::cout << "assembled " << out << " bytes=" << img.size() << "\n";
  return 0;
}

int cmd_mutate(const std::string& corpus_path, uint64_t seed, const std::string& out,
               const std::string& log_path, uint32_t max_mutations) {
  corpus::Corpus c = corpus::load_file(corpus_path);
  if (c.metadata.empty()) throw std::runtime_error("corpus has no metadata to mutate");
  mut::MutationConfig mc;
  mc.rng_seed = seed;
  mc.max_mutations_per_round = max_mutations;
  auto [blob, log] = mut::mutate_blob(c.metadata, mc);
  c.metadata = std::move(blob);
  corpus::save_file(c, out);
  if (!log_path.empty()) write_text(log_path, mut::log_to_text(log));
  std::cout << "mutated draws=" << log.entries.size() << " -> " << out << "\n";
  return 0;
}

int cmd_run(const std::string& image, const std::string& program, const std::string& mode) {
  Bytes img = read_file(image);
  prog::OpProgram p;
  if (!program.empty()) p = prog::parse_program(read_text(program));
  target::TargetConfig tc;
  tc.mode = parse_mode(mode);
  if (auto m = env_max_mft()) tc.max_mft_bytes = *m;
  target::RunResult rr = target::run_case(img, p, tc);
  std::cout << "outcome: " << rr.outcome.describe() << "\n"
            << "ops_executed: " << rr.ops_executed << "\n"
            << "coverage: " << rr.coverage.size() << "\n";
  return rr.outcome.is_crash() ? 1 : 0;
}

int cmd_fuzz(const fuzz::CampaignConfig& cfg_in) {
  fuzz::CampaignConfig cfg = cfg_in;
  if (auto m = env_max_mft()) cfg.max_mft_bytes = *m;
  fuzz::CampaignReport rep = fuzz::run_campaign(cfg);
  for (const fuzz::Finding& f : rep.findings)
    std::cout << "finding: " << f.id << " iteration=" << f.iteration << " bundle=" << f.bundle_dir
              << "\n";
  std::cout << "executions: " << rep.executions << "\n";
  std::cout << "exec_per_sec: " << uint64_t(rep.exec_per_sec) << "\n";
  std::cout << "coverage: " << rep.coverage_size << "\n";
  std::cout << "queue_added: " << rep.queue_added << "\n";
  std::cout << "harness_violations: " << rep.harness_violations << "\n";
  std::cout << "findings: " << rep.findings.size() << "\n";
  return rep.findings.empty() ? 0 : 1;
}

int cmd_lint(const std::string& image) {
  Bytes img = read_file(image);
  uint32_t max_mft = ondisk::kMaxBytesPerMft;
  if (auto m = env_max_mft()) max_mft = *m;
  std::vector<target::LintFinding> findings = target::lint_image(img, max_mft);
  for (const target::LintFinding& f : findings)
    std::cout << f.check << " " << (f.commit.empty() ? "-" : f.commit) << " " << f.detail << "\n";
  std::cout << "findings: " << findings.size() << "\n";
  return findings.empty() ? 0 : 1;
}

int cmd_repro(const std::string& bundle) {
  fuzz::ReproResult rr = fuzz::reproduce(bundle);
  std::cout << "expected: " << rr.expected_id << "\n"
            << "actual: " << fuzz::outcome_id(rr.outcome) << "\n"
            << "match: " << (rr.match ? "yes" : "no") << "\n";
  if (!rr.match) {
    std::cerr << "error: bundle does not reproduce its recorded finding\n";
    return 2;
  }
  return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NTFS on-disk format fuzzing toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  auto* forge_cmd = app.add_subcommand("forge", "build seed images and crafted cases");
  std::string f_out = ".";
  std::string f_case;
  forge_cmd->add_option("--out", f_out, "output directory");
  forge_cmd->add_option("--case", f_case, "crafted case name, or 'all'");
  forge_cmd->callback([&] { rc = guarded([&] { return cmd_forge(f_out, f_case); }); });

  auto* extract_cmd = app.add_subcommand("extract", "pull metadata extents into a corpus");
  std::string e_image, e_out;
  extract_cmd->add_option("--image", e_image, "input image")->required();
  extract_cmd->add_option("--out", e_out, "output .ppra corpus")->required();
  extract_cmd->callback([&] { rc = guarded([&] { return cmd_extract(e_image, e_out); }); });

  auto* assemble_cmd = app.add_subcommand("assemble", "splice a corpus back onto a base image");
  std::string a_image, a_corpus, a_out;
  assemble_cmd->add_option("--image", a_image, "base image")->required();
  assemble_cmd->add_option("--corpus", a_corpus, "input .ppra corpus")->required();
  assemble_cmd->add_option("--out", a_out, "output image")->required();
  assemble_cmd->callback(
      [&] { rc = guarded([&] { return cmd_assemble(a_image, a_corpus, a_out); }); });

  auto* mutate_cmd = app.add_subcommand("mutate", "mutate a corpus metadata blob");
  std::string m_corpus, m_out, m_log;
  uint64_t m_seed = 0;
  uint32_t m_max = 4;
  mutate_cmd->add_option("--corpus", m_corpus, "input .ppra corpus")->required();
  mutate_cmd->add_option("--seed", m_seed, "rng seed")->required();
  mutate_cmd->add_option("--out", m_out, "output .ppra corpus")->required();
  mutate_cmd->add_option("--log", m_log, "write the mutation log here");
  mutate_cmd->add_option("--max-mutations", m_max, "max draws per round");
  mutate_cmd->callback(
      [&] { rc = guarded([&] { return cmd_mutate(m_corpus, m_seed, m_out, m_log, m_max); }); });

  auto* run_cmd = app.add_subcommand("run", "mount an image and execute a syscall program");
  std::string r_image, r_program, r_mode = "hardened";
  run_cmd->add_option("--image", r_image, "image to mount")->required();
  run_cmd->add_option("--program", r_program, "program text file (default: empty program)");
  run_cmd->add_option("--mode", r_mode, "hardened|vulnerable")
      ->check(CLI::IsMember({"hardened", "vulnerable"}));
  run_cmd->callback([&] { rc = guarded([&] { return cmd_run(r_image, r_program, r_mode); }); });

  auto* fuzz_cmd = app.add_subcommand("fuzz", "run a mutation campaign");
  fuzz::CampaignConfig z;
  std::string z_mode = "vulnerable";
  fuzz_cmd->add_option("--seeds", z.seed_dir, "seed directory")->required();
  fuzz_cmd->add_option("--findings", z.findings_dir, "findings directory")->required();
  fuzz_cmd->add_option("--mode", z_mode, "hardened|vulnerable")
      ->check(CLI::IsMember({"hardened", "vulnerable"}));
  fuzz_cmd->add_option("--iters", z.iterations, "mutation rounds");
  fuzz_cmd->add_option("--seed", z.mutation.rng_seed, "campaign rng seed");
  fuzz_cmd->add_option("--workers", z.workers, "worker threads");
  fuzz_cmd->add_option("--program-ratio", z.program_ratio, "fraction of program rounds");
  fuzz_cmd->add_option("--max-mutations", z.mutation.max_mutations_per_round,
                       "max draws per metadata round");
  fuzz_cmd->add_option("--time-budget-ms", z.time_budget_ms, "wall-clock cap (0 = none)");
  fuzz_cmd->callback([&] {
    z.mode = parse_mode(z_mode);
    rc = guarded([&] { return cmd_fuzz(z); });
  });

  auto* lint_cmd = app.add_subcommand("lint", "hardened checks with kernel-commit tags");
  std::string l_image;
  lint_cmd->add_option("--image", l_image, "image to lint")->required();
  lint_cmd->callback([&] { rc = guarded([&] { return cmd_lint(l_image); }); });

  auto* repro_cmd = app.add_subcommand("repro", "replay a finding bundle");
  std::string p_bundle;
  repro_cmd->add_option("--bundle", p_bundle, "bundle directory")->required();
  repro_cmd->callback([&] { rc = guarded([&] { return cmd_repro(p_bundle); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return rc;
}
