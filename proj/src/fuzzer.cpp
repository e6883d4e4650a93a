#include "papora/fuzzer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "papora/rng.hpp"
#include "papora/target.hpp"

namespace fs = std::filesystem;

namespace papora::fuzz {

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

struct Seed {
  Bytes base;
  corpus::Corpus cp;  // meaningful only when extracted
  bool extracted = false;
  prog::OpProgram program;  // program attached to the seed itself
};

// Deliberately broken seeds can't be extracted; they still get dry-run and
// bundled. An extent-free corpus assembles back to the base image verbatim.
corpus::Corpus raw_corpus(const Seed& s) {
  corpus::Corpus cp;
  cp.status = prog::FsStatus::with_root();
  cp.program = s.program;
  cp.base_image = "base.img";
  return cp;
}

std::vector<Seed> load_seeds(const std::string& seed_dir) {
  if (!fs::is_directory(seed_dir))
    throw std::runtime_error("seed dir unreadable: " + seed_dir);
  std::vector<fs::path> paths;
  for (const auto& de : fs::directory_iterator(seed_dir)) paths.push_back(de.path());
  std::sort(paths.begin(), paths.end());

  std::vector<Seed> seeds;
  for (const fs::path& p : paths) {
    Seed s;
    if (fs::is_directory(p)) {
      fs::path img = p / "case.img";
      if (!fs::is_regular_file(img)) continue;  // not a case bundle
      s.base = read_file(img);
      fs::path pr = p / "program.txt";
      if (fs::is_regular_file(pr)) s.program = prog::parse_program(read_text(pr));
    } else if (p.extension() == ".ppra") {
      s.cp = corpus::load_file(p);
      if (s.cp.base_image.empty())
        throw std::runtime_error("corpus lacks a base image path: " + p.string());
      fs::path base = s.cp.base_image;
      if (base.is_relative()) base = p.parent_path() / base;
      s.base = read_file(base);
      s.program = s.cp.program;
      s.extracted = true;
    } else {
      s.base = read_file(p);
    }
    if (!s.extracted) {
      try {
        s.cp = corpus::extract_corpus(s.base);
        s.cp.program = s.program;
        s.cp.base_image = p.string();
        s.extracted = true;
      } catch (const corpus::CorpusError&) {
        // stays a replay-only seed
      } catch (const ondisk::DecodeError&) {
      }
    }
    seeds.push_back(std::move(s));
  }
  if (seeds.empty()) throw std::runtime_error("no seeds found in " + seed_dir);
  return seeds;
}

struct QueueEntry {
  size_t seed = 0;  // index of the base image this corpus assembles onto
  corpus::Corpus cp;
};

struct Shared {
  std::mutex mu;
  std::deque<QueueEntry> queue;
  CoverageSet coverage;
  std::map<std::string, Finding> findings;
  std::vector<std::string> finding_order;
  uint64_t flat_rounds = 0;  // rounds since coverage last grew
  uint64_t queue_added = 0;
  uint64_t harness_violations = 0;
};

void persist_bundle(const CampaignConfig& cfg, Finding& f, const QueueEntry& pre,
                    const std::vector<Seed>& seeds, const mut::MutationLog& log,
                    const prog::OpProgram& executed, const Outcome& o) {
  if (cfg.findings_dir.empty()) return;
  fs::path dir = fs::path(cfg.findings_dir) / f.id;
  fs::create_directories(dir);
  write_file(dir / "base.img", seeds[pre.seed].base);
  corpus::Corpus cp = pre.cp;
  cp.base_image = "base.img";
  corpus::save_file(cp, dir / "corpus.ppra");
  write_text(dir / "mutations.log", mut::log_to_text(log));
  write_text(dir / "program.txt", prog::serialize_program(executed));
  f.bundle_dir = dir.string();
  f.reproduce_cmd = "papora repro --bundle " + f.bundle_dir;
  std::ostringstream os;
  os << "id=" << f.id << "\n"
     << "crash_class=" << to_string(o.crash_class) << "\n"
     << "site=" << o.id << "\n"
     << "mode=" << to_string(cfg.mode) << "\n"
     << "max_mft_bytes=" << cfg.max_mft_bytes << "\n"
     << "iteration=" << f.iteration << "\n"
     << "detail=" << o.detail << "\n"
     << "reproduce=" << f.reproduce_cmd << "\n";
  write_text(dir / "outcome.txt", os.str());
}

// Caller holds sh.mu.
void record_finding(const CampaignConfig& cfg, Shared& sh, const std::vector<Seed>& seeds,
                    const QueueEntry& pre, const mut::MutationLog& log,
                    const prog::OpProgram& executed, const Outcome& o, uint64_t iteration) {
  std::string id = outcome_id(o);
  if (sh.findings.count(id)) return;
  Finding f;
  f.id = id;
  f.crash_class = o.crash_class;
  f.site = o.id;
  f.detail = o.detail;
  f.iteration = iteration;
  persist_bundle(cfg, f, pre, seeds, log, executed, o);
  sh.findings.emplace(id, std::move(f));
  sh.finding_order.push_back(id);
}

struct Campaign {
  const CampaignConfig& cfg;
  const std::vector<Seed>& seeds;
  Shared& sh;
  std::atomic<uint64_t> next_iter{0};
  std::atomic<uint64_t> executions{0};
  std::chrono::steady_clock::time_point deadline{};
  bool has_deadline = false;

  bool out_of_time() const {
    return has_deadline && std::chrono::steady_clock::now() >= deadline;
  }

  void worker(uint32_t index) {
    Rng rng(cfg.mutation.rng_seed + index);
    target::TargetConfig tcfg{cfg.mode, cfg.max_mft_bytes};
    for (;;) {
      uint64_t iter = next_iter.fetch_add(1);
      if (iter >= cfg.iterations || out_of_time()) return;

      QueueEntry pre;
      uint64_t flat;
      {
        std::lock_guard<std::mutex> lk(sh.mu);
        if (sh.queue.empty()) return;
        pre = sh.queue.front();
        sh.queue.pop_front();
        sh.queue.push_back(pre);
        flat = sh.flat_rounds;
      }

      corpus::Corpus cand = pre.cp;
      mut::MutationLog log;
      bool program_round = rng.below(1u << 20) < uint64_t(cfg.program_ratio * (1u << 20));
      if (program_round) {
        uint64_t pseed = rng.next_u64();
        // mutation walks existing ops; after a coverage-flat stretch (or on an
        // empty program) grow the program instead
        cand.program = (flat > 10 || cand.program.ops.empty())
                           ? prog::generate_op(cand.program, cand.status, pseed)
                           : prog::mutate_program(cand.program, cand.status, pseed);
      } else {
        mut::MutationConfig mcfg = cfg.mutation;
        mcfg.rng_seed = rng.next_u64();
        auto [blob, mlog] = mut::mutate_blob(cand.metadata, mcfg);
        cand.metadata = std::move(blob);
        log = std::move(mlog);
      }

      Bytes image = corpus::assemble_image(seeds[pre.seed].base, cand);
      bool violated = false;
      target::RunResult rr;
      try {
        rr = target::run_case(image, cand.program, tcfg);
      } catch (const HarnessBoundsError&) {
        violated = true;
      }
      executions.fetch_add(1);

      std::lock_guard<std::mutex> lk(sh.mu);
      if (violated) {
        sh.harness_violations++;
        sh.flat_rounds++;
        continue;
      }
      size_t before = sh.coverage.size();
      sh.coverage.insert(rr.coverage.begin(), rr.coverage.end());
      if (sh.coverage.size() > before) {
        sh.flat_rounds = 0;
        sh.queue_added++;
        sh.queue.push_front(QueueEntry{pre.seed, cand});
      } else {
        sh.flat_rounds++;
      }
      if (rr.outcome.is_crash())
        record_finding(cfg, sh, seeds, pre, log, cand.program, rr.outcome, iter + 1);
    }
  }
};

}  // namespace

std::string outcome_id(const Outcome& o) {
  if (o.is_crash()) return std::string(to_string(o.crash_class)) + "_" + o.id;
  if (o.is_validation()) return "validation:" + o.id;
  return "ok";
}

CampaignReport run_campaign(const CampaignConfig& cfg) {
  if (cfg.workers == 0) throw std::runtime_error("campaign needs at least one worker");
  if (!(cfg.program_ratio >= 0.0 && cfg.program_ratio <= 1.0))
    throw std::runtime_error("program_ratio outside [0,1]");
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Seed> seeds = load_seeds(cfg.seed_dir);

  Shared sh;
  Campaign camp{cfg, seeds, sh};
  if (cfg.time_budget_ms > 0) {
    camp.deadline = t0 + std::chrono::milliseconds(cfg.time_budget_ms);
    camp.has_deadline = true;
  }

  // dry-run every seed unmutated; extractable ones enter the queue
  target::TargetConfig tcfg{cfg.mode, cfg.max_mft_bytes};
  for (size_t i = 0; i < seeds.size(); i++) {
    const Seed& s = seeds[i];
    bool violated = false;
    target::RunResult rr;
    try {
      rr = target::run_case(s.base, s.program, tcfg);
    } catch (const HarnessBoundsError&) {
      violated = true;
    }
    camp.executions.fetch_add(1);
    std::lock_guard<std::mutex> lk(sh.mu);
    if (violated) {
      sh.harness_violations++;
    } else {
      sh.coverage.insert(rr.coverage.begin(), rr.coverage.end());
      if (rr.outcome.is_crash()) {
        QueueEntry pre{i, s.extracted ? s.cp : raw_corpus(s)};
        record_finding(cfg, sh, seeds, pre, mut::MutationLog{}, s.program, rr.outcome, 0);
      }
    }
    if (s.extracted) sh.queue.push_back(QueueEntry{i, s.cp});
  }

  if (!sh.queue.empty() && cfg.iterations > 0) {
    if (cfg.workers == 1) {
      camp.worker(0);
    } else {
      std::vector<std::thread> pool;
      for (uint32_t w = 0; w < cfg.workers; w++)
        pool.emplace_back([&camp, w] { camp.worker(w); });
      for (auto& t : pool) t.join();
    }
  }

  CampaignReport rep;
  rep.executions = camp.executions.load();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.exec_per_sec = secs > 0 ? double(rep.executions) / secs : 0.0;
  rep.coverage_size = sh.coverage.size();
  rep.queue_added = sh.queue_added;
  rep.harness_violations = sh.harness_violations;
  for (const std::string& id : sh.finding_order) rep.findings.push_back(sh.findings.at(id));
  return rep;
}

ReproResult reproduce(const std::string& bundle_dir) {
  fs::path dir(bundle_dir);
  std::map<std::string, std::string> kv;
  std::istringstream lines(read_text(dir / "outcome.txt"));
  std::string line;
  while (std::getline(lines, line)) {
    size_t eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!kv.count("id") || !kv.count("mode"))
    throw std::runtime_error("bundle outcome.txt lacks id/mode: " + bundle_dir);

  corpus::Corpus cp = corpus::load_file(dir / "corpus.ppra");
  fs::path base_path = cp.base_image;
  if (base_path.is_relative()) base_path = dir / base_path;
  Bytes base = read_file(base_path);
  mut::MutationLog log = mut::log_from_text(read_text(dir / "mutations.log"));
  cp.metadata = mut::replay_log(cp.metadata, log);
  cp.program = prog::parse_program(read_text(dir / "program.txt"));

  Bytes image = corpus::assemble_image(base, cp);
  target::TargetConfig tcfg;
  tcfg.mode = kv["mode"] == "hardened" ? Mode::Hardened : Mode::Vulnerable;
  if (kv.count("max_mft_bytes"))
    tcfg.max_mft_bytes = uint32_t(std::stoul(kv["max_mft_bytes"]));
  target::RunResult rr = target::run_case(image, cp.program, tcfg);

  ReproResult res;
  res.outcome = rr.outcome;
  res.expected_id = kv["id"];
  res.match = outcome_id(rr.outcome) == res.expected_id;
  return res;
}

}  // namespace papora::fuzz
