#pragma once

// Shared result vocabulary for the reference reader and everything above it.
//
// A run ends in one of three ways:
//   ok               - mount and all ops completed (per-op errno is not a failure)
//   validation_error - an integrity check fired; `id` names the check
//   simulated_crash  - vulnerable-mode emulation of a kernel memory bug; the
//                      (crash_class, site) pair identifies the bug

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>

namespace papora {

enum class Mode { Hardened, Vulnerable };

enum class CrashClass { NPD, OOB_Read, OOB_Write, Heap_Corruption };

inline const char* to_string(CrashClass c) {
  switch (c) {
    case CrashClass::NPD: return "NPD";
    case CrashClass::OOB_Read: return "OOB_Read";
    case CrashClass::OOB_Write: return "OOB_Write";
    case CrashClass::Heap_Corruption: return "Heap_Corruption";
  }
  return "?";
}

inline const char* to_string(Mode m) { return m == Mode::Hardened ? "hardened" : "vulnerable"; }

struct Outcome {
  enum class Kind { Ok, ValidationError, SimulatedCrash } kind = Kind::Ok;
  std::string id;      // check id (validation) or site id (crash)
  CrashClass crash_class = CrashClass::NPD;
  std::string detail;

  static Outcome ok() { return {}; }
  static Outcome validation(std::string id, std::string detail = "") {
    Outcome o;
    o.kind = Kind::ValidationError;
    o.id = std::move(id);
    o.detail = std::move(detail);
    return o;
  }
  static Outcome crash(CrashClass c, std::string site, std::string detail = "") {
    Outcome o;
    o.kind = Kind::SimulatedCrash;
    o.id = std::move(site);
    o.crash_class = c;
    o.detail = std::move(detail);
    return o;
  }

  bool is_ok() const { return kind == Kind::Ok; }
  bool is_crash() const { return kind == Kind::SimulatedCrash; }
  bool is_validation() const { return kind == Kind::ValidationError; }

  std::string describe() const {
    switch (kind) {
      case Kind::Ok: return "ok";
      case Kind::ValidationError:
        return "validation_error id=" + id + (detail.empty() ? "" : " (" + detail + ")");
      case Kind::SimulatedCrash:
        return std::string("simulated_crash class=") + to_string(crash_class) + " site=" + id +
               (detail.empty() ? "" : " (" + detail + ")");
    }
    return "?";
  }
};

// Coverage is a set of instrumentation site ids visited during a run. It
// stands in for edge coverage: novelty is "a site id never seen before".
using CoverageSet = std::set<std::string>;

// Out-of-range access attempted in hardened mode. Hardened code must validate
// before every read/write; reaching this is a harness bug and test suites
// treat it as fatal.
struct HarnessBoundsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace papora
