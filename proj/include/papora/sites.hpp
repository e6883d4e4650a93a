#pragma once

// Registry tying vulnerable-mode crash sites to the hardened-mode checks that
// close them, keyed by the upstream ntfs3 kernel commit each pair mirrors.
// Asserted bidirectional at startup: every crash site has a hardened check
// with a commit, and every commit-tagged check covers at least one site.

#include <optional>
#include <string>
#include <vector>

#include "papora/outcome.hpp"

namespace papora::sites {

struct SiteInfo {
  std::string site;        // vulnerable-mode crash site id
  CrashClass crash_class;  // class reported at that site
  std::string check;       // hardened-mode check id that prevents it
  std::string commit;      // kernel commit the check mirrors
  std::string note;
};

const std::vector<SiteInfo>& registry();

// Commit tag for a hardened check id; empty for baseline checks that do not
// correspond to one of the emulated fixes.
std::string commit_for_check(const std::string& check_id);

std::optional<SiteInfo> find_site(const std::string& site_id);

// Throws std::logic_error if the table is inconsistent. Called once on first
// registry() use and explicitly from tests.
void assert_bidirectional();

}  // namespace papora::sites
