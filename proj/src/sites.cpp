#include "papora/sites.hpp"

#include <map>
#include <set>
#include <stdexcept>

namespace papora::sites {

static std::vector<SiteInfo> build_registry() {
  return {
      {"fill_super_shift", CrashClass::NPD, "record_size_range", "0b66046",
       "record size below one sector shifts the first MFT record to a tiny invalid address"},
      {"enum_attr_overflow", CrashClass::OOB_Read, "enum_attr_overflow", "e19c627",
       "32-bit off+asize wrap passes the chain bound and walks past the record"},
      {"root_iop", CrashClass::NPD, "root_load", "c1ca8ef",
       "root inode built without required index attributes has empty ops"},
      {"attr_name_copy", CrashClass::OOB_Write, "attr_name_bound", "54e4570",
       "attribute name claimed past the record allocation is copied out of bounds"},
      {"attr_list_copy", CrashClass::OOB_Write, "attr_name_bound", "54e4570",
       "accumulated le_size(name_len) entries overflow the attr-list scratch buffer"},
      {"hdr_find_e", CrashClass::OOB_Read, "index_hdr_bound", "4d42ecd",
       "index header 'used' beyond the block allocation drives the search outside it"},
      {"inode_union", CrashClass::Heap_Corruption, "inode_type", "467333a",
       "reserved system record interpreted as a directory confuses the inode union"},
  };
}

const std::vector<SiteInfo>& registry() {
  static const std::vector<SiteInfo> reg = [] {
    auto r = build_registry();
    return r;
  }();
  static const bool checked = [] {
    assert_bidirectional();
    return true;
  }();
  (void)checked;
  return reg;
}

std::string commit_for_check(const std::string& check_id) {
  for (const auto& s : build_registry())
    if (s.check == check_id) return s.commit;
  return "";
}

std::optional<SiteInfo> find_site(const std::string& site_id) {
  for (const auto& s : registry())
    if (s.site == site_id) return s;
  return std::nullopt;
}

void assert_bidirectional() {
  auto reg = build_registry();
  std::set<std::string> sites;
  std::map<std::string, std::string> check_commit;
  for (const auto& s : reg) {
    if (s.site.empty() || s.check.empty() || s.commit.empty())
      throw std::logic_error("site registry entry incomplete: " + s.site);
    if (!sites.insert(s.site).second)
      throw std::logic_error("duplicate crash site: " + s.site);
    auto [it, fresh] = check_commit.emplace(s.check, s.commit);
    if (!fresh && it->second != s.commit)
      throw std::logic_error("check mapped to two commits: " + s.check);
  }
  // reverse direction: every commit-tagged check must cover at least one site
  for (const auto& [check, commit] : check_commit) {
    bool covered = false;
    for (const auto& s : reg) covered |= (s.check == check);
    if (!covered) throw std::logic_error("check covers no site: " + check);
  }
}

}  // namespace papora::sites
