#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "piidb/classify.hpp"
#include "piidb/serialize.hpp"

namespace piidb {

enum class ProtectionScope { disclose_deny, disclose_require_grant, existence_hide };

inline const char* scope_name(ProtectionScope s) noexcept {
  switch (s) {
    case ProtectionScope::disclose_deny: return "disclose-deny";
    case ProtectionScope::disclose_require_grant: return "disclose-require-grant";
    case ProtectionScope::existence_hide: return "existence-hide";
  }
  return "disclose-deny";
}

inline ProtectionScope scope_from_name(const std::string& name) {
  if (name == "disclose-deny") return ProtectionScope::disclose_deny;
  if (name == "disclose-require-grant") return ProtectionScope::disclose_require_grant;
  if (name == "existence-hide") return ProtectionScope::existence_hide;
  fail(Errc::malformed_infon, "unknown protection scope '" + name + "'");
}

struct ProtectionMark {
  std::string rule_id;
  ProtectionScope scope = ProtectionScope::disclose_deny;
};

/// Rule target selector; total over classifications and sphere membership.
struct Selector {
  enum class Kind { all, family, sphere, infon };

  Kind kind = Kind::all;
  Family family = Family::PII;
  std::string sphere;
  std::string infon_key;

  static Selector all() { return {}; }
  static Selector by_family(Family f) {
    Selector s;
    s.kind = Kind::family;
    s.family = f;
    return s;
  }
  static Selector by_sphere(std::string key) {
    Selector s;
    s.kind = Kind::sphere;
    s.sphere = std::move(key);
    return s;
  }
  static Selector by_infon(std::string key) {
    Selector s;
    s.kind = Kind::infon;
    s.infon_key = std::move(key);
    return s;
  }

  Json to_json() const {
    Json j = Json::object();
    switch (kind) {
      case Kind::all: j["kind"] = "all"; break;
      case Kind::family:
        j["kind"] = "family";
        j["family"] = family_name(family);
        break;
      case Kind::sphere:
        j["kind"] = "sphere";
        j["sphere"] = sphere;
        break;
      case Kind::infon:
        j["kind"] = "infon";
        j["key"] = infon_key;
        break;
    }
    return j;
  }

  static Selector from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind"))
      fail(Errc::malformed_infon, "selector needs a kind");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "all") return all();
    if (kind == "family") {
      std::string f = j.at("family").get<std::string>();
      if (f != "PII" && f != "NII") fail(Errc::malformed_infon, "selector family must be PII or NII");
      return by_family(f == "PII" ? Family::PII : Family::NII);
    }
    if (kind == "sphere") return by_sphere(j.at("sphere").get<std::string>());
    if (kind == "infon") return by_infon(j.at("key").get<std::string>());
    fail(Errc::malformed_infon, "unknown selector kind '" + kind + "'");
  }
};

struct PolicyRule {
  std::string rule_id;
  Selector selector;
  ProtectionScope scope = ProtectionScope::disclose_deny;
};

struct PolicySet {
  std::map<std::string, PolicyRule> rules;
  std::set<std::pair<std::string, std::string>> grants;  // (principal, sphere key)
};

/// Who is asking, for what purpose, and which spheres the request carries
/// grants for. Purposes are carried and logged, never semantically matched.
struct PolicyContext {
  std::string principal;
  std::string purpose;
  std::set<std::string> granted_spheres;
};

struct Verdict {
  bool allowed = true;
  std::string rule_id;   // violated rule when denied
  bool hidden = false;   // existence-hide: suppress from results and counts

  static Verdict allow() { return {}; }
  static Verdict deny(std::string rule, bool hide = false) { return {false, std::move(rule), hide}; }
};

struct Alert {
  std::int64_t timestamp = 0;
  std::string principal;
  std::string rule_id;
  std::set<std::string> proprietors;
  std::string infon_key;
  std::string outcome;  // "deny", or "allow" under audit-all

  Json to_json() const {
    Json j = Json::object();
    j["ts"] = timestamp;
    j["principal"] = principal;
    j["rule_id"] = rule_id;
    Json ps = Json::array();
    for (const auto& p : proprietors) ps.push_back(p);
    j["proprietors"] = std::move(ps);
    j["infon_key"] = infon_key;
    j["outcome"] = outcome;
    return j;
  }
};

using AlertSink = std::function<void(const Alert&)>;

}  // namespace piidb
