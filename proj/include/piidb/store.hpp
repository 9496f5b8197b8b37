#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "piidb/algebra.hpp"
#include "piidb/classify.hpp"
#include "piidb/policy.hpp"
#include "piidb/schema.hpp"
#include "piidb/serialize.hpp"

namespace piidb {

/// PROPRIETOR_TABLE row: a unique internal key mapped one-to-one to a legal
/// identity, plus the sphere locator. Unknown fields round-trip unchanged.
struct ProprietorRecord {
  std::string key;  // "#pN"
  Identifier identity;
  std::string sphere_ref;
  std::int64_t created_at = 0;
  Json extra = Json::object();

  ProprietorRecord(std::string key_, Identifier identity_, std::string sphere_ref_,
                   std::int64_t created_at_, Json extra_ = Json::object())
      : key(std::move(key_)),
        identity(std::move(identity_)),
        sphere_ref(std::move(sphere_ref_)),
        created_at(created_at_),
        extra(std::move(extra_)) {}
};

/// A proprietor's partition: their self atoms split by kind, related
/// non-identifiable information (references into the pool, each justified),
/// and the compound links that touch the sphere.
struct PiiSphere {
  std::string proprietor;         // "#pN"
  std::string proprietor_person;  // the bound person key
  std::set<std::string> self_singletons;
  std::set<std::string> self_multitudes;
  std::map<std::string, std::string> related_nii;  // infon key -> justification
  std::set<std::string> links;

  bool holds_self(const std::string& key) const {
    return self_singletons.count(key) != 0 || self_multitudes.count(key) != 0;
  }
};

/// Infon determination: does the infon belong to this sphere?
inline bool determine(const Infon& s, const PiiSphere& sphere) {
  return prop(s).count(sphere.proprietor_person) != 0 || sphere.related_nii.count(s.key()) != 0;
}

struct StoreManifest {
  int version = 0;
  std::size_t proprietor_count = 0;
  std::size_t infon_count = 0;
  std::size_t link_count = 0;
};

struct IngestReport {
  Classification verdict;
  std::vector<std::pair<std::string, std::string>> placements;  // (sphere key, infon key)
  std::vector<std::string> links;
  std::vector<std::string> pool;
};

struct QueryResult {
  std::vector<Infon> records;
  std::vector<std::pair<std::string, std::string>> denied;  // (infon/link key, rule id)

  std::size_t count() const noexcept { return records.size(); }
};

struct ScanReport {
  bool ok = true;
  std::vector<std::string> violations;
};

struct StoreOptions {
  /// Object-graph hop limit for related-NII attachment.
  int relatedness_boundary = 1;
  /// Extended limit available to infons carrying a sensitivity tag.
  int sensitive_boundary = 2;
  std::set<std::string> sensitive_tags{"sensitive"};
  RelationSchema schema;
  /// Unix-seconds clock; injectable so table goldens are byte-stable.
  std::function<std::int64_t()> clock;
  /// Extra alert sink besides alerts.log.
  AlertSink alert_sink;
  /// Emit alert events for allowed accesses too.
  bool audit_all = false;
};

/// The PII database: proprietor registry, per-proprietor piiSpheres, shared
/// NII pool, cross-sphere compound links, derivation ancestry, and the
/// disclosure-policy state. Files are append-only JSON-line records; a
/// manifest commits each write batch atomically via rename, and reload
/// truncates any uncommitted tail.
class Store {
 public:
  static constexpr const char* kManifest = "manifest";
  static constexpr const char* kProprietors = "proprietors.tbl";
  static constexpr const char* kPool = "pool.nii";
  static constexpr const char* kLinks = "links.tbl";
  static constexpr const char* kDerived = "derived.tbl";
  static constexpr const char* kPolicy = "policy.rules";
  static constexpr const char* kAlerts = "alerts.log";

  static void init(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "spheres", ec);
    if (ec) fail(Errc::store_io, "cannot create store directory " + dir.string());
    for (const char* name : {kProprietors, kPool, kLinks, kDerived, kPolicy})
      std::ofstream(dir / name, std::ios::app);
    Json files = Json::object();
    for (const char* name : {kProprietors, kPool, kLinks, kDerived, kPolicy}) {
      Json st = Json::object();
      st["records"] = 0;
      st["bytes"] = 0;
      files[name] = std::move(st);
    }
    Json m = Json::object();
    m["version"] = 0;
    m["proprietor_count"] = 0;
    m["infon_count"] = 0;
    m["link_count"] = 0;
    m["files"] = std::move(files);
    write_file_atomic(dir, kManifest, m.dump() + "\n");
  }

  explicit Store(std::filesystem::path dir, StoreOptions opts = {})
      : dir_(std::move(dir)), opts_(std::move(opts)) {
    if (!opts_.clock)
      opts_.clock = [] {
        return static_cast<std::int64_t>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
      };
    load();
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

  // -------------------------------------------------------------------------
  // Proprietor registry

  std::string register_proprietor(const Identifier& identity, Json extra = Json::object()) {
    const std::string descriptor_key = identity.descriptor_canon();
    if (descriptors_to_proprietor_.count(descriptor_key) ||
        person_to_proprietor_.count(identity.person_key()))
      fail(Errc::duplicate_proprietor,
           "identity already registered (an ambiguous identifier is not an identifier)");

    std::string key = "#p" + std::to_string(seq_ + 1);
    ProprietorRecord rec(key, identity, sphere_rel_path(key), opts_.clock(), std::move(extra));

    Batch batch;
    batch.add(kProprietors, rec.key, proprietor_line(rec));
    batch.touch(rec.sphere_ref);
    batch.d_proprietors = 1;
    commit(batch);
    apply_register(rec);
    return rec.key;
  }

  const ProprietorRecord* proprietor(const std::string& key) const {
    auto it = proprietors_.find(key);
    return it == proprietors_.end() ? nullptr : &it->second;
  }

  /// Registration order (the PROPRIETOR_TABLE layout).
  std::vector<const ProprietorRecord*> proprietors() const {
    std::vector<const ProprietorRecord*> out;
    for (const auto& key : proprietor_order_) out.push_back(&proprietors_.at(key));
    return out;
  }

  const std::string* proprietor_of_person(const std::string& person_key) const {
    auto it = person_to_proprietor_.find(person_key);
    return it == person_to_proprietor_.end() ? nullptr : &it->second;
  }

  // -------------------------------------------------------------------------
  // Ingest

  IngestReport ingest(const Infon& s) {
    for (const auto& person : referents(s))
      if (!person_to_proprietor_.count(person))
        fail(Errc::unknown_proprietor, "person '" + person + "' is not a registered proprietor");

    IngestReport report;
    report.verdict = classify(s, opts_.schema);
    Batch batch;
    plan_ingest(s, batch, report);
    commit(batch);
    return report;
  }

  // -------------------------------------------------------------------------
  // Related NII

  void attach_related_nii(const std::string& sphere_key, const std::string& infon_key,
                          const std::string& justification) {
    PiiSphere& sphere = require_sphere(sphere_key);
    if (justification.empty())
      fail(Errc::malformed_infon, "related-NII attachment needs a non-empty justification");
    const Infon* nu = find_infon(infon_key);
    if (nu == nullptr) fail(Errc::unknown_infon, "no stored infon with key " + infon_key);
    if (referent_count(*nu) > 0)
      fail(Errc::pii_not_attachable, "related information must be non-identifiable");
    if (!pool_.count(infon_key))
      fail(Errc::unknown_infon, "infon " + infon_key + " is not in the NII pool");

    std::size_t distance = relatedness_distance(sphere, *nu);
    std::size_t limit = static_cast<std::size_t>(opts_.relatedness_boundary);
    if (is_sensitive(*nu))
      limit = std::max(limit, static_cast<std::size_t>(opts_.sensitive_boundary));
    if (distance > limit)
      fail(Errc::boundary_exceeded, "infon is " + std::to_string(distance) +
                                        " hops from the sphere (limit " + std::to_string(limit) +
                                        ")");

    auto existing = sphere.related_nii.find(infon_key);
    if (existing != sphere.related_nii.end() && existing->second == justification) return;

    Json line = Json::object();
    line["op"] = "related";
    line["key"] = infon_key;
    line["justification"] = justification;
    Batch batch;
    batch.add(sphere_rel_path(sphere_key), infon_key, line.dump());
    commit(batch);
    sphere.related_nii[infon_key] = justification;
  }

  // -------------------------------------------------------------------------
  // PNI claims

  void claim_pni(const std::string& owner_key, const std::string& infon_key) {
    require_sphere(owner_key);
    const Infon* nu = find_infon(infon_key);
    if (nu == nullptr) fail(Errc::unknown_infon, "no stored infon with key " + infon_key);
    if (referent_count(*nu) > 0)
      fail(Errc::pii_not_claimable,
           "proprietorship of PII is reserved to its proprietor; ownership claims cover NII only");
    auto it = pni_.find(infon_key);
    if (it != pni_.end() && it->second == owner_key) return;

    Batch batch;
    Json line = Json::object();
    line["op"] = "claim-pni";
    line["key"] = infon_key;
    line["owner"] = owner_key;
    batch.add(kPool, infon_key, line.dump());
    // An owner claim enables enforcement: a require-grant rule on the record.
    PolicyRule rule{"pni:" + infon_key, Selector::by_infon(infon_key),
                    ProtectionScope::disclose_require_grant};
    batch.add(kPolicy, rule.rule_id, rule_line(rule));
    commit(batch);
    pni_[infon_key] = owner_key;
    policy_.rules[rule.rule_id] = rule;
  }

  const std::string* pni_owner(const std::string& infon_key) const {
    auto it = pni_.find(infon_key);
    return it == pni_.end() ? nullptr : &it->second;
  }

  // -------------------------------------------------------------------------
  // Query

  QueryResult query(const std::string& sphere_key,
                    const std::function<bool(const Infon&)>& selector, const PolicyContext& ctx) {
    const PiiSphere& sphere = require_sphere(sphere_key);
    if (ctx.principal.empty()) throw std::invalid_argument("policy context needs a principal");
    std::set<std::string> grants = effective_grants(ctx);

    QueryResult res;
    std::set<std::string> self_keys = sphere.self_singletons;
    self_keys.insert(sphere.self_multitudes.begin(), sphere.self_multitudes.end());
    auto consider = [&](const std::string& key) {
      const Infon& infon = table_.at(key);
      if (selector && !selector(infon)) return;
      Verdict v = evaluate(key, grants);
      if (v.allowed) {
        res.records.push_back(infon);
      } else if (!v.hidden) {
        res.denied.emplace_back(key, v.rule_id);
        emit_alert(key, ctx, v);
      }
    };
    for (const auto& key : self_keys) consider(key);
    for (const auto& [key, justification] : sphere.related_nii) consider(key);

    // Cross-sphere reconstructions: only when the context grants every
    // linked sphere, and no linked atom is blocked.
    for (const auto& link_id : sphere.links) {
      const CompoundLink& link = links_.at(link_id);
      bool all_granted = true, hide = false;
      std::optional<std::pair<std::string, std::string>> denial;
      std::vector<Infon> atoms;
      for (const auto& atom_id : link.atom_ids) {
        const Infon& atom = table_.at(atom_id);
        atoms.push_back(atom);
        const std::string* atom_sphere = proprietor_of_person(*referents(atom).begin());
        if (atom_sphere == nullptr || !grants.count(*atom_sphere)) all_granted = false;
        Verdict v = evaluate(atom_id, grants);
        if (!v.allowed) {
          if (v.hidden)
            hide = true;
          else if (!denial)
            denial = {{link_id, v.rule_id}};
        }
      }
      if (hide) continue;  // no trace
      if (denial) {
        res.denied.push_back(*denial);
        emit_alert(*link.atom_ids.begin(), ctx, Verdict::deny(denial->second));
        continue;
      }
      if (!all_granted) continue;
      Infon recon = join(atoms);
      std::vector<std::string> parents(link.atom_ids.begin(), link.atom_ids.end());
      record_derivation(recon, parents, "join");
      Verdict v = evaluate(recon.key(), grants);
      if (v.allowed) {
        if (!selector || selector(recon)) res.records.push_back(recon);
      } else if (!v.hidden) {
        res.denied.emplace_back(link_id, v.rule_id);
        emit_alert(recon.key(), ctx, v);
      }
    }
    return res;
  }

  // -------------------------------------------------------------------------
  // Anonymized export

  /// Every self atom of the sphere, anonymized; classifies NII throughout.
  /// Marks target the PII form, so only existence-hide suppresses a record.
  std::vector<Infon> export_anonymized(const std::string& sphere_key) {
    const PiiSphere& sphere = require_sphere(sphere_key);
    std::set<std::string> keys = sphere.self_singletons;
    keys.insert(sphere.self_multitudes.begin(), sphere.self_multitudes.end());
    std::vector<Infon> out;
    for (const auto& key : keys) {
      if (has_existence_hide(key)) continue;
      out.push_back(anonymize(table_.at(key)).ninfon);
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Policy

  void protect(const std::string& infon_key, const ProtectionMark& mark) {
    if (find_infon(infon_key) == nullptr)
      fail(Errc::unknown_infon, "no stored infon with key " + infon_key);
    add_rule(PolicyRule{mark.rule_id, Selector::by_infon(infon_key), mark.scope});
  }

  void add_rule(const PolicyRule& rule) {
    if (rule.rule_id.empty()) fail(Errc::unknown_rule, "rule needs an id");
    Batch batch;
    batch.add(kPolicy, rule.rule_id, rule_line(rule));
    commit(batch);
    policy_.rules[rule.rule_id] = rule;
  }

  void add_grant(const std::string& principal, const std::string& sphere_key) {
    Batch batch;
    Json g = Json::object();
    g["principal"] = principal;
    g["sphere"] = sphere_key;
    Json line = Json::object();
    line["grant"] = std::move(g);
    batch.add(kPolicy, principal + "/" + sphere_key, line.dump());
    commit(batch);
    policy_.grants.emplace(principal, sphere_key);
  }

  const PolicySet& policy() const noexcept { return policy_; }

  Verdict check_disclosure(const std::string& infon_key, const PolicyContext& ctx) {
    if (ctx.principal.empty()) throw std::invalid_argument("policy context needs a principal");
    if (find_infon(infon_key) == nullptr)
      fail(Errc::unknown_infon, "no stored infon with key " + infon_key);
    Verdict v = evaluate(infon_key, effective_grants(ctx));
    emit_alert(infon_key, ctx, v);
    return v;
  }

  /// Derivation ancestry edge: the child infon was produced from the parents
  /// by a combining operation, so protection taints forward onto it.
  void record_derivation(const Infon& child, const std::vector<std::string>& parent_keys,
                         const std::string& via) {
    for (const auto& p : parent_keys)
      if (find_infon(p) == nullptr) fail(Errc::unknown_infon, "unknown parent infon " + p);
    std::set<std::string> parents;
    if (auto it = derived_from_.find(child.key()); it != derived_from_.end())
      parents = it->second;
    std::size_t before = parents.size();
    bool known = table_.count(child.key()) != 0;
    parents.insert(parent_keys.begin(), parent_keys.end());
    if (known && parents.size() == before) return;  // idempotent

    Json line = Json::object();
    line["child"] = child.key();
    line["infon"] = to_json(child);
    Json ps = Json::array();
    for (const auto& p : parents) ps.push_back(p);
    line["parents"] = std::move(ps);
    line["via"] = via;
    Batch batch;
    batch.add(kDerived, child.key(), line.dump());
    commit(batch);
    table_.emplace(child.key(), child);
    derived_from_[child.key()] = std::move(parents);
  }

  /// Manual alert emission, mirroring the automatic hook on denials.
  std::optional<Alert> alert_on_access(const std::string& infon_key, const PolicyContext& ctx,
                                       const Verdict& outcome) {
    return emit_alert(infon_key, ctx, outcome);
  }

  // -------------------------------------------------------------------------
  // Inspection

  const Infon* find_infon(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  /// Classification of a stored infon, with the PNI flag reflecting any
  /// registered owner claim (never inferred from content).
  Classification classify_stored(const std::string& key) const {
    const Infon* s = find_infon(key);
    if (s == nullptr) fail(Errc::unknown_infon, "no stored infon with key " + key);
    Classification c = classify(*s, opts_.schema);
    c.pni = c.family == Family::NII && pni_.count(key) != 0;
    return c;
  }

  const PiiSphere* sphere(const std::string& key) const {
    auto it = spheres_.find(key);
    return it == spheres_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> pool_keys() const { return {pool_.begin(), pool_.end()}; }

  const std::map<std::string, CompoundLink>& links() const noexcept { return links_; }

  const std::map<std::string, std::set<std::string>>& derivations() const noexcept {
    return derived_from_;
  }

  StoreManifest manifest() const {
    return {version_, proprietor_count_, infon_count_, link_count_};
  }

  /// Full-scan integrity check: sphere purity, no compound at rest, link
  /// completeness, manifest counts, justified related entries.
  ScanReport full_scan_check() const {
    ScanReport report;
    auto violation = [&](const std::string& what) {
      report.ok = false;
      report.violations.push_back(what);
    };

    std::size_t stored = 0;
    for (const auto& key : pool_) {
      auto it = table_.find(key);
      if (it == table_.end()) {
        violation("pool record " + key + " missing from the infon table");
        continue;
      }
      ++stored;
      if (referent_count(it->second) != 0) violation("pool record " + key + " is not NII");
    }
    for (const auto& [sphere_key, sphere] : spheres_) {
      std::set<std::string> self = sphere.self_singletons;
      self.insert(sphere.self_multitudes.begin(), sphere.self_multitudes.end());
      stored += self.size();
      for (const auto& key : self) {
        auto it = table_.find(key);
        if (it == table_.end()) {
          violation("sphere " + sphere_key + " atom " + key + " missing from the infon table");
          continue;
        }
        std::set<std::string> people = referents(it->second);
        if (people.size() != 1)
          violation("sphere " + sphere_key + " holds a non-atomic record " + key);
        else if (*people.begin() != sphere.proprietor_person)
          violation("sphere " + sphere_key + " holds another proprietor's atom " + key);
      }
      for (const auto& [key, justification] : sphere.related_nii)
        if (justification.empty())
          violation("sphere " + sphere_key + " related entry " + key + " lacks justification");
      for (const auto& link_id : sphere.links)
        if (!links_.count(link_id))
          violation("sphere " + sphere_key + " references unknown link " + link_id);
    }
    for (const auto& [link_id, link] : links_) {
      if (link.atom_ids.size() < 2) violation("link " + link_id + " has fewer than two atoms");
      std::set<std::string> people;
      std::vector<Infon> atoms;
      bool complete = true;
      for (const auto& atom_id : link.atom_ids) {
        auto it = table_.find(atom_id);
        if (it == table_.end()) {
          violation("link " + link_id + " references unknown atom " + atom_id);
          complete = false;
          continue;
        }
        atoms.push_back(it->second);
        std::set<std::string> p = referents(it->second);
        if (p.size() != 1) {
          violation("link " + link_id + " atom " + atom_id + " is not atomic");
          complete = false;
        } else if (!people.insert(*p.begin()).second) {
          violation("link " + link_id + " atoms repeat a proprietor");
        }
      }
      if (complete && !atoms.empty() && prop(join(atoms)) != people)
        violation("link " + link_id + " does not recompose its proprietor set");
    }
    if (proprietor_count_ != proprietors_.size())
      violation("manifest proprietor_count drifted from the table");
    if (infon_count_ != stored) violation("manifest infon_count drifted from stored records");
    if (link_count_ != links_.size()) violation("manifest link_count drifted from the link table");
    return report;
  }

 private:
  // -------------------------------------------------------------------------
  // Write batching: append lines per file (sorted by record key within the
  // batch), then commit the manifest atomically.

  struct Batch {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> lines;
    std::set<std::string> touched;
    std::size_t d_proprietors = 0, d_infons = 0, d_links = 0;

    void add(const std::string& rel, const std::string& sort_key, const std::string& line) {
      lines[rel].emplace_back(sort_key, line);
      touched.insert(rel);
    }
    void touch(const std::string& rel) { touched.insert(rel); }
    bool empty() const { return touched.empty(); }
  };

  struct FileState {
    std::size_t records = 0;
    std::size_t bytes = 0;
  };

  std::string manifest_line() const {
    Json files = Json::object();
    for (const auto& [rel, st] : files_) {
      Json f = Json::object();
      f["records"] = st.records;
      f["bytes"] = st.bytes;
      files[rel] = std::move(f);
    }
    Json m = Json::object();
    m["version"] = version_;
    m["proprietor_count"] = proprietor_count_;
    m["infon_count"] = infon_count_;
    m["link_count"] = link_count_;
    m["files"] = std::move(files);
    return m.dump();
  }

  static void write_file_atomic(const std::filesystem::path& dir, const std::string& rel,
                                const std::string& content) {
    namespace fs = std::filesystem;
    fs::path tmp = dir / (rel + ".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
      if (!out) fail(Errc::store_io, "cannot write " + tmp.string());
      out << content;
      out.flush();
      if (!out) fail(Errc::store_io, "write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    fs::rename(tmp, dir / rel, ec);
    if (ec) fail(Errc::store_io, "cannot commit " + rel);
  }

  // -------------------------------------------------------------------------
  // Load / replay

  void load() {
    namespace fs = std::filesystem;
    std::ifstream mf(dir_ / kManifest);
    if (!mf) fail(Errc::store_io, dir_.string() + " is not a store (missing manifest)");
    std::string line;
    std::getline(mf, line);
    Json m;
    try {
      m = Json::parse(line);
      version_ = m.at("version").get<int>();
      proprietor_count_ = m.at("proprietor_count").get<std::size_t>();
      infon_count_ = m.at("infon_count").get<std::size_t>();
      link_count_ = m.at("link_count").get<std::size_t>();
      for (const auto& [rel, st] : m.at("files").items())
        files_[rel] = FileState{st.at("records").get<std::size_t>(),
                                st.at("bytes").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::store_io, std::string("corrupt manifest: ") + e.what());
    }

    // Read each file's committed prefix; roll back any uncommitted tail.
    std::map<std::string, std::vector<std::string>> records;
    for (const auto& [rel, st] : files_) {
      std::ifstream in(dir_ / rel, std::ios::binary);
      std::string blob;
      if (in) blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      if (blob.size() < st.bytes)
        fail(Errc::store_io, rel + " is shorter than its committed length");
      if (blob.size() > st.bytes) {
        std::error_code ec;
        fs::resize_file(dir_ / rel, st.bytes, ec);
        if (ec) fail(Errc::store_io, "cannot roll back uncommitted tail of " + rel);
        blob.resize(st.bytes);
      }
      auto& lines = records[rel];
      std::size_t start = 0;
      while (start < blob.size()) {
        std::size_t end = blob.find('\n', start);
        if (end == std::string::npos) break;
        lines.push_back(blob.substr(start, end - start));
        start = end + 1;
      }
      if (lines.size() != st.records)
        fail(Errc::store_io, rel + " committed record count does not match its content");
    }

    try {
      for (const auto& line : records[kProprietors]) replay_proprietor(line);
      for (const auto& line : records[kPool]) replay_pool(line);
      for (const auto& line : records[kLinks]) replay_link(line);
      for (const auto& [key, rec] : proprietors_)
        for (const auto& line : records[rec.sphere_ref]) replay_sphere(key, line);
      for (const auto& line : records[kDerived]) replay_derived(line);
      for (const auto& line : records[kPolicy]) replay_policy(line);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(Errc::store_io, std::string("corrupt store record: ") + e.what());
    }
  }

  std::string proprietor_line(const ProprietorRecord& rec) const {
    Json j = Json::object();
    j["key"] = rec.key;
    j["identity"] = to_json(rec.identity);
    j["sphere"] = rec.sphere_ref;
    j["created_at"] = rec.created_at;
    for (const auto& [k, v] : rec.extra.items())
      if (!j.contains(k)) j[k] = v;
    return j.dump();
  }

  void replay_proprietor(const std::string& line) {
    Json j = Json::parse(line);
    Json extra = Json::object();
    for (const auto& [k, v] : j.items())
      if (k != "key" && k != "identity" && k != "sphere" && k != "created_at") extra[k] = v;
    ProprietorRecord rec(j.at("key").get<std::string>(), identifier_from_json(j.at("identity")),
                         j.at("sphere").get<std::string>(), j.at("created_at").get<std::int64_t>(),
                         std::move(extra));
    apply_register(rec);
  }

  void apply_register(const ProprietorRecord& rec) {
    proprietors_.emplace(rec.key, rec);
    proprietor_order_.push_back(rec.key);
    person_to_proprietor_[rec.identity.person_key()] = rec.key;
    descriptors_to_proprietor_[rec.identity.descriptor_canon()] = rec.key;
    PiiSphere sphere;
    sphere.proprietor = rec.key;
    sphere.proprietor_person = rec.identity.person_key();
    spheres_.emplace(rec.key, std::move(sphere));
    seq_ += 1;
  }

  void replay_pool(const std::string& line) {
    Json j = Json::parse(line);
    std::string op = j.at("op").get<std::string>();
    if (op == "add") {
      Infon s = infon_from_json(j.at("infon"));
      pool_.insert(s.key());
      table_.emplace(s.key(), std::move(s));
    } else if (op == "claim-pni") {
      pni_[j.at("key").get<std::string>()] = j.at("owner").get<std::string>();
    } else {
      fail(Errc::store_io, "unknown pool op '" + op + "'");
    }
  }

  void replay_link(const std::string& line) {
    Json j = Json::parse(line);
    CompoundLink link;
    link.link_id = j.at("link_id").get<std::string>();
    for (const auto& id : j.at("atom_ids")) link.atom_ids.insert(id.get<std::string>());
    link.origin = j.at("origin_key").get<std::string>();
    Infon origin = infon_from_json(j.at("origin"));
    table_.emplace(origin.key(), std::move(origin));
    links_.emplace(link.link_id, std::move(link));
  }

  void replay_sphere(const std::string& sphere_key, const std::string& line) {
    Json j = Json::parse(line);
    PiiSphere& sphere = spheres_.at(sphere_key);
    std::string op = j.at("op").get<std::string>();
    if (op == "self") {
      Infon s = infon_from_json(j.at("infon"));
      std::string key = s.key();
      table_.emplace(key, std::move(s));
      if (j.at("kind").get<std::string>() == "singleton")
        sphere.self_singletons.insert(key);
      else
        sphere.self_multitudes.insert(key);
    } else if (op == "related") {
      sphere.related_nii[j.at("key").get<std::string>()] =
          j.at("justification").get<std::string>();
    } else if (op == "link") {
      sphere.links.insert(j.at("link_id").get<std::string>());
    } else {
      fail(Errc::store_io, "unknown sphere op '" + op + "'");
    }
  }

  void replay_derived(const std::string& line) {
    Json j = Json::parse(line);
    Infon child = infon_from_json(j.at("infon"));
    auto& parents = derived_from_[child.key()];
    for (const auto& p : j.at("parents")) parents.insert(p.get<std::string>());
    table_.emplace(child.key(), std::move(child));
  }

  std::string rule_line(const PolicyRule& rule) const {
    Json j = Json::object();
    j["rule_id"] = rule.rule_id;
    j["selector"] = rule.selector.to_json();
    j["scope"] = scope_name(rule.scope);
    return j.dump();
  }

  void replay_policy(const std::string& line) {
    Json j = Json::parse(line);
    if (j.contains("grant")) {
      policy_.grants.emplace(j["grant"].at("principal").get<std::string>(),
                             j["grant"].at("sphere").get<std::string>());
      return;
    }
    PolicyRule rule;
    rule.rule_id = j.at("rule_id").get<std::string>();
    rule.selector = Selector::from_json(j.at("selector"));
    rule.scope = scope_from_name(j.at("scope").get<std::string>());
    policy_.rules[rule.rule_id] = rule;
  }

  // -------------------------------------------------------------------------
  // Ingest planning

  void plan_ingest(const Infon& s, Batch& batch, IngestReport& report) {
    Classification c = classify(s, opts_.schema);
    if (c.family == Family::NII) {
      plan_pool_add(s, batch);
      report.pool.push_back(s.key());
      return;
    }
    if (c.is_atomic()) {
      const std::string person = *referents(s).begin();
      const std::string sphere_key = person_to_proprietor_.at(person);
      SelfProjection parts = to_self(s, opts_.schema);
      for (const Infon& part : parts.self_parts) {
        bool singleton = detail::is_sapinfon(part, opts_.schema) &&
                         sapinfon_kind(part, opts_.schema) == SapinfonKind::singleton;
        plan_sphere_add(sphere_key, part, singleton, batch);
        report.placements.emplace_back(sphere_key, part.key());
      }
      for (const Infon& part : parts.nii_parts) {
        plan_pool_add(part, batch);
        report.pool.push_back(part.key());
      }
      return;
    }
    // Compound: reduce, place the atoms, record one link in every touched sphere.
    ReductionResult red = reduce(s);
    if (!links_.count(red.link.link_id) && !batch_links_.count(red.link.link_id)) {
      Json line = Json::object();
      line["link_id"] = red.link.link_id;
      Json ids = Json::array();
      for (const auto& id : red.link.atom_ids) ids.push_back(id);
      line["atom_ids"] = std::move(ids);
      line["origin_key"] = red.link.origin;
      line["origin"] = to_json(s);
      batch.add(kLinks, red.link.link_id, line.dump());
      batch.d_links += 1;
      batch_links_.insert(red.link.link_id);
      pending_links_.emplace_back(red.link, s);
    }
    report.links.push_back(red.link.link_id);
    for (const Infon& atom : red.atoms) {
      plan_ingest(atom, batch, report);
      const std::string person = *referents(atom).begin();
      const std::string sphere_key = person_to_proprietor_.at(person);
      const PiiSphere& sphere = spheres_.at(sphere_key);
      auto pending_ref = std::make_pair(sphere_key, red.link.link_id);
      if (!sphere.links.count(red.link.link_id) && batch_link_refs_.insert(pending_ref).second) {
        Json line = Json::object();
        line["op"] = "link";
        line["link_id"] = red.link.link_id;
        batch.add(sphere_rel_path(sphere_key), "~link:" + red.link.link_id, line.dump());
        pending_link_refs_.push_back(pending_ref);
      }
    }
  }

  void plan_pool_add(const Infon& s, Batch& batch) {
    if (pool_.count(s.key()) || batch_pool_.count(s.key())) return;
    Json line = Json::object();
    line["op"] = "add";
    line["key"] = s.key();
    line["infon"] = to_json(s);
    batch.add(kPool, s.key(), line.dump());
    batch.d_infons += 1;
    batch_pool_.insert(s.key());
    pending_pool_.push_back(s);
  }

  void plan_sphere_add(const std::string& sphere_key, const Infon& s, bool singleton,
                       Batch& batch) {
    const PiiSphere& sphere = spheres_.at(sphere_key);
    if (sphere.holds_self(s.key()) || batch_sphere_.count({sphere_key, s.key()})) return;
    Json line = Json::object();
    line["op"] = "self";
    line["kind"] = singleton ? "singleton" : "multitude";
    line["key"] = s.key();
    line["infon"] = to_json(s);
    batch.add(sphere_rel_path(sphere_key), s.key(), line.dump());
    batch.d_infons += 1;
    batch_sphere_.insert({sphere_key, s.key()});
    pending_sphere_.emplace_back(sphere_key, s, singleton);
  }

  void commit(Batch& batch) {
    if (batch.empty()) {
      clear_pending();
      return;
    }
    commit_files(batch);
    for (const auto& s : pending_pool_) {
      pool_.insert(s.key());
      table_.emplace(s.key(), s);
    }
    for (const auto& [sphere_key, s, singleton] : pending_sphere_) {
      table_.emplace(s.key(), s);
      if (singleton)
        spheres_.at(sphere_key).self_singletons.insert(s.key());
      else
        spheres_.at(sphere_key).self_multitudes.insert(s.key());
    }
    for (const auto& [link, origin] : pending_links_) {
      table_.emplace(origin.key(), origin);
      links_.emplace(link.link_id, link);
    }
    for (const auto& [sphere_key, link_id] : pending_link_refs_)
      spheres_.at(sphere_key).links.insert(link_id);
    clear_pending();
  }

  void commit_files(Batch& batch) {
    for (const auto& rel : batch.touched) files_.try_emplace(rel);
    for (auto& [rel, entries] : batch.lines) {
      std::sort(entries.begin(), entries.end());
      std::ofstream out(dir_ / rel, std::ios::app | std::ios::binary);
      if (!out) fail(Errc::store_io, "cannot append to " + rel);
      FileState& st = files_[rel];
      for (const auto& [key, line] : entries) {
        out << line << "\n";
        st.records += 1;
        st.bytes += line.size() + 1;
      }
      out.flush();
      if (!out) fail(Errc::store_io, "write to " + rel + " failed");
    }
    for (const auto& rel : batch.touched) {
      if (!std::filesystem::exists(dir_ / rel)) std::ofstream(dir_ / rel, std::ios::app);
    }
    version_ += 1;
    proprietor_count_ += batch.d_proprietors;
    infon_count_ += batch.d_infons;
    link_count_ += batch.d_links;
    write_file_atomic(dir_, kManifest, manifest_line() + "\n");
  }

  void clear_pending() {
    batch_pool_.clear();
    batch_sphere_.clear();
    batch_links_.clear();
    batch_link_refs_.clear();
    pending_pool_.clear();
    pending_sphere_.clear();
    pending_links_.clear();
    pending_link_refs_.clear();
  }

  // -------------------------------------------------------------------------
  // Policy evaluation

  std::set<std::string> effective_grants(const PolicyContext& ctx) const {
    std::set<std::string> grants = ctx.granted_spheres;
    for (const auto& [principal, sphere_key] : policy_.grants)
      if (principal == ctx.principal) grants.insert(sphere_key);
    return grants;
  }

  /// The taint closure: the infon plus every ancestor it derives from.
  std::set<std::string> ancestry(const std::string& key) const {
    std::set<std::string> closure;
    std::deque<std::string> frontier{key};
    while (!frontier.empty()) {
      std::string k = frontier.front();
      frontier.pop_front();
      if (!closure.insert(k).second) continue;
      auto it = derived_from_.find(k);
      if (it != derived_from_.end())
        for (const auto& p : it->second) frontier.push_back(p);
    }
    return closure;
  }

  std::set<std::string> placements_of(const std::string& key) const {
    std::set<std::string> out;
    for (const auto& [sphere_key, sphere] : spheres_)
      if (sphere.holds_self(key)) out.insert(sphere_key);
    return out;
  }

  bool selector_matches(const Selector& sel, const std::string& key) const {
    switch (sel.kind) {
      case Selector::Kind::all: return true;
      case Selector::Kind::infon: return sel.infon_key == key;
      case Selector::Kind::sphere: {
        auto it = spheres_.find(sel.sphere);
        return it != spheres_.end() && it->second.holds_self(key);
      }
      case Selector::Kind::family: {
        auto it = table_.find(key);
        return it != table_.end() && classify(it->second, opts_.schema).family == sel.family;
      }
    }
    return false;
  }

  Verdict evaluate(const std::string& key, const std::set<std::string>& grants) const {
    std::set<std::string> closure = ancestry(key);
    std::optional<Verdict> deny;
    for (const auto& [rule_id, rule] : policy_.rules) {
      for (const auto& k : closure) {
        if (!selector_matches(rule.selector, k)) continue;
        if (rule.scope == ProtectionScope::existence_hide) return Verdict::deny(rule_id, true);
        if (rule.scope == ProtectionScope::disclose_deny) {
          if (!deny) deny = Verdict::deny(rule_id);
          break;
        }
        // require-grant: every matched key in the closure must be covered
        std::set<std::string> governing = placements_of(k);
        if (const std::string* owner = pni_owner(k)) governing.insert(*owner);
        bool satisfied = true;
        for (const auto& g : governing)
          if (!grants.count(g)) satisfied = false;
        if (!satisfied) {
          if (!deny) deny = Verdict::deny(rule_id);
          break;
        }
      }
    }
    return deny.value_or(Verdict::allow());
  }

  bool has_existence_hide(const std::string& key) const {
    std::set<std::string> closure = ancestry(key);
    for (const auto& [rule_id, rule] : policy_.rules) {
      if (rule.scope != ProtectionScope::existence_hide) continue;
      for (const auto& k : closure)
        if (selector_matches(rule.selector, k)) return true;
    }
    return false;
  }

  std::optional<Alert> emit_alert(const std::string& infon_key, const PolicyContext& ctx,
                                  const Verdict& outcome) {
    const Infon* s = find_infon(infon_key);
    bool denied_pii = !outcome.allowed && s != nullptr && referent_count(*s) > 0;
    if (!denied_pii && !opts_.audit_all) return std::nullopt;
    Alert alert;
    alert.timestamp = opts_.clock();
    alert.principal = ctx.principal;
    alert.rule_id = outcome.rule_id;
    if (s != nullptr) alert.proprietors = referents(*s);
    alert.infon_key = infon_key;
    alert.outcome = outcome.allowed ? "allow" : "deny";
    try {
      std::ofstream out(dir_ / kAlerts, std::ios::app | std::ios::binary);
      out << alert.to_json().dump() << "\n";
    } catch (...) {
      // sink failures never block the verdict
    }
    if (opts_.alert_sink) {
      try {
        opts_.alert_sink(alert);
      } catch (...) {
      }
    }
    return alert;
  }

  // -------------------------------------------------------------------------
  // Relatedness boundary

  bool is_sensitive(const Infon& s) const {
    for (const auto& t : s.properties())
      if (t.param == "sensitivity" && t.value.is_text() && opts_.sensitive_tags.count(t.value.raw()))
        return true;
    return false;
  }

  /// Minimum hop distance from the sphere's proprietor to any object of the
  /// infon, over the co-occurrence graph of stored records.
  std::size_t relatedness_distance(const PiiSphere& sphere, const Infon& nu) const {
    constexpr std::size_t unreachable = static_cast<std::size_t>(-1);
    std::map<std::string, std::set<std::string>> adjacency;
    auto link_all = [&](const Infon& s) {
      std::vector<ObjectRef> objs = objects(s);
      for (std::size_t i = 0; i < objs.size(); ++i)
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
          adjacency[objs[i].id()].insert(objs[j].id());
          adjacency[objs[j].id()].insert(objs[i].id());
        }
    };
    for (const auto& key : pool_) link_all(table_.at(key));
    for (const auto& [sphere_key, sp] : spheres_) {
      for (const auto& key : sp.self_singletons) link_all(table_.at(key));
      for (const auto& key : sp.self_multitudes) link_all(table_.at(key));
    }

    std::set<std::string> targets;
    for (const auto& o : objects(nu)) targets.insert(o.id());
    if (targets.empty()) return unreachable;

    std::map<std::string, std::size_t> dist{{sphere.proprietor_person, 0}};
    std::deque<std::string> frontier{sphere.proprietor_person};
    std::size_t best = targets.count(sphere.proprietor_person) ? 0 : unreachable;
    while (!frontier.empty()) {
      std::string node = frontier.front();
      frontier.pop_front();
      std::size_t d = dist[node];
      auto it = adjacency.find(node);
      if (it == adjacency.end()) continue;
      for (const auto& next : it->second) {
        if (dist.count(next)) continue;
        dist[next] = d + 1;
        if (targets.count(next)) best = std::min(best, d + 1);
        frontier.push_back(next);
      }
    }
    return best;
  }

  PiiSphere& require_sphere(const std::string& key) {
    auto it = spheres_.find(key);
    if (it == spheres_.end()) fail(Errc::unknown_sphere, "no sphere for proprietor " + key);
    return it->second;
  }

  static std::string sphere_rel_path(const std::string& proprietor_key) {
    std::string name = proprietor_key;
    if (!name.empty() && name[0] == '#') name.erase(0, 1);
    return "spheres/" + name + ".sph";
  }

  std::filesystem::path dir_;
  StoreOptions opts_;

  int version_ = 0;
  std::size_t proprietor_count_ = 0;
  std::size_t infon_count_ = 0;
  std::size_t link_count_ = 0;
  std::size_t seq_ = 0;
  std::map<std::string, FileState> files_;

  std::vector<std::string> proprietor_order_;
  std::map<std::string, ProprietorRecord> proprietors_;
  std::map<std::string, std::string> person_to_proprietor_;
  std::map<std::string, std::string> descriptors_to_proprietor_;
  std::map<std::string, Infon> table_;
  std::set<std::string> pool_;
  std::map<std::string, std::string> pni_;
  std::map<std::string, PiiSphere> spheres_;
  std::map<std::string, CompoundLink> links_;
  std::map<std::string, std::set<std::string>> derived_from_;
  PolicySet policy_;

  // per-batch staging (ingest builds the whole batch before any state change)
  std::set<std::string> batch_pool_;
  std::set<std::pair<std::string, std::string>> batch_sphere_;
  std::set<std::string> batch_links_;
  std::set<std::pair<std::string, std::string>> batch_link_refs_;
  std::vector<Infon> pending_pool_;
  std::vector<std::tuple<std::string, Infon, bool>> pending_sphere_;
  std::vector<std::pair<CompoundLink, Infon>> pending_links_;
  std::vector<std::pair<std::string, std::string>> pending_link_refs_;
};

}  // namespace piidb
