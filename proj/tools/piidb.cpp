// piidb — command-line front end for the personal-information infon engine.
//
// Record input defaults to stdin; every subcommand other than `init` expects
// an existing store directory (--store or PIIDB_STORE). Data goes to stdout,
// diagnostics to stderr. Exit codes: 0 success, 1 domain error, 2 usage.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "piidb/piidb.hpp"

namespace fs = std::filesystem;
using namespace piidb;

namespace {

struct Options {
  std::string store;
  std::string in;
  std::string format = "records";
  std::string schema_path;
  std::string sphere;
  std::string principal;
  std::string purpose;
  std::string justification;
  std::string infon_key;
  std::string rule_id;
  std::string scope;
  std::string selector;
  std::string op;
  std::string relation;
  std::vector<std::string> grants;
  int boundary = -1;
  bool anonymized = false;
};

// Advisory store lock, one writer or many readers per store directory.
class StoreLock {
 public:
  StoreLock(const fs::path& dir, bool exclusive) {
    fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(Errc::store_io, "cannot open store lock file");
    if (::flock(fd_, (exclusive ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(Errc::store_locked, "another process holds the store lock");
    }
  }
  ~StoreLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<std::string> read_lines(const Options& opt) {
  std::vector<std::string> lines;
  auto drain = [&](std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) lines.push_back(line);
    }
  };
  if (opt.in.empty() || opt.in == "-") {
    drain(std::cin);
  } else {
    std::ifstream in(opt.in);
    if (!in) fail(Errc::store_io, "cannot read input file " + opt.in);
    drain(in);
  }
  return lines;
}

RelationSchema load_schema(const std::string& path) {
  RelationSchema schema;
  if (path.empty()) return schema;
  std::ifstream in(path);
  if (!in) fail(Errc::store_io, "cannot read schema file " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::malformed_infon, std::string("bad schema record: ") + e.what());
    }
    schema.add_possessive(j.at("relation").get<std::string>(),
                          j.value("owner", std::size_t{0}), j.value("owned", std::size_t{1}),
                          j.value("bridge", std::string("has")));
  }
  return schema;
}

void require_store_dir(const std::string& store) {
  if (store.empty())
    throw CLI::ValidationError("--store", "a store directory is required (or set PIIDB_STORE)");
  if (!fs::is_directory(store))
    fail(Errc::store_io, "store directory " + store + " does not exist (run `piidb init` first)");
}

StoreOptions store_options(const Options& opt) {
  StoreOptions so;
  so.schema = load_schema(opt.schema_path);
  if (opt.boundary >= 0) so.relatedness_boundary = opt.boundary;
  return so;
}

PolicyContext context_of(const Options& opt) {
  PolicyContext ctx;
  ctx.principal = opt.principal;
  ctx.purpose = opt.purpose;
  ctx.granted_spheres.insert(opt.grants.begin(), opt.grants.end());
  return ctx;
}

void print_infon(const Infon& s, const Options& opt) {
  if (opt.format == "text")
    std::cout << render_text(s) << "\n";
  else
    std::cout << to_record_line(s) << "\n";
}

Json proprietor_json(const ProprietorRecord& rec) {
  Json j = Json::object();
  j["key"] = rec.key;
  j["identity"] = to_json(rec.identity);
  j["sphere"] = rec.sphere_ref;
  j["created_at"] = rec.created_at;
  for (const auto& [k, v] : rec.extra.items())
    if (!j.contains(k)) j[k] = v;
  return j;
}

int cmd_init(const Options& opt) {
  if (opt.store.empty())
    throw CLI::ValidationError("--store", "a store directory is required (or set PIIDB_STORE)");
  Store::init(opt.store);
  std::cerr << "initialized store at " << opt.store << "\n";
  return 0;
}

int cmd_register(const Options& opt) {
  require_store_dir(opt.store);
  StoreLock lock(opt.store, true);
  Store store(opt.store, store_options(opt));
  for (const auto& line : read_lines(opt)) {
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::malformed_infon, std::string("bad identity record: ") + e.what());
    }
    Identifier identity = identifier_from_json(j);
    Json extra = Json::object();
    for (const auto& [k, v] : j.items())
      if (k != "person_key" && k != "descriptors") extra[k] = v;
    std::string key = store.register_proprietor(identity, std::move(extra));
    if (opt.format == "text") {
      std::cout << key << "\n";
    } else {
      Json out = Json::object();
      out["key"] = key;
      out["sphere"] = store.proprietor(key)->sphere_ref;
      std::cout << out.dump() << "\n";
    }
  }
  return 0;
}

Json ingest_report_json(const IngestReport& rep) {
  Json j = Json::object();
  j["verdict"] = to_json(rep.verdict);
  Json ps = Json::array();
  for (const auto& [sphere, key] : rep.placements) {
    Json p = Json::object();
    p["sphere"] = sphere;
    p["infon_key"] = key;
    ps.push_back(std::move(p));
  }
  j["placements"] = std::move(ps);
  j["links"] = rep.links;
  j["pool"] = rep.pool;
  return j;
}

// `ingest` accepts plain infon records and the kind-tagged records that
// `export` emits, so an exported dump re-ingests directly.
int cmd_ingest(const Options& opt) {
  require_store_dir(opt.store);
  StoreLock lock(opt.store, true);
  Store store(opt.store, store_options(opt));
  for (const auto& line : read_lines(opt)) {
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::malformed_infon, std::string("bad record: ") + e.what());
    }
    if (j.is_object() && j.contains("kind")) {
      std::string kind = j["kind"].get<std::string>();
      if (kind == "proprietor") {
        Identifier identity = identifier_from_json(j.at("identity"));
        if (store.proprietor_of_person(identity.person_key()) != nullptr) continue;
        store.register_proprietor(identity, j.value("extra", Json::object()));
      } else if (kind == "infon") {
        IngestReport rep = store.ingest(infon_from_json(j.at("record")));
        if (opt.format != "text") std::cout << ingest_report_json(rep).dump() << "\n";
      } else if (kind == "related") {
        store.attach_related_nii(j.at("sphere").get<std::string>(),
                                 j.at("infon_key").get<std::string>(),
                                 j.at("justification").get<std::string>());
      } else if (kind == "pni") {
        store.claim_pni(j.at("owner").get<std::string>(), j.at("infon_key").get<std::string>());
      } else {
        fail(Errc::malformed_infon, "unknown record kind '" + kind + "'");
      }
      continue;
    }
    IngestReport rep = store.ingest(infon_from_json(j));
    if (opt.format == "text") {
      std::cout << family_name(rep.verdict.family);
      for (const auto& [sphere, key] : rep.placements) std::cout << " " << sphere << "<-" << key;
      std::cout << "\n";
    } else {
      std::cout << ingest_report_json(rep).dump() << "\n";
    }
  }
  return 0;
}

int cmd_classify(const Options& opt) {
  require_store_dir(opt.store);
  RelationSchema schema = load_schema(opt.schema_path);
  for (const auto& line : read_lines(opt)) {
    Classification c = classify(parse_record_line(line), schema);
    if (opt.format == "text") {
      std::cout << family_name(c.family);
      if (c.arity) std::cout << " " << arity_name(*c.arity);
      if (c.self_kind) std::cout << " " << self_kind_name(*c.self_kind);
      std::cout << " n=" << c.n << "\n";
    } else {
      std::cout << to_json(c).dump() << "\n";
    }
  }
  return 0;
}

int cmd_reduce(const Options& opt) {
  require_store_dir(opt.store);
  for (const auto& line : read_lines(opt)) {
    ReductionResult red = reduce(parse_record_line(line));
    for (const auto& atom : red.atoms) print_infon(atom, opt);
    Json link = Json::object();
    link["link_id"] = red.link.link_id;
    link["atom_ids"] = red.link.atom_ids;
    link["origin_key"] = red.link.origin;
    if (opt.format == "text")
      std::cout << "link " << red.link.link_id << " over " << red.link.atom_ids.size()
                << " atoms\n";
    else
      std::cout << link.dump() << "\n";
  }
  return 0;
}

int cmd_anonymize(const Options& opt) {
  require_store_dir(opt.store);
  for (const auto& line : read_lines(opt)) {
    AnonymizeResult res = anonymize(parse_record_line(line));
    print_infon(res.ninfon, opt);
  }
  return 0;
}

std::vector<std::string> input_keys(const Options& opt, Store& store) {
  std::vector<std::string> keys;
  if (!opt.infon_key.empty()) {
    keys.push_back(opt.infon_key);
    return keys;
  }
  for (const auto& line : read_lines(opt)) {
    Infon s = parse_record_line(line);
    if (store.find_infon(s.key()) == nullptr)
      fail(Errc::unknown_infon, "record is not stored (ingest it first): " + s.key());
    keys.push_back(s.key());
  }
  return keys;
}

int cmd_attach_nii(const Options& opt) {
  require_store_dir(opt.store);
  if (opt.sphere.empty()) throw CLI::ValidationError("--sphere", "a sphere key is required");
  StoreLock lock(opt.store, true);
  Store store(opt.store, store_options(opt));
  for (const auto& key : input_keys(opt, store))
    store.attach_related_nii(opt.sphere, key, opt.justification);
  return 0;
}

int cmd_claim_pni(const Options& opt) {
  require_store_dir(opt.store);
  if (opt.sphere.empty()) throw CLI::ValidationError("--sphere", "an owner sphere key is required");
  StoreLock lock(opt.store, true);
  Store store(opt.store, store_options(opt));
  for (const auto& key : input_keys(opt, store)) store.claim_pni(opt.sphere, key);
  return 0;
}

int cmd_protect(const Options& opt) {
  require_store_dir(opt.store);
  if (opt.rule_id.empty()) throw CLI::ValidationError("--rule-id", "a rule id is required");
  StoreLock lock(opt.store, true);
  Store store(opt.store, store_options(opt));
  ProtectionScope scope = scope_from_name(opt.scope);
  if (!opt.infon_key.empty()) {
    store.protect(opt.infon_key, ProtectionMark{opt.rule_id, scope});
    return 0;
  }
  if (opt.selector.empty())
    throw CLI::ValidationError("--selector", "give --infon-key or --selector");
  Selector sel;
  if (opt.selector == "all") {
    sel = Selector::all();
  } else if (opt.selector.rfind("sphere:", 0) == 0) {
    sel = Selector::by_sphere(opt.selector.substr(7));
  } else if (opt.selector.rfind("family:", 0) == 0) {
    std::string f = opt.selector.substr(7);
    if (f != "PII" && f != "NII")
      throw CLI::ValidationError("--selector", "family must be PII or NII");
    sel = Selector::by_family(f == "PII" ? Family::PII : Family::NII);
  } else if (opt.selector.rfind("infon:", 0) == 0) {
    sel = Selector::by_infon(opt.selector.substr(6));
  } else {
    throw CLI::ValidationError("--selector", "use all, sphere:<key>, family:<F>, or infon:<key>");
  }
  store.add_rule(PolicyRule{opt.rule_id, sel, scope});
  return 0;
}

int cmd_query(const Options& opt) {
  require_store_dir(opt.store);
  if (opt.sphere.empty()) throw CLI::ValidationError("--sphere", "a sphere key is required");
  if (opt.principal.empty()) throw CLI::ValidationError("--principal", "a principal is required");
  StoreLock lock(opt.store, true);  // reconstruction may record ancestry
  Store store(opt.store, store_options(opt));
  std::function<bool(const Infon&)> selector;
  if (!opt.relation.empty()) {
    std::string relation = opt.relation;
    selector = [relation](const Infon& s) { return s.relation() == relation; };
  }
  QueryResult res = store.query(opt.sphere, selector, context_of(opt));
  for (const auto& r : res.records) print_infon(r, opt);
  Json summary = Json::object();
  summary["returned"] = res.count();
  Json denied = Json::array();
  for (const auto& [key, rule] : res.denied) {
    Json d = Json::object();
    d["key"] = key;
    d["rule_id"] = rule;
    denied.push_back(std::move(d));
  }
  summary["denied"] = std::move(denied);
  std::cerr << summary.dump() << "\n";
  return 0;
}

int cmd_export(const Options& opt) {
  require_store_dir(opt.store);
  StoreLock lock(opt.store, false);
  Store store(opt.store, store_options(opt));
  if (opt.anonymized) {
    if (opt.sphere.empty())
      throw CLI::ValidationError("--sphere", "anonymized export needs a sphere key");
    for (const auto& s : store.export_anonymized(opt.sphere)) print_infon(s, opt);
    return 0;
  }
  // Full dump, re-ingestable in order.
  auto emit_infon = [&](const Infon& s) {
    Json j = Json::object();
    j["kind"] = "infon";
    j["record"] = to_json(s);
    std::cout << j.dump() << "\n";
  };
  for (const ProprietorRecord* rec : store.proprietors()) {
    Json j = Json::object();
    j["kind"] = "proprietor";
    j["identity"] = to_json(rec->identity);
    if (!rec->extra.empty()) j["extra"] = rec->extra;
    std::cout << j.dump() << "\n";
  }
  for (const auto& key : store.pool_keys()) emit_infon(*store.find_infon(key));
  for (const ProprietorRecord* rec : store.proprietors()) {
    const PiiSphere* sphere = store.sphere(rec->key);
    std::set<std::string> keys = sphere->self_singletons;
    keys.insert(sphere->self_multitudes.begin(), sphere->self_multitudes.end());
    for (const auto& key : keys) emit_infon(*store.find_infon(key));
  }
  for (const auto& [link_id, link] : store.links()) emit_infon(*store.find_infon(link.origin));
  for (const ProprietorRecord* rec : store.proprietors()) {
    const PiiSphere* sphere = store.sphere(rec->key);
    for (const auto& [key, justification] : sphere->related_nii) {
      Json j = Json::object();
      j["kind"] = "related";
      j["sphere"] = rec->key;
      j["infon_key"] = key;
      j["justification"] = justification;
      std::cout << j.dump() << "\n";
    }
  }
  for (const auto& key : store.pool_keys()) {
    if (const std::string* owner = store.pni_owner(key)) {
      Json j = Json::object();
      j["kind"] = "pni";
      j["owner"] = *owner;
      j["infon_key"] = key;
      std::cout << j.dump() << "\n";
    }
  }
  return 0;
}

int cmd_spheres(const Options& opt) {
  require_store_dir(opt.store);
  StoreLock lock(opt.store, false);
  Store store(opt.store, store_options(opt));
  for (const ProprietorRecord* rec : store.proprietors()) {
    if (opt.format == "text")
      std::cout << rec->key << " => " << rec->sphere_ref << " person="
                << rec->identity.person_key() << "\n";
    else
      std::cout << proprietor_json(*rec).dump() << "\n";
  }
  return 0;
}

int cmd_check(const Options& opt) {
  require_store_dir(opt.store);
  if (opt.infon_key.empty()) throw CLI::ValidationError("--infon-key", "an infon key is required");
  if (opt.principal.empty()) throw CLI::ValidationError("--principal", "a principal is required");
  StoreLock lock(opt.store, false);
  Store store(opt.store, store_options(opt));
  Verdict v = store.check_disclosure(opt.infon_key, context_of(opt));
  Json j = Json::object();
  j["verdict"] = v.allowed ? "allow" : "deny";
  if (!v.allowed) {
    j["rule_id"] = v.rule_id;
    j["hidden"] = v.hidden;
  }
  std::cout << j.dump() << "\n";
  if (!v.allowed) {
    std::cerr << "policy-denied: rule " << v.rule_id << "\n";
    return 1;
  }
  return 0;
}

// Two serialized infons plus an operation name; prints the serialized result.
// project and negate-min read their component set from the second record.
int cmd_algebra(const Options& opt) {
  require_store_dir(opt.store);
  std::vector<std::string> lines = read_lines(opt);
  if (opt.op == "join") {
    std::vector<Infon> parts;
    for (const auto& line : lines) parts.push_back(parse_record_line(line));
    print_infon(join(parts), opt);
    return 0;
  }
  if (lines.size() != 2)
    fail(Errc::malformed_infon, "algebra eval expects exactly two records, got " +
                                    std::to_string(lines.size()));
  Infon a = parse_record_line(lines[0]);
  Infon b = parse_record_line(lines[1]);
  if (opt.op == "combine") {
    print_infon(combine(a, b), opt);
  } else if (opt.op == "project") {
    print_infon(project(a, components(b)), opt);
  } else if (opt.op == "quotient") {
    print_infon(quotient(a, b), opt);
  } else if (opt.op == "union") {
    print_infon(union_of(a, b), opt);
  } else if (opt.op == "intersect") {
    print_infon(intersect(a, b), opt);
  } else if (opt.op == "negate-min") {
    print_infon(negate_min(a, components(b)), opt);
  } else if (opt.op == "extend") {
    print_infon(extend(a, {b}), opt);
  } else if (opt.op == "sub-infon") {
    Json j = Json::object();
    j["sub_infon"] = sub_infon(a, b);
    std::cout << j.dump() << "\n";
  } else {
    throw CLI::ValidationError("--op", "unknown operation '" + opt.op + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piidb — infon classification, anonymization, and piiSphere storage"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool with_input) {
    sub->add_option("--store", opt.store, "store directory")->envname("PIIDB_STORE");
    sub->add_option("--format", opt.format, "output format: records|text")
        ->check(CLI::IsMember({"records", "text"}));
    sub->add_option("--schema", opt.schema_path, "relation schema file (JSON lines)");
    if (with_input) sub->add_option("--in", opt.in, "input record file (default: stdin)");
    return sub;
  };

  auto* init = add_common(app.add_subcommand("init", "create an empty store"), false);
  auto* reg = add_common(app.add_subcommand("register", "register proprietors"), true);
  auto* ingest = add_common(app.add_subcommand("ingest", "classify, factor, and store records"), true);
  ingest->add_option("--boundary", opt.boundary, "related-NII hop limit");
  auto* classify_cmd = add_common(app.add_subcommand("classify", "classify records"), true);
  auto* reduce_cmd =
      add_common(app.add_subcommand("reduce", "reduce compound PII to atoms"), true);
  auto* anonymize_cmd = add_common(app.add_subcommand("anonymize", "strip identifiers"), true);
  auto* attach = add_common(app.add_subcommand("attach-nii", "attach related NII to a sphere"), true);
  attach->add_option("--sphere", opt.sphere, "sphere (proprietor) key");
  attach->add_option("--justification", opt.justification, "why the NII is privacy-relevant");
  attach->add_option("--infon-key", opt.infon_key, "stored infon key");
  attach->add_option("--boundary", opt.boundary, "related-NII hop limit");
  auto* claim = add_common(app.add_subcommand("claim-pni", "claim NII as personal"), true);
  claim->add_option("--sphere", opt.sphere, "owner (proprietor) key");
  claim->add_option("--infon-key", opt.infon_key, "stored infon key");
  auto* protect = add_common(app.add_subcommand("protect", "add a protection rule"), false);
  protect->add_option("--infon-key", opt.infon_key, "target infon key");
  protect->add_option("--selector", opt.selector, "all | sphere:<key> | family:<F> | infon:<key>");
  protect->add_option("--rule-id", opt.rule_id, "rule id");
  protect->add_option("--scope", opt.scope, "disclose-deny|disclose-require-grant|existence-hide")
      ->default_val("disclose-deny");
  auto* query = add_common(app.add_subcommand("query", "query a sphere"), false);
  query->add_option("--sphere", opt.sphere, "sphere (proprietor) key");
  query->add_option("--principal", opt.principal, "requesting principal");
  query->add_option("--purpose", opt.purpose, "stated purpose");
  query->add_option("--grant", opt.grants, "granted sphere keys");
  query->add_option("--relation", opt.relation, "filter by relation");
  auto* export_cmd = add_common(app.add_subcommand("export", "dump the store, or anonymize a sphere"), false);
  export_cmd->add_option("--sphere", opt.sphere, "sphere key (with --anonymized)");
  export_cmd->add_flag("--anonymized", opt.anonymized, "emit the sphere's atoms anonymized");
  auto* spheres = add_common(app.add_subcommand("spheres", "list the proprietor table"), false);
  auto* check = add_common(app.add_subcommand("check", "check disclosure of one infon"), false);
  check->add_option("--infon-key", opt.infon_key, "stored infon key");
  check->add_option("--principal", opt.principal, "requesting principal");
  check->add_option("--purpose", opt.purpose, "stated purpose");
  check->add_option("--grant", opt.grants, "granted sphere keys");
  auto* algebra = add_common(app.add_subcommand("algebra", "evaluate one algebra operation"), true);
  algebra->add_option("op", opt.op, "combine|project|quotient|union|intersect|negate-min|sub-infon|extend|join")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (init->parsed()) return cmd_init(opt);
    if (reg->parsed()) return cmd_register(opt);
    if (ingest->parsed()) return cmd_ingest(opt);
    if (classify_cmd->parsed()) return cmd_classify(opt);
    if (reduce_cmd->parsed()) return cmd_reduce(opt);
    if (anonymize_cmd->parsed()) return cmd_anonymize(opt);
    if (attach->parsed()) return cmd_attach_nii(opt);
    if (claim->parsed()) return cmd_claim_pni(opt);
    if (protect->parsed()) return cmd_protect(opt);
    if (query->parsed()) return cmd_query(opt);
    if (export_cmd->parsed()) return cmd_export(opt);
    if (spheres->parsed()) return cmd_spheres(opt);
    if (check->parsed()) return cmd_check(opt);
    if (algebra->parsed()) return cmd_algebra(opt);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
