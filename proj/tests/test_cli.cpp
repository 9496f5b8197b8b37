// End-to-end tests run against the installed binary through a shell.
#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "generators.hpp"
#include "piidb/piidb.hpp"

using namespace piidb;
using testgen::person;
using testgen::person_identity;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& command) {
  RunResult res;
  FILE* pipe = ::popen((command + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = ::fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
  int status = ::pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string cli() { return std::string(PIIDB_CLI_PATH); }

struct CliStore {
  fs::path dir;
  fs::path scratch;

  CliStore(const std::string& tag) {
    dir = fs::temp_directory_path() / ("piidb-cli-" + tag + "-" + std::to_string(::getpid()));
    scratch = dir.string() + "-scratch";
    fs::remove_all(dir);
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    REQUIRE(run(cli() + " init --store " + dir.string()).exit_code == 0);
  }
  ~CliStore() {
    fs::remove_all(dir);
    fs::remove_all(scratch);
  }

  std::string file(const std::string& name, const std::string& content) const {
    fs::path p = scratch / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p.string();
  }
};

std::string identity_line(const std::string& person_key) {
  return to_json(person_identity(person_key)).dump() + "\n";
}

}  // namespace

TEST_CASE("cli: classify") {
  CliStore st("classify");
  Infon love = make_infon("are-in-love", {person("john"), person("mary")});
  std::string in = st.file("love.jsonl", to_record_line(love) + "\n");

  RunResult res = run(cli() + " classify --store " + st.dir.string() + " --in " + in);
  CHECK(res.exit_code == 0);
  CHECK(res.out == "{\"family\":\"PII\",\"arity\":\"compound\",\"self_kind\":null,\"n\":2}\n");

  SECTION("an empty record file yields empty output and exit 0") {
    std::string empty = st.file("empty.jsonl", "");
    RunResult r = run(cli() + " classify --store " + st.dir.string() + " --in " + empty);
    CHECK(r.exit_code == 0);
    CHECK(r.out.empty());
  }

  SECTION("a malformed record is a domain error") {
    std::string bad = st.file("bad.jsonl", "{not json\n");
    RunResult r = run(cli() + " classify --store " + st.dir.string() + " --in " + bad);
    CHECK(r.exit_code == 1);
  }

  SECTION("a missing store directory is refused") {
    RunResult r = run(cli() + " classify --store /nonexistent-piidb --in " + in);
    CHECK(r.exit_code == 1);
  }
}

TEST_CASE("cli: usage errors exit 2") {
  CHECK(run(cli() + " no-such-verb").exit_code == 2);
  CHECK(run(cli()).exit_code == 2);
  CliStore st("usage");
  CHECK(run(cli() + " query --store " + st.dir.string()).exit_code == 2);  // missing sphere
}

TEST_CASE("cli: concurrent writers are excluded by the store lock") {
  if (run("which flock >/dev/null").exit_code != 0) SKIP("flock(1) unavailable");
  CliStore st("lock");
  std::string ids = st.file("ids.jsonl", identity_line("john"));
  RunResult res = run("flock " + (st.dir / ".lock").string() + " -c 'sleep 1.5' & sleep 0.2; " +
                      cli() + " register --store " + st.dir.string() + " --in " + ids +
                      "; code=$?; wait; exit $code");
  CHECK(res.exit_code == 1);
}

TEST_CASE("cli: relation schemas drive self-projection") {
  CliStore st("schema");
  std::string schema = st.file("schema.jsonl",
                               R"({"relation":"is-fast","owner":0,"owned":1,"bridge":"has"})"
                               "\n");
  Infon fast = make_infon("is-fast", {person("john"), ObjectRef::nonperson("car1", "car")});
  std::string in = st.file("fast.jsonl", to_record_line(fast) + "\n");

  // with the schema the owned object joins the subject set, so the raw
  // record is atomic but not self information
  RunResult with = run(cli() + " classify --store " + st.dir.string() + " --schema " + schema +
                       " --in " + in);
  CHECK(with.out ==
        "{\"family\":\"PII\",\"arity\":\"atomic\",\"self_kind\":\"not-self\",\"n\":1}\n");
  RunResult without = run(cli() + " classify --store " + st.dir.string() + " --in " + in);
  CHECK(without.out.find("self-multitude") != std::string::npos);
}

TEST_CASE("cli: anonymize composes with classify") {
  CliStore st("anon");
  Infon jla = make_infon("loves", {person("john"), Scalar::text("apples")});
  std::string in = st.file("jla.jsonl", to_record_line(jla) + "\n");

  RunResult piped = run(cli() + " anonymize --store " + st.dir.string() + " --in " + in + " | " +
                        cli() + " classify --store " + st.dir.string());
  CHECK(piped.exit_code == 0);
  CHECK(piped.out == "{\"family\":\"NII\",\"arity\":null,\"self_kind\":null,\"n\":0}\n");
}

TEST_CASE("cli: reduce emits atoms plus a link record") {
  CliStore st("reduce");
  Infon kase = make_infon("case", {Scalar::number(17), person("john"), person("mary"),
                                   person("bob")});
  std::string in = st.file("case.jsonl", to_record_line(kase) + "\n");
  RunResult res = run(cli() + " reduce --store " + st.dir.string() + " --in " + in);
  CHECK(res.exit_code == 0);
  int lines = 0;
  for (char c : res.out)
    if (c == '\n') ++lines;
  CHECK(lines == 4);  // three atoms + one link
  CHECK(res.out.find("\"link_id\":\"lnk-" + kase.key() + "\"") != std::string::npos);
}

TEST_CASE("cli: register, ingest, query, spheres") {
  CliStore st("flow");
  std::string ids = st.file("ids.jsonl",
                            identity_line("john") + identity_line("mary") + identity_line("bob"));
  RunResult reg = run(cli() + " register --store " + st.dir.string() + " --in " + ids);
  REQUIRE(reg.exit_code == 0);
  CHECK(reg.out.find("\"key\":\"#p1\"") != std::string::npos);
  CHECK(reg.out.find("\"key\":\"#p3\"") != std::string::npos);

  Infon kase = make_infon("case", {Scalar::number(17), person("john"), person("mary"),
                                   person("bob")});
  std::string recs = st.file("case.jsonl", to_record_line(kase) + "\n");
  RunResult ing = run(cli() + " ingest --store " + st.dir.string() + " --in " + recs);
  REQUIRE(ing.exit_code == 0);
  CHECK(ing.out.find("\"placements\"") != std::string::npos);

  RunResult q = run(cli() + " query --store " + st.dir.string() +
                    " --sphere '#p1' --principal clerk --grant '#p1'");
  CHECK(q.exit_code == 0);
  CHECK(q.out.find("\"relation\":\"case\"") != std::string::npos);

  RunResult sp = run(cli() + " spheres --store " + st.dir.string() + " --format text");
  CHECK(sp.exit_code == 0);
  CHECK(sp.out.find("#p1 => spheres/p1.sph person=john") != std::string::npos);

  SECTION("unregistered referents fail with exit 1") {
    Infon stranger = make_infon("is-sick", {person("dave")});
    std::string bad = st.file("stranger.jsonl", to_record_line(stranger) + "\n");
    CHECK(run(cli() + " ingest --store " + st.dir.string() + " --in " + bad).exit_code == 1);
  }

  SECTION("malformed identity records fail with exit 1") {
    std::string bad = st.file("bad-ids.jsonl", "{\"person_key\":\"x\"}\n");
    CHECK(run(cli() + " register --store " + st.dir.string() + " --in " + bad).exit_code == 1);
  }

  SECTION("relation filters narrow query output") {
    Infon sick = make_infon("is-sick", {person("john")});
    std::string more = st.file("sick.jsonl", to_record_line(sick) + "\n");
    REQUIRE(run(cli() + " ingest --store " + st.dir.string() + " --in " + more).exit_code == 0);
    RunResult filtered = run(cli() + " query --store " + st.dir.string() +
                             " --sphere '#p1' --principal clerk --relation is-sick");
    CHECK(filtered.out.find("is-sick") != std::string::npos);
    CHECK(filtered.out.find("\"relation\":\"case\"") == std::string::npos);
  }

  SECTION("an existence-hide rule on a sphere leaves no trace in query output") {
    REQUIRE(run(cli() + " protect --store " + st.dir.string() +
                " --selector 'sphere:#p2' --rule-id hide-mother --scope existence-hide")
                .exit_code == 0);
    RunResult hidden = run(cli() + " query --store " + st.dir.string() +
                           " --sphere '#p2' --principal clerk --grant '#p1' --grant '#p2'" +
                           " --grant '#p3'");
    CHECK(hidden.exit_code == 0);
    CHECK(hidden.out.empty());
  }
}

TEST_CASE("cli: protect and check") {
  CliStore st("check");
  std::string ids = st.file("ids.jsonl", identity_line("john"));
  REQUIRE(run(cli() + " register --store " + st.dir.string() + " --in " + ids).exit_code == 0);
  Infon sick = make_infon("is-sick", {person("john")});
  std::string recs = st.file("sick.jsonl", to_record_line(sick) + "\n");
  REQUIRE(run(cli() + " ingest --store " + st.dir.string() + " --in " + recs).exit_code == 0);

  RunResult ok = run(cli() + " check --store " + st.dir.string() + " --infon-key " + sick.key() +
                     " --principal reader");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out == "{\"verdict\":\"allow\"}\n");

  REQUIRE(run(cli() + " protect --store " + st.dir.string() + " --infon-key " + sick.key() +
              " --rule-id r1 --scope disclose-deny")
              .exit_code == 0);
  RunResult denied = run(cli() + " check --store " + st.dir.string() + " --infon-key " +
                         sick.key() + " --principal reader");
  CHECK(denied.exit_code == 1);
  CHECK(denied.out.find("\"verdict\":\"deny\"") != std::string::npos);
  CHECK(denied.out.find("\"rule_id\":\"r1\"") != std::string::npos);
}

TEST_CASE("cli: algebra eval") {
  CliStore st("algebra");
  Infon open = make_infon("loves", {Parameter("someone1", ParamConstraint::person),
                                    Scalar::text("apples")});
  Infon id = identifier_infon(person_identity("john"));
  std::string in = st.file("pair.jsonl", to_record_line(open) + "\n" + to_record_line(id) + "\n");
  RunResult res = run(cli() + " algebra combine --store " + st.dir.string() + " --in " + in);
  CHECK(res.exit_code == 0);
  Infon expected = make_infon("loves", {person("john"), Scalar::text("apples")});
  CHECK(res.out == to_record_line(expected) + "\n");

  RunResult sub = run(cli() + " algebra sub-infon --store " + st.dir.string() + " --in " +
                      st.file("sub.jsonl", to_record_line(id) + "\n" + to_record_line(expected) + "\n"));
  CHECK(sub.out == "{\"sub_infon\":true}\n");
}

TEST_CASE("cli: export round-trips into a fresh store byte-for-byte") {
  CliStore st("export");
  std::string ids = st.file("ids.jsonl",
                            identity_line("john") + identity_line("mary") + identity_line("bob"));
  REQUIRE(run(cli() + " register --store " + st.dir.string() + " --in " + ids).exit_code == 0);

  Infon kase = make_infon("case", {Scalar::number(17), person("john"), person("mary"),
                                   person("bob")});
  Infon sick = make_infon("is-sick", {person("john")});
  ObjectRef clinic = ObjectRef::nonperson("clinicY", "clinic");
  Infon visited = make_infon("visited", {person("mary"), clinic});
  Infon clinic_fact = make_infon("is-abortion-clinic", {clinic});
  std::string recs = st.file("recs.jsonl", to_record_line(kase) + "\n" + to_record_line(sick) +
                                               "\n" + to_record_line(visited) + "\n" +
                                               to_record_line(clinic_fact) + "\n");
  REQUIRE(run(cli() + " ingest --store " + st.dir.string() + " --in " + recs).exit_code == 0);
  REQUIRE(run(cli() + " attach-nii --store " + st.dir.string() + " --sphere '#p2' --infon-key " +
              clinic_fact.key() + " --justification 'clinic nature'")
              .exit_code == 0);
  REQUIRE(run(cli() + " claim-pni --store " + st.dir.string() + " --sphere '#p1' --infon-key " +
              clinic_fact.key())
              .exit_code == 0);

  std::string dump = st.scratch.string() + "/dump.jsonl";
  REQUIRE(run(cli() + " export --store " + st.dir.string() + " > " + dump).exit_code == 0);

  fs::path fresh = st.scratch / "fresh-store";
  REQUIRE(run(cli() + " init --store " + fresh.string()).exit_code == 0);
  REQUIRE(run(cli() + " ingest --store " + fresh.string() + " --in " + dump +
              " > /dev/null").exit_code == 0);

  // equal sphere scans, byte for byte: a scan is the key-ordered record
  // enumeration, independent of append order in the log files
  auto scan = [](const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  };
  for (const std::string rel :
       {"spheres/p1.sph", "spheres/p2.sph", "spheres/p3.sph", "pool.nii"}) {
    INFO(rel);
    std::string original = scan(st.dir / rel);
    CHECK(original == scan(fresh / rel));
    CHECK_FALSE(original.empty());
  }

  SECTION("anonymized export of a sphere prints NII records") {
    RunResult res = run(cli() + " export --store " + st.dir.string() +
                        " --sphere '#p1' --anonymized");
    CHECK(res.exit_code == 0);
    std::istringstream lines(res.out);
    std::string line;
    int records = 0;
    while (std::getline(lines, line)) {
      CHECK(classify(parse_record_line(line)).family == Family::NII);
      ++records;
    }
    CHECK(records > 0);
  }
}
