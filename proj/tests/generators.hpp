// Shared test fixtures: deterministic random infon generation and oracles
// that are independent of the library's own inspection paths.
#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "piidb/piidb.hpp"

namespace testgen {

using namespace piidb;

struct Rng {
  std::mt19937_64 eng;

  explicit Rng(std::uint64_t seed) : eng(seed) {}

  int below(int n) { return static_cast<int>(eng() % static_cast<std::uint64_t>(n)); }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng) < p; }
};

inline const std::vector<std::string>& person_keys() {
  static const std::vector<std::string> keys{"john", "mary", "alice", "bob", "carol", "dave"};
  return keys;
}

inline Identifier person_identity(const std::string& key) {
  std::string name = key;
  name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return Identifier({Descriptor("name", Scalar::text(name), Nature::natural)}, key);
}

inline ObjectRef person(const std::string& key) { return ObjectRef::person(person_identity(key)); }

inline ObjectRef thing(int i) {
  return ObjectRef::nonperson("thing" + std::to_string(i), "thing");
}

inline const std::vector<std::string>& relations() {
  static const std::vector<std::string> rels{"likes", "owns", "visited", "met"};
  return rels;
}

// A random infon with at most 6 objects and at most 4 relations: parametric
// slots, literals, properties, identifier infons, and nested groupings all
// appear with enough weight that every classification family shows up.
inline Infon random_infon(Rng& rng, int depth = 0) {
  int shape = rng.below(100);
  if (shape < 5 && depth > 0) return Infon::empty();
  if (shape < 20) return identifier_infon(person_identity(person_keys()[rng.below(6)]));
  if (shape < 40 && depth < 2) {
    std::vector<Infon> members;
    int n = 1 + rng.below(3);
    for (int i = 0; i < n; ++i) members.push_back(random_infon(rng, depth + 1));
    return Infon::grouping(std::move(members));
  }
  std::vector<ArgSlot> args;
  int n = 1 + rng.below(3);
  for (int i = 0; i < n; ++i) {
    int pick = rng.below(100);
    if (pick < 40)
      args.emplace_back(person(person_keys()[rng.below(6)]));
    else if (pick < 60)
      args.emplace_back(thing(rng.below(4)));
    else if (pick < 80)
      args.emplace_back(Parameter("p" + std::to_string(rng.below(3)),
                                  rng.chance(0.5) ? ParamConstraint::person
                                                  : ParamConstraint::any));
    else
      args.emplace_back(rng.chance(0.5) ? Scalar::text("v" + std::to_string(rng.below(3)))
                                        : Scalar::number(rng.below(10)));
  }
  Infon out = Infon::predication(relations()[rng.below(4)], std::move(args),
                                 rng.chance(0.9) ? Polarity::holds : Polarity::does_not_hold);
  if (rng.chance(0.3))
    out = out.with_properties(
        {PropertyTriple("prop" + std::to_string(rng.below(2)), Scalar::text("x"),
                        rng.chance(0.8) ? Validity::valid : Validity::undetermined)});
  if (depth < 2 && rng.chance(0.15))
    out = out.with_members({random_infon(rng, depth + 1)});
  return out;
}

inline Infon random_pii(Rng& rng) {
  for (;;) {
    Infon s = random_infon(rng);
    if (referent_count(s) > 0) return s;
  }
}

inline Infon random_compound(Rng& rng, std::size_t min_people, std::size_t max_people) {
  for (;;) {
    Infon s = random_infon(rng);
    std::size_t n = referent_count(s);
    if (n >= min_people && n <= max_people) return s;
  }
}

// ---------------------------------------------------------------------------
// Independent referent oracle: walks the serialized record, not the library's
// object traversal, and counts distinct person keys.

inline void collect_person_keys(const Json& j, std::set<std::string>& out) {
  if (j.is_object()) {
    if (j.contains("person") && j["person"].is_object() && j["person"].contains("person_key"))
      out.insert(j["person"]["person_key"].get<std::string>());
    for (const auto& [key, value] : j.items()) {
      (void)key;
      collect_person_keys(value, out);
    }
  } else if (j.is_array()) {
    for (const auto& value : j) collect_person_keys(value, out);
  }
}

inline std::set<std::string> oracle_referents(const Infon& s) {
  std::set<std::string> out;
  collect_person_keys(to_json(s), out);
  return out;
}

inline Family oracle_family(const Infon& s) {
  return oracle_referents(s).empty() ? Family::NII : Family::PII;
}

}  // namespace testgen
