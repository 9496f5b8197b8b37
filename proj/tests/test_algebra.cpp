#include <catch_amalgamated.hpp>

#include "generators.hpp"
#include "piidb/piidb.hpp"

using namespace piidb;
using testgen::person;
using testgen::person_identity;
using testgen::thing;

namespace {

Infon someone_loves_apples() {
  return make_infon("loves",
                    {Parameter("someone1", ParamConstraint::person), Scalar::text("apples")});
}

Infon john_loves_apples() {
  return make_infon("loves", {person("john"), Scalar::text("apples")});
}

}  // namespace

TEST_CASE("combine: identifier anchors an open person parameter") {
  Infon combined = combine(someone_loves_apples(), identifier_infon(person_identity("john")));
  CHECK(combined == john_loves_apples());
  // symmetric
  CHECK(combine(identifier_infon(person_identity("john")), someone_loves_apples()) ==
        john_loves_apples());
}

TEST_CASE("combine: the empty infon is the identity") {
  testgen::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Infon s = testgen::random_infon(rng);
    CHECK(combine(s, Infon::empty()) == s);
    CHECK(combine(Infon::empty(), s) == s);
  }
}

TEST_CASE("combine merges equal components") {
  Infon a = make_infon("near", {person("john"), thing(1)});
  Infon b = make_infon("near", {thing(1), thing(2)});
  Infon merged = combine(a, b);
  CHECK(components(merged) == set_union(components(a), components(b)));
  CHECK(merged.args().size() == 3);  // thing(1) merged into one slot

  // unrelated predications group
  Infon c = make_infon("runs", {person("mary")});
  Infon grouped = combine(a, c);
  CHECK(grouped.is_grouping());
  CHECK(prop(grouped) == std::set<std::string>{"john", "mary"});
}

TEST_CASE("combine: component count never exceeds the operand total") {
  // Where ⊕ performs component union — identity, same-relation merge,
  // identifier anchoring — the result's component set is exactly the
  // deduplicated union, so the count bound follows. Wrapping paths instead
  // reify whole operands as members, where component counts measure members.
  testgen::Rng rng(12);
  int unions_checked = 0;
  for (int i = 0; i < 400; ++i) {
    Infon a = testgen::random_infon(rng);
    Infon b = testgen::random_infon(rng);
    ComponentSet expected = set_union(components(a), components(b));
    bool union_path = false;
    if (a.is_empty() || b.is_empty()) union_path = true;
    if (a.is_predication() && b.is_predication() && a.relation() == b.relation() &&
        a.polarity() == b.polarity() && a.members().empty() && b.members().empty())
      union_path = true;
    if (!union_path) continue;
    ++unions_checked;
    Infon combined = combine(a, b);
    CHECK(components(combined) == expected);
    CHECK(components(combined).size() <= components(a).size() + components(b).size());
  }
  CHECK(unions_checked > 30);

  // the anchoring merge adds exactly the identifier's component
  Infon open = make_infon("met", {Parameter("someone1", ParamConstraint::person), thing(1)});
  Infon id = identifier_infon(person_identity("john"));
  CHECK(components(combine(open, id)) == set_union(components(open), components(id)));
}

TEST_CASE("combine is commutative") {
  testgen::Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    Infon a = testgen::random_infon(rng);
    Infon b = testgen::random_infon(rng);
    CHECK(combine(a, b) == combine(b, a));
  }
}

TEST_CASE("combine is associative on the anchoring-free fragment") {
  // Identifier anchoring consumes the identifier into a binding, which is
  // order-sensitive by nature; the law is checked where no anchoring fires.
  auto anchoring_free = [](const Infon& x, const Infon& y) {
    auto open_person_param = [](const Infon& s) {
      bool found = false;
      detail::for_each_parameter(s, [&](const Parameter& p) {
        if (p.constraint == ParamConstraint::person) found = true;
      });
      return found;
    };
    return !((is_identifier_infon(x) && open_person_param(y)) ||
             (is_identifier_infon(y) && open_person_param(x)));
  };
  testgen::Rng rng(14);
  int checked = 0;
  for (int i = 0; i < 600; ++i) {
    Infon a = testgen::random_infon(rng);
    Infon b = testgen::random_infon(rng);
    Infon c = testgen::random_infon(rng);
    Infon ab = combine(a, b);
    Infon bc = combine(b, c);
    if (!(anchoring_free(a, b) && anchoring_free(b, c) && anchoring_free(ab, c) &&
          anchoring_free(a, bc)))
      continue;
    ++checked;
    CHECK(combine(ab, c) == combine(a, bc));
  }
  CHECK(checked > 100);
}

TEST_CASE("project keeps exactly the chosen components") {
  Infon jlm = make_infon("loves", {person("john"), person("mary")});

  SECTION("full projection is the identity") {
    CHECK(project(jlm, components(jlm)) == jlm);
  }

  SECTION("projection onto the person slots keeps the proprietor set reachable") {
    ComponentSet keep;
    for (const auto& c : components(jlm))
      if (c.is_object() && c.object().is_person()) keep.push_back(c);
    Infon projected = project(jlm, keep);
    CHECK(components(projected) == keep);
    CHECK(referents(projected) == std::set<std::string>{"john", "mary"});
  }

  SECTION("foreign components are rejected") {
    try {
      project(jlm, {Component(thing(9))});
      FAIL("expected unknown-component");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unknown_component);
    }
  }

  SECTION("nested projection composes") {
    testgen::Rng rng(15);
    for (int i = 0; i < 150; ++i) {
      Infon s = testgen::random_infon(rng);
      ComponentSet all = components(s);
      ComponentSet outer, inner;
      for (std::size_t k = 0; k < all.size(); ++k) {
        if (k % 2 == 0) outer.push_back(all[k]);
        if (k % 4 == 0) inner.push_back(all[k]);
      }
      CHECK(project(project(s, outer), inner) == project(s, inner));
    }
  }
}

TEST_CASE("quotient removes the second infon's components") {
  SECTION("removing an identifier re-opens the slot as a parameter") {
    Infon q = quotient(john_loves_apples(), identifier_infon(person_identity("john")));
    CHECK(q == someone_loves_apples());
    CHECK(referents(q).empty());
  }

  SECTION("removing nothing is the identity") {
    testgen::Rng rng(16);
    for (int i = 0; i < 100; ++i) {
      Infon s = testgen::random_infon(rng);
      CHECK(quotient(s, Infon::empty()) == s);
    }
  }

  SECTION("self-quotient leaves no components") {
    testgen::Rng rng(17);
    for (int i = 0; i < 100; ++i) {
      Infon s = testgen::random_infon(rng);
      CHECK(components(quotient(s, s)).empty());
    }
  }

  SECTION("component-set difference oracle") {
    testgen::Rng rng(18);
    for (int i = 0; i < 300; ++i) {
      Infon a = testgen::random_infon(rng);
      Infon b = testgen::random_infon(rng);
      CHECK(components(quotient(a, b)) == set_difference(components(a), components(b)));
    }
  }

  SECTION("quotient undoes combine up to a's components") {
    // Holds where ⊕ is component union (merge paths); wrapping paths reify
    // the operands as members, which are not components of either side.
    testgen::Rng rng(27);
    int merged_pairs = 0;
    for (int i = 0; i < 500; ++i) {
      Infon a = testgen::random_infon(rng);
      Infon b = testgen::random_infon(rng);
      bool union_path = a.is_empty() || b.is_empty() ||
                        (a.is_predication() && b.is_predication() &&
                         a.relation() == b.relation() && a.polarity() == b.polarity());
      if (!union_path) continue;
      ++merged_pairs;
      ComponentSet residue = components(quotient(combine(a, b), b));
      CHECK(is_subset(residue, components(a)));
      if (set_intersection(components(a), components(b)).empty() && !a.is_empty() &&
          !b.is_empty())
        CHECK(residue == components(a));
    }
    CHECK(merged_pairs > 40);
  }
}

TEST_CASE("rename rewrites relations and parameters") {
  Infon jlm = make_infon("loves", {person("john"), person("mary")});
  Infon renamed = rename(jlm, {{"loves", "adores"}});
  CHECK(renamed.relation() == "adores");
  CHECK(renamed == make_infon("adores", {person("john"), person("mary")}));

  SECTION("renaming never changes referents, polarity, or component count") {
    testgen::Rng rng(19);
    for (int i = 0; i < 200; ++i) {
      Infon s = testgen::random_infon(rng);
      std::map<std::string, std::string> mapping{
          {"likes", "fancies"}, {"owns", "holds"}, {"p0", "q0"}, {"p1", "q1"}};
      Infon r = rename(s, mapping);
      CHECK(referents(r) == referents(s));
      CHECK(r.polarity() == s.polarity());
      CHECK(components(r).size() == components(s).size());
      std::multiset<std::string> before, after;
      for (const auto& o : objects(s)) before.insert(o.id());
      for (const auto& o : objects(r)) after.insert(o.id());
      CHECK(before == after);
    }
  }

  SECTION("empty map is the identity") { CHECK(rename(jlm, {}) == jlm); }

  SECTION("non-injective mapping collides") {
    Infon two = make_infon("a", {Parameter("x"), Parameter("y")});
    try {
      rename(two, {{"x", "z"}, {"y", "z"}});
      FAIL("expected rename-collision");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::rename_collision);
    }
    // collisions outside the touched symbols are fine
    CHECK_NOTHROW(rename(two, {{"x", "z"}, {"unused", "z"}}));
  }
}

TEST_CASE("union keeps both operands distinct") {
  Infon s = john_loves_apples();
  Infon u = union_of(s, s);
  CHECK(u.is_grouping());
  CHECK(u.members().size() == 2);

  Infon v = union_of(s, Infon::empty());
  REQUIRE(v.members().size() == 2);
  CHECK((v.members()[0].is_empty() || v.members()[1].is_empty()));

  testgen::Rng rng(20);
  for (int i = 0; i < 100; ++i) {
    Infon a = testgen::random_infon(rng);
    Infon b = testgen::random_infon(rng);
    CHECK(union_of(a, b).members().size() == 2);
  }
}

TEST_CASE("intersect") {
  SECTION("shared identifier only") {
    Infon a = john_loves_apples();
    Infon b = make_infon("hates", {person("john"), Scalar::text("pears")});
    Infon shared = intersect(a, b);
    CHECK(shared == identifier_infon(person_identity("john")));
  }

  SECTION("idempotence and absorption") {
    Infon a = john_loves_apples();
    CHECK(components(intersect(a, a)) == components(a));
    CHECK(intersect(a, Infon::empty()).is_empty());
  }

  SECTION("component-set intersection oracle") {
    testgen::Rng rng(21);
    for (int i = 0; i < 300; ++i) {
      Infon a = testgen::random_infon(rng);
      Infon b = testgen::random_infon(rng);
      ComponentSet got = components(intersect(a, b));
      CHECK(got == set_intersection(components(a), components(b)));
      CHECK(is_subset(got, components(a)));
      CHECK(is_subset(got, components(b)));
    }
  }
}

TEST_CASE("negation") {
  InfonWorld world;
  Infon a = john_loves_apples();
  Infon b = make_infon("owns", {person("mary"), thing(1)});
  world.add_universe(a);
  world.add_universe(b);

  SECTION("empty universe is an error") {
    InfonWorld empty_world;
    try {
      negate_full(a, empty_world);
      FAIL("expected empty-universe");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_universe);
    }
  }

  SECTION("negating the empty infon yields every universe component") {
    CHECK(components(negate_full(Infon::empty(), world)) == world.universe());
  }

  SECTION("double complement restores the component set") {
    CHECK(components(negate_full(negate_full(a, world), world)) == components(a));
  }

  SECTION("full negation shares no component with its argument") {
    testgen::Rng rng(22);
    for (int i = 0; i < 100; ++i) {
      InfonWorld w;
      Infon x = testgen::random_infon(rng);
      Infon y = testgen::random_infon(rng);
      w.add_universe(x);
      w.add_universe(y);
      if (w.universe().empty()) continue;
      CHECK(set_intersection(components(negate_full(x, w)), components(x)).empty());
    }
  }

  SECTION("minimal negation") {
    CHECK(negate_min(a, components(a)).is_empty());
    ComponentSet ctx = components(b);
    CHECK(components(negate_min(Infon::empty(), ctx)) == ctx);
    CHECK(negate_min(a, world.universe()) == negate_full(a, world));
    testgen::Rng rng(23);
    for (int i = 0; i < 100; ++i) {
      Infon x = testgen::random_infon(rng);
      Infon y = testgen::random_infon(rng);
      CHECK(set_intersection(components(negate_min(x, components(y))), components(x)).empty());
    }
  }
}

TEST_CASE("sub-infon is proper containment") {
  Infon jla = john_loves_apples();
  CHECK(sub_infon(identifier_infon(person_identity("john")), jla));
  CHECK_FALSE(sub_infon(jla, jla));

  SECTION("transitive and irreflexive over component-addition chains") {
    testgen::Rng rng(24);
    for (int i = 0; i < 100; ++i) {
      Infon base = make_infon("chain", {thing(rng.below(4))});
      std::vector<ArgSlot> level2 = base.args();
      level2.emplace_back(person(testgen::person_keys()[rng.below(6)]));
      Infon mid = Infon::predication("chain", level2);
      std::vector<ArgSlot> level3 = level2;
      level3.emplace_back(Scalar::number(rng.below(100) + 10));
      Infon top = Infon::predication("chain", level3);
      CHECK(sub_infon(base, mid));
      CHECK(sub_infon(mid, top));
      CHECK(sub_infon(base, top));
      CHECK_FALSE(sub_infon(base, base));
      CHECK_FALSE(sub_infon(top, base));
    }
  }
}

TEST_CASE("compatibility and association predicates") {
  InfonWorld world;
  Infon a = john_loves_apples();
  Infon b = make_infon("owns", {person("mary"), thing(1)});
  Infon c = make_infon("runs", {person("alice")});

  CHECK(compatible(world, a, b) == TriState::unstated);
  world.declare_compatible(a, b, true);
  CHECK(compatible(world, a, b) == TriState::yes);
  CHECK(compatible(world, b, a) == TriState::yes);  // symmetric

  world.declare_compatible(a, c, false);
  CHECK(compatible(world, a, c) == TriState::no);
  // one tri-state map: a pair stated compatible is never also stated incompatible
  CHECK(compatible(world, a, b) == TriState::yes);

  world.declare_associated(b, c, false);
  CHECK(associated(world, b, c) == TriState::no);
  CHECK(associated(world, a, b) == TriState::unstated);

  world.assume_complete(true, true);
  CHECK(compatible(world, b, c) == TriState::yes);  // unstated defaults to yes
  CHECK(associated(world, a, b) == TriState::yes);
  CHECK(compatible(world, a, c) == TriState::no);   // stated pairs keep their value
}

TEST_CASE("instantiate folds anchor over the map") {
  Parameter someone("someone", ParamConstraint::person);
  Infon sick = make_infon("is-sick", {someone});
  CHECK(instantiate(sick, {{someone, person("john")}}) ==
        make_infon("is-sick", {person("john")}));
  CHECK(instantiate(sick, {}) == sick);

  SECTION("anchoring order never matters") {
    Parameter p1("p1", ParamConstraint::person), p2("p2", ParamConstraint::person);
    Infon two = make_infon("met", {p1, p2});
    Infon ab = instantiate(two, {{p1, person("john")}, {p2, person("mary")}});
    Infon ba = instantiate(two, {{p2, person("mary")}, {p1, person("john")}});
    CHECK(ab == ba);
    CHECK(ab == make_infon("met", {person("john"), person("mary")}));
  }

  SECTION("unknown parameter") {
    CHECK_THROWS_AS(instantiate(sick, {{Parameter("ghost"), person("john")}}), Error);
  }
}

TEST_CASE("extend groups the infon with its context") {
  Infon visited = make_infon("visited", {person("alice"), ObjectRef::nonperson("clinicY", "clinic")});
  Infon clinic_fact = make_infon("is-abortion-clinic", {ObjectRef::nonperson("clinicY", "clinic")});
  Infon extended = extend(visited, {clinic_fact});
  CHECK(extended.is_grouping());
  CHECK(prop(extended) == std::set<std::string>{"alice"});
  CHECK(extended.members().size() == 2);

  CHECK(extend(visited, {}) == visited);

  testgen::Rng rng(25);
  for (int i = 0; i < 100; ++i) {
    Infon a = testgen::random_infon(rng);
    Infon ctx = testgen::random_infon(rng);
    std::set<std::string> expected = prop(a);
    std::set<std::string> more = prop(ctx);
    expected.insert(more.begin(), more.end());
    CHECK(prop(extend(a, {ctx})) == expected);
  }
}

TEST_CASE("join builds a compound grouping") {
  Infon left = make_infon("are-in-love", {person("john"), Parameter("someone1", ParamConstraint::person)});
  Infon right = make_infon("are-in-love", {Parameter("someone1", ParamConstraint::person), person("mary")});
  Infon joined = join({left, right});
  CHECK(prop(joined) == std::set<std::string>{"john", "mary"});

  Infon single = join({left});
  CHECK(single.is_grouping());
  CHECK(single.members().size() == 1);
  CHECK(prop(single) == std::set<std::string>{"john"});

  try {
    join({});
    FAIL("expected empty-join");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_join);
  }

  testgen::Rng rng(26);
  for (int i = 0; i < 100; ++i) {
    std::vector<Infon> parts;
    std::set<std::string> expected;
    int n = 1 + rng.below(4);
    for (int k = 0; k < n; ++k) {
      parts.push_back(testgen::random_infon(rng));
      std::set<std::string> p = prop(parts.back());
      expected.insert(p.begin(), p.end());
    }
    CHECK(prop(join(parts)) == expected);
  }
}
