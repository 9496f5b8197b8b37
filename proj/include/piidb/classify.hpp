#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "piidb/algebra.hpp"
#include "piidb/infon.hpp"
#include "piidb/schema.hpp"
#include "piidb/serialize.hpp"

namespace piidb {

enum class Family { NII, PII };
enum class Arity { atomic, compound };
enum class SelfKind { not_self, self_singleton, self_multitude };

inline const char* family_name(Family f) noexcept { return f == Family::PII ? "PII" : "NII"; }
inline const char* arity_name(Arity a) noexcept {
  return a == Arity::atomic ? "atomic" : "compound";
}
inline const char* self_kind_name(SelfKind k) noexcept {
  switch (k) {
    case SelfKind::not_self: return "not-self";
    case SelfKind::self_singleton: return "self-singleton";
    case SelfKind::self_multitude: return "self-multitude";
  }
  return "not-self";
}

/// The verdict lattice: NII vs PII by referent count, atomic vs compound for
/// PII, and the self refinement for atoms. The pni flag is extrinsic — set
/// only by an owner claim registered in the store, never inferred here.
struct Classification {
  Family family = Family::NII;
  std::optional<Arity> arity;
  std::optional<SelfKind> self_kind;
  std::size_t n = 0;
  bool pni = false;

  bool is_pii() const noexcept { return family == Family::PII; }
  bool is_atomic() const noexcept { return arity && *arity == Arity::atomic; }
  bool is_compound() const noexcept { return arity && *arity == Arity::compound; }
};

/// Verdict record {family, arity, self_kind, n} for CLI output and goldens.
inline Json to_json(const Classification& c) {
  Json j = Json::object();
  j["family"] = family_name(c.family);
  j["arity"] = c.arity ? Json(arity_name(*c.arity)) : Json(nullptr);
  j["self_kind"] = c.self_kind ? Json(self_kind_name(*c.self_kind)) : Json(nullptr);
  j["n"] = c.n;
  if (c.pni) j["pni"] = true;
  return j;
}

// ---------------------------------------------------------------------------
// ABOUT — subject extraction

/// The set of entities the infon is talking about: every person referent,
/// the object in subject position (first argument slot of a predication),
/// objects named by an explicit `topic` property, and — for relations with a
/// possessive schema rule — the owned object (the attribute it carries is
/// about that object, which is exactly why such infons need factoring).
inline std::vector<ObjectRef> about(const Infon& s, const RelationSchema& schema = {}) {
  std::set<std::string> ids;
  std::vector<ObjectRef> out;
  auto add = [&](const ObjectRef& o) {
    if (ids.insert(o.id()).second) out.push_back(o);
  };
  detail::for_each_object(s, [&](const ObjectRef& o) {
    if (o.is_person()) add(o);
  });
  if (s.is_predication() && !s.args().empty())
    if (const auto* o = std::get_if<ObjectRef>(&s.args().front())) add(*o);
  std::set<std::string> topics;
  for (const auto& t : s.properties())
    if (t.param == "topic" && t.value.is_text()) topics.insert(t.value.raw());
  if (const PossessiveRule* rule = s.is_predication() ? schema.find(s.relation()) : nullptr)
    if (rule->owned_slot < s.args().size())
      if (const auto* o = std::get_if<ObjectRef>(&s.args()[rule->owned_slot])) add(*o);
  if (!topics.empty())
    detail::for_each_object(s, [&](const ObjectRef& o) {
      if (topics.count(o.id())) add(o);
    });
  std::sort(out.begin(), out.end(),
            [](const ObjectRef& a, const ObjectRef& b) { return a.id() < b.id(); });
  return out;
}

namespace detail {

/// ABOUT(σ) = PROP(σ): the single proprietor is the only subject.
inline bool is_sapinfon(const Infon& s, const RelationSchema& schema) {
  std::set<std::string> referent_keys = referents(s);
  if (referent_keys.size() != 1) return false;
  std::vector<ObjectRef> subjects = about(s, schema);
  return subjects.size() == 1 && subjects[0].is_person() &&
         subjects[0].identity().person_key() == *referent_keys.begin();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// classify

inline Classification classify(const Infon& s, const RelationSchema& schema = {}) {
  Classification out;
  out.n = referent_count(s);
  out.family = out.n > 0 ? Family::PII : Family::NII;
  if (out.n == 1) {
    out.arity = Arity::atomic;
    if (!detail::is_sapinfon(s, schema))
      out.self_kind = SelfKind::not_self;
    else
      out.self_kind =
          objects(s).size() == 1 ? SelfKind::self_singleton : SelfKind::self_multitude;
  } else if (out.n > 1) {
    out.arity = Arity::compound;
  }
  return out;
}

// ---------------------------------------------------------------------------
// anonymize / identify

struct AnonymizeResult {
  struct Removed {
    Identifier identity;
    std::string param_name;
  };

  Infon ninfon;
  /// Stripped identifiers with their fresh parameter names, in first-seen
  /// traversal order; folding identify over this list inverts the call.
  std::vector<Removed> removed;
};

namespace detail {

inline Infon strip_persons(const Infon& s, const std::function<bool(const std::string&)>& keep,
                           FreshParams& fresh,
                           std::vector<AnonymizeResult::Removed>& removed,
                           std::set<std::string>& seen) {
  std::vector<ArgSlot> args = s.args();
  for (auto& slot : args) {
    const auto* o = std::get_if<ObjectRef>(&slot);
    if (o == nullptr || !o->is_person() || keep(o->identity().person_key())) continue;
    const std::string& name = fresh.for_person(o->id());
    if (seen.insert(o->identity().person_key()).second)
      removed.push_back({o->identity(), name});
    slot = Parameter(name, ParamConstraint::person);
  }
  std::vector<Infon> members;
  members.reserve(s.members().size());
  for (const auto& m : s.members()) members.push_back(strip_persons(m, keep, fresh, removed, seen));
  if (s.is_grouping()) return Infon::grouping(std::move(members));
  return Infon::predication(s.relation(), std::move(args), s.polarity())
      .with_properties(s.properties())
      .with_members(std::move(members));
}

}  // namespace detail

/// Remove all identifiers from a pinfon: every person slot is replaced by a
/// fresh person-constrained parameter (the same person always maps to the
/// same parameter), and the result classifies NII.
inline AnonymizeResult anonymize(const Infon& s) {
  if (referent_count(s) == 0) fail(Errc::not_pii, "anonymize expects personal identifiable input");
  AnonymizeResult out{Infon::empty(), {}};
  detail::FreshParams fresh(detail::parameter_names(s));
  std::set<std::string> seen;
  out.ninfon = detail::strip_persons(
      s, [](const std::string&) { return false; }, fresh, out.removed, seen);
  return out;
}

/// Bind an unanchored parameter to a person, through members transitively.
/// Non-identifiable information plus a unique personal identifier is
/// personal identifiable information.
inline Infon identify(const Infon& s, const Identifier& id, const Parameter& at) {
  auto [out, hits] = detail::substitute_parameter(s, at.name, ObjectRef::person(id));
  if (hits == 0)
    fail(Errc::unknown_parameter, "parameter '" + at.name + "' does not occur unanchored");
  return out;
}

inline Infon identify(const Infon& s, const Identifier& id, const std::string& at) {
  return identify(s, id, Parameter(at, ParamConstraint::person));
}

/// Invert an anonymize call by replaying its removal record.
inline Infon identify_all(const Infon& s, const std::vector<AnonymizeResult::Removed>& removed) {
  Infon out = s;
  for (const auto& r : removed) out = identify(out, r.identity, r.param_name);
  return out;
}

// ---------------------------------------------------------------------------
// reduce — compound PII to atomic PII

/// E in the sphere picture: the connection that keeps a reduced compound's
/// atoms linked as members of the same set.
struct CompoundLink {
  std::string link_id;
  std::set<std::string> atom_ids;
  std::string origin;
};

struct ReductionResult {
  std::vector<Infon> atoms;  // ordered by proprietor first-encounter
  CompoundLink link;
};

namespace detail {

inline std::vector<std::string> proprietors_in_order(const Infon& s) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  std::function<void(const Infon&)> walk = [&](const Infon& x) {
    for (const auto& slot : x.args())
      if (const auto* o = std::get_if<ObjectRef>(&slot))
        if (o->is_person() && seen.insert(o->identity().person_key()).second)
          order.push_back(o->identity().person_key());
    for (const auto& m : x.members()) walk(m);
  };
  walk(s);
  return order;
}

}  // namespace detail

/// Privacy-reduce a compound pinfon to one atom per proprietor: each atom is
/// the input with every other proprietor's slots anonymized, so the atoms
/// partition the proprietor set and the link preserves the totality.
inline ReductionResult reduce(const Infon& s) {
  Classification c = classify(s);
  if (!c.is_compound())
    fail(Errc::not_compound, "reduce expects compound personal identifiable input");

  ReductionResult out;
  for (const std::string& proprietor : detail::proprietors_in_order(s)) {
    detail::FreshParams fresh(detail::parameter_names(s));
    std::vector<AnonymizeResult::Removed> removed;
    std::set<std::string> seen;
    Infon atom = detail::strip_persons(
        s, [&](const std::string& person) { return person == proprietor; }, fresh, removed, seen);
    out.link.atom_ids.insert(atom.key());
    out.atoms.push_back(std::move(atom));
  }
  out.link.origin = s.key();
  out.link.link_id = "lnk-" + s.key();
  return out;
}

// ---------------------------------------------------------------------------
// to_self — factor an atom into self parts plus non-proprietor content

struct SelfProjection {
  std::vector<Infon> self_parts;
  std::vector<Infon> nii_parts;
};

/// Project an atomic pinfon onto self information. Relations with a
/// possessive schema rule split into the bridge sapinfon (proprietor, owned
/// object) plus a ninfon carrying everything else; other atoms are already
/// self information and pass through whole.
inline SelfProjection to_self(const Infon& s, const RelationSchema& schema = {}) {
  Classification c = classify(s, schema);
  if (!c.is_atomic()) fail(Errc::not_atomic, "to_self expects atomic personal identifiable input");

  const PossessiveRule* rule = s.is_predication() ? schema.find(s.relation()) : nullptr;
  if (rule != nullptr && rule->owner_slot < s.args().size() &&
      rule->owned_slot < s.args().size() && rule->owner_slot != rule->owned_slot) {
    const auto* owner = std::get_if<ObjectRef>(&s.args()[rule->owner_slot]);
    const auto* owned = std::get_if<ObjectRef>(&s.args()[rule->owned_slot]);
    if (owner != nullptr && owner->is_person() && owned != nullptr && !owned->is_person()) {
      Infon self = Infon::predication(rule->bridge_relation, {*owner, *owned}, s.polarity());
      std::vector<ArgSlot> rest;
      for (std::size_t i = 0; i < s.args().size(); ++i)
        if (i != rule->owner_slot) rest.push_back(s.args()[i]);
      Infon nii = Infon::predication(s.relation(), std::move(rest), s.polarity())
                      .with_properties(s.properties())
                      .with_members(s.members());
      if (referent_count(nii) == 0) return {{self}, {nii}};
    }
  }
  return {{s}, {}};
}

// ---------------------------------------------------------------------------
// sapinfon kind

enum class SapinfonKind { singleton, multitude };

inline const char* sapinfon_kind_name(SapinfonKind k) noexcept {
  return k == SapinfonKind::singleton ? "singleton" : "multitude";
}

/// Singleton: the proprietor is the infon's only object (an aspect).
/// Multitude: the infon embeds other objects besides its proprietor.
inline SapinfonKind sapinfon_kind(const Infon& s, const RelationSchema& schema = {}) {
  if (!detail::is_sapinfon(s, schema))
    fail(Errc::not_self, "sapinfon_kind expects self atomic personal identifiable input");
  return objects(s).size() == 1 ? SapinfonKind::singleton : SapinfonKind::multitude;
}

}  // namespace piidb
