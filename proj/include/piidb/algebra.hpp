#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "piidb/component.hpp"
#include "piidb/infon.hpp"
#include "piidb/world.hpp"

namespace piidb {

namespace detail {

inline std::set<std::string> parameter_names(const Infon& s) {
  std::set<std::string> names;
  for_each_parameter(s, [&](const Parameter& p) { names.insert(p.name); });
  return names;
}

/// Fresh person-constrained parameter names, numbered in discovery order and
/// skipping names already in use (deterministic golden files depend on this).
class FreshParams {
 public:
  explicit FreshParams(std::set<std::string> used) : used_(std::move(used)) {}

  const std::string& for_person(const std::string& person_id) {
    auto it = by_person_.find(person_id);
    if (it != by_person_.end()) return it->second;
    for (;;) {
      std::string candidate = "someone" + std::to_string(++counter_);
      if (used_.insert(candidate).second)
        return by_person_.emplace(person_id, std::move(candidate)).first->second;
    }
  }

 private:
  std::set<std::string> used_;
  std::map<std::string, std::string> by_person_;
  int counter_ = 0;
};

/// Carrier predication holding an arbitrary component bag (used by the
/// component-set-valued operations; "components" is a reserved relation).
inline Infon component_carrier(const ComponentSet& set) {
  if (set.empty()) return Infon::empty();
  std::vector<ArgSlot> args;
  std::vector<PropertyTriple> props;
  std::vector<Infon> members;
  for (const auto& c : set) {
    if (c.is_object())
      args.emplace_back(c.object());
    else if (c.is_literal())
      args.emplace_back(c.literal());
    else if (c.is_property())
      props.push_back(c.property());
    else
      members.push_back(c.member());
  }
  return Infon::predication("components", std::move(args))
      .with_properties(std::move(props))
      .with_members(std::move(members));
}

inline std::vector<Infon> dedup_members(std::vector<Infon> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  return members;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ⊕ — combination

namespace detail {

/// Component-wise merge of two same-relation, same-polarity predications:
/// distinct slots in canonical order, property union, member-set union.
/// Being a pure function of the slot/property/member sets makes repeated
/// merging order-independent.
inline Infon merge_predications(const Infon& a, const Infon& b) {
  std::vector<std::pair<std::string, ArgSlot>> keyed;
  for (const Infon* side : {&a, &b})
    for (const auto& slot : side->args()) keyed.emplace_back(slot_canon(slot), slot);
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<ArgSlot> args;
  for (const auto& [key, slot] : keyed)
    if (args.empty() || key != slot_canon(args.back())) args.push_back(slot);
  std::vector<PropertyTriple> props = a.properties();
  props.insert(props.end(), b.properties().begin(), b.properties().end());
  std::vector<Infon> members = a.members();
  members.insert(members.end(), b.members().begin(), b.members().end());
  return Infon::predication(a.relation(), std::move(args), a.polarity())
      .with_properties(std::move(props))
      .with_members(dedup_members(std::move(members)));
}

}  // namespace detail

/// Combine two infons into one carrying all components of both, equal
/// components merged. ∅ is the identity. A basic identifier infon combined
/// with a predication that has an unanchored person parameter anchors the
/// first such parameter (this is how "Someone loves apples ⊕ John" becomes
/// "John loves apples"). Otherwise both sides are flattened into their
/// parts, same-relation same-polarity predications merge component-wise,
/// equal parts collapse, and whatever remains is one predication or a
/// grouping of the parts.
///
/// ⊕ is commutative, and associative except across identifier anchoring:
/// anchoring consumes the identifier into a binding, which is inherently
/// order-sensitive.
inline Infon combine(const Infon& a, const Infon& b) {
  if (a.is_empty()) return b;
  if (b.is_empty()) return a;

  auto try_anchor = [](const Infon& id, const Infon& host) -> std::optional<Infon> {
    if (!is_identifier_infon(id) || !host.is_predication()) return std::nullopt;
    const ObjectRef& person = std::get<ObjectRef>(id.args()[0]);
    for (const auto& slot : host.args())
      if (const auto* p = std::get_if<Parameter>(&slot))
        if (p->constraint == ParamConstraint::person) return anchor(host, *p, person);
    return std::nullopt;
  };
  if (auto anchored = try_anchor(b, a)) return *anchored;
  if (auto anchored = try_anchor(a, b)) return *anchored;

  std::vector<Infon> parts;
  for (const Infon* side : {&a, &b}) {
    if (side->is_grouping())
      parts.insert(parts.end(), side->members().begin(), side->members().end());
    else
      parts.push_back(*side);
  }

  std::map<std::pair<std::string, bool>, Infon> buckets;  // (relation, polarity) -> merged
  std::vector<Infon> rest;
  std::vector<std::pair<std::string, bool>> bucket_order;
  for (const auto& part : parts) {
    if (!part.is_predication()) {
      rest.push_back(part);
      continue;
    }
    std::pair<std::string, bool> key{part.relation(), part.polarity() == Polarity::holds};
    auto it = buckets.find(key);
    if (it == buckets.end()) {
      buckets.emplace(key, part);
      bucket_order.push_back(key);
    } else {
      it->second = detail::merge_predications(it->second, part);
    }
  }
  std::vector<Infon> out = std::move(rest);
  for (const auto& key : bucket_order) out.push_back(buckets.at(key));
  out = detail::dedup_members(std::move(out));
  if (out.size() == 1) return out[0];
  return Infon::grouping(std::move(out));
}

// ---------------------------------------------------------------------------
// ⊗ — abstraction by projection

/// Keep exactly the listed components; relation, polarity, slot order, and
/// parameter slots are preserved. keep must be a subset of components(a).
inline Infon project(const Infon& a, const ComponentSet& keep) {
  ComponentSet all = components(a);
  ComponentSet wanted = keep;
  canonicalize(wanted);
  for (const auto& c : wanted)
    if (!contains(all, c))
      fail(Errc::unknown_component, "projection keeps a component the infon does not have");

  std::vector<ArgSlot> args;
  for (const auto& slot : a.args()) {
    if (std::holds_alternative<Parameter>(slot)) {
      args.push_back(slot);
      continue;
    }
    Component c = std::holds_alternative<ObjectRef>(slot) ? Component(std::get<ObjectRef>(slot))
                                                          : Component(std::get<Scalar>(slot));
    if (contains(wanted, c)) args.push_back(slot);
  }
  std::vector<PropertyTriple> props;
  for (const auto& t : a.properties())
    if (contains(wanted, Component(t))) props.push_back(t);
  std::vector<Infon> members;
  for (const auto& m : a.members())
    if (contains(wanted, Component(m))) members.push_back(m);

  if (a.is_grouping()) return Infon::grouping(std::move(members));
  return Infon::predication(a.relation(), std::move(args), a.polarity())
      .with_properties(std::move(props))
      .with_members(std::move(members));
}

// ---------------------------------------------------------------------------
// ÷ — quotient

/// Concentrate on the components of a that do not appear in b. Removing a
/// person re-opens their slots as one fresh person-constrained parameter
/// (anonymize/identify must be inverses); other removed slots drop outright.
inline Infon quotient(const Infon& a, const Infon& b) {
  ComponentSet remove = components(b);
  std::set<std::string> removed_persons;
  for (const auto& c : remove)
    if (c.is_object() && c.object().is_person()) removed_persons.insert(c.object().id());

  detail::FreshParams fresh(detail::parameter_names(a));
  std::vector<ArgSlot> args;
  for (const auto& slot : a.args()) {
    if (const auto* o = std::get_if<ObjectRef>(&slot)) {
      if (o->is_person() && removed_persons.count(o->id())) {
        args.emplace_back(Parameter(fresh.for_person(o->id()), ParamConstraint::person));
        continue;
      }
      if (contains(remove, Component(*o))) continue;
      args.push_back(slot);
    } else if (const auto* v = std::get_if<Scalar>(&slot)) {
      if (!contains(remove, Component(*v))) args.push_back(slot);
    } else {
      args.push_back(slot);  // parameters stay
    }
  }
  std::vector<PropertyTriple> props;
  for (const auto& t : a.properties())
    if (!contains(remove, Component(t))) props.push_back(t);
  std::vector<Infon> members;
  for (const auto& m : a.members())
    if (!contains(remove, Component(m))) members.push_back(m);

  if (a.is_grouping()) return Infon::grouping(std::move(members));
  return Infon::predication(a.relation(), std::move(args), a.polarity())
      .with_properties(std::move(props))
      .with_members(std::move(members));
}

// ---------------------------------------------------------------------------
// ρ — renaming

namespace detail {

inline Infon rename_rec(const Infon& s, const std::map<std::string, std::string>& mapping) {
  std::vector<ArgSlot> args = s.args();
  for (auto& slot : args)
    if (auto* p = std::get_if<Parameter>(&slot)) {
      auto it = mapping.find(p->name);
      if (it != mapping.end()) slot = Parameter(it->second, p->constraint);
    }
  std::vector<Infon> members;
  members.reserve(s.members().size());
  for (const auto& m : s.members()) members.push_back(rename_rec(m, mapping));
  if (s.is_grouping()) return Infon::grouping(std::move(members));
  std::string relation = s.relation();
  if (auto it = mapping.find(relation); it != mapping.end()) relation = it->second;
  return Infon::predication(std::move(relation), std::move(args), s.polarity())
      .with_properties(s.properties())
      .with_members(std::move(members));
}

}  // namespace detail

/// Rewrite relation and parameter names. Objects and identifiers are never
/// touched, so renaming preserves referents. The mapping must be injective
/// on the symbols it actually touches.
inline Infon rename(const Infon& a, const std::map<std::string, std::string>& mapping) {
  std::set<std::string> touched;
  std::function<void(const Infon&)> collect = [&](const Infon& s) {
    if (!s.relation().empty() && mapping.count(s.relation())) touched.insert(s.relation());
    for (const auto& slot : s.args())
      if (const auto* p = std::get_if<Parameter>(&slot))
        if (mapping.count(p->name)) touched.insert(p->name);
    for (const auto& m : s.members()) collect(m);
  };
  collect(a);
  std::set<std::string> targets;
  for (const auto& sym : touched)
    if (!targets.insert(mapping.at(sym)).second)
      fail(Errc::rename_collision, "mapping sends two symbols to '" + mapping.at(sym) + "'");
  return detail::rename_rec(a, mapping);
}

// ---------------------------------------------------------------------------
// ∪ — union

/// A grouping of exactly the two operands, kept distinct: common components
/// are deliberately not merged (the stated difference from ⊕).
inline Infon union_of(const Infon& a, const Infon& b) { return Infon::grouping({a, b}); }

// ---------------------------------------------------------------------------
// ∩ — intersection

inline Infon intersect(const Infon& a, const Infon& b) {
  if (a.is_predication() && b.is_predication() && a.relation() == b.relation() &&
      a.polarity() == b.polarity())
    return project(a, set_intersection(components(a), components(b)));
  if (a.is_grouping() && b.is_grouping())
    return project(a, set_intersection(components(a), components(b)));

  ComponentSet shared = set_intersection(components(a), components(b));
  if (shared.empty()) return Infon::empty();
  if (shared.size() == 1 && shared[0].is_object())
    return Infon::predication("is", {shared[0].object()});
  return detail::component_carrier(shared);
}

// ---------------------------------------------------------------------------
// ¬ — negation

/// Full negation: every universe component that does not appear in the infon.
inline Infon negate_full(const Infon& a, const InfonWorld& world) {
  if (world.universe().empty())
    fail(Errc::empty_universe, "full negation needs a finite, non-empty universe");
  return detail::component_carrier(set_difference(world.universe(), components(a)));
}

/// Minimal negation: the complement restricted to a given context.
inline Infon negate_min(const Infon& a, const ComponentSet& context) {
  ComponentSet ctx = context;
  canonicalize(ctx);
  return detail::component_carrier(set_difference(ctx, components(a)));
}

// ---------------------------------------------------------------------------
// Predicates

/// Proper sub-infon: components(a) ⊊ components(b).
inline bool sub_infon(const Infon& a, const Infon& b) {
  ComponentSet ca = components(a), cb = components(b);
  return is_subset(ca, cb) && ca != cb;
}

// ---------------------------------------------------------------------------
// Extraction operations

/// Instantiation: anchor every listed parameter; equals folding anchor over
/// the map in any order.
inline Infon instantiate(const Infon& a, const std::vector<std::pair<Parameter, ObjectRef>>& anchors) {
  Infon out = a;
  for (const auto& [param, obj] : anchors) out = anchor(out, param, obj);
  return out;
}

/// Extension: add facets not given by the infon itself.
inline Infon extend(const Infon& a, const std::vector<Infon>& context) {
  if (context.empty()) return a;
  std::vector<Infon> members = context;
  members.push_back(a);
  return Infon::grouping(detail::dedup_members(std::move(members)));
}

/// Join: combine infons into one compound value (a grouping of all parts).
inline Infon join(const std::vector<Infon>& parts) {
  if (parts.empty()) fail(Errc::empty_join, "join needs at least one infon");
  return Infon::grouping(detail::dedup_members(parts));
}

}  // namespace piidb
