#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "piidb/errors.hpp"
#include "piidb/identity.hpp"
#include "piidb/scalar.hpp"

namespace piidb {

enum class Polarity { does_not_hold = 0, holds = 1 };

enum class Validity { valid, invalid, undetermined };

inline const char* validity_name(Validity v) noexcept {
  switch (v) {
    case Validity::valid: return "valid";
    case Validity::invalid: return "invalid";
    case Validity::undetermined: return "undetermined";
  }
  return "undetermined";
}

/// (param, value, validity) property of an infon.
struct PropertyTriple {
  std::string param;
  Scalar value;
  Validity validity = Validity::valid;

  PropertyTriple(std::string param_, Scalar value_, Validity validity_ = Validity::valid)
      : param(std::move(param_)), value(std::move(value_)), validity(validity_) {
    if (param.empty()) fail(Errc::malformed_infon, "property param must be non-empty");
  }

  std::string canon() const {
    return "pt(" + canon_str(param) + canon_scalar(value) + validity_name(validity)[0] + std::string(")");
  }

  friend bool operator==(const PropertyTriple& a, const PropertyTriple& b) noexcept {
    return a.param == b.param && a.validity == b.validity && a.value == b.value;
  }
  friend bool operator<(const PropertyTriple& a, const PropertyTriple& b) { return a.canon() < b.canon(); }
};

/// One argument position: an object, an unanchored parameter, or a literal.
using ArgSlot = std::variant<ObjectRef, Parameter, Scalar>;

inline std::string slot_canon(const ArgSlot& slot) {
  if (const auto* o = std::get_if<ObjectRef>(&slot)) return o->canon();
  if (const auto* p = std::get_if<Parameter>(&slot)) return p->canon();
  return "l(" + canon_scalar(std::get<Scalar>(slot)) + ")";
}

inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// 128-bit content key rendered as 32 hex chars. Structure-derived, so two
/// structurally equal infons always share a key (the store relies on this
/// for idempotent ingest).
inline std::string content_key(const std::string& canon) {
  std::uint64_t a = fnv1a64(canon, 14695981039346656037ULL);
  std::uint64_t b = fnv1a64(canon, 0x9E3779B97F4A7C15ULL);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return std::string(buf);
}

/// A discrete item of information: an n-place relation over argument slots
/// with a polarity, plus properties — or a grouping that holds a multiset of
/// member infons as one value. The empty infon ∅ is the empty grouping.
///
/// Values are immutable after construction. Anchoring substitutes objects
/// into parameter slots, so structural equality (canonical-form equality)
/// identifies an anchored parameter with a directly supplied object.
class Infon {
 public:
  /// ∅ — the empty information.
  static Infon empty() { return grouping({}); }

  static Infon predication(std::string relation, std::vector<ArgSlot> args,
                           Polarity polarity = Polarity::holds) {
    if (relation.empty())
      fail(Errc::malformed_infon, "a predication needs a non-empty relation");
    Infon s;
    s.relation_ = std::move(relation);
    s.args_ = std::move(args);
    s.polarity_ = polarity;
    s.finalize();
    return s;
  }

  /// Grouping: a multiset of sub-infons treated as one value. Duplicates are
  /// kept (union of infons must not merge common components); callers that
  /// want set semantics dedup first.
  static Infon grouping(std::vector<Infon> members) {
    Infon s;
    s.members_ = std::move(members);
    s.finalize();
    return s;
  }

  Infon with_properties(std::vector<PropertyTriple> properties) const {
    if (is_grouping() && !properties.empty())
      fail(Errc::malformed_infon, "a grouping carries no properties");
    Infon s = *this;
    s.properties_ = std::move(properties);
    s.finalize();
    return s;
  }

  Infon with_members(std::vector<Infon> members) const {
    if (is_grouping() && (!args_.empty() || !properties_.empty()))
      fail(Errc::malformed_infon, "a grouping carries only members");
    Infon s = *this;
    s.members_ = std::move(members);
    s.finalize();
    return s;
  }

  Infon with_args(std::vector<ArgSlot> args) const {
    if (is_grouping() && !args.empty()) fail(Errc::malformed_infon, "a grouping carries no args");
    Infon s = *this;
    s.args_ = std::move(args);
    s.finalize();
    return s;
  }

  Infon with_polarity(Polarity p) const {
    Infon s = *this;
    s.polarity_ = p;
    s.finalize();
    return s;
  }

  const std::string& relation() const noexcept { return relation_; }
  const std::vector<ArgSlot>& args() const noexcept { return args_; }
  Polarity polarity() const noexcept { return polarity_; }
  const std::vector<PropertyTriple>& properties() const noexcept { return properties_; }
  const std::vector<Infon>& members() const noexcept { return members_; }

  bool is_grouping() const noexcept { return relation_.empty(); }
  bool is_predication() const noexcept { return !relation_.empty(); }
  bool is_empty() const noexcept {
    return relation_.empty() && args_.empty() && properties_.empty() && members_.empty();
  }

  /// Canonical byte form; injective over structure, so equality of canonical
  /// forms is structural equality.
  const std::string& canon() const noexcept { return canon_; }

  /// Opaque infon key (content hash of the canonical form).
  const std::string& key() const noexcept { return key_; }

  friend bool operator==(const Infon& a, const Infon& b) noexcept { return a.canon_ == b.canon_; }
  friend bool operator!=(const Infon& a, const Infon& b) noexcept { return !(a == b); }
  friend bool operator<(const Infon& a, const Infon& b) noexcept { return a.canon_ < b.canon_; }

 private:
  Infon() = default;

  void finalize() {
    if (relation_.empty() && (!args_.empty() || !properties_.empty()))
      fail(Errc::malformed_infon, "an infon is a predication (relation) or a grouping (members)");
    std::sort(properties_.begin(), properties_.end());
    properties_.erase(std::unique(properties_.begin(), properties_.end()), properties_.end());
    std::sort(members_.begin(), members_.end());
    canon_ = "I(" + canon_str(relation_) + (polarity_ == Polarity::holds ? "1" : "0") + "A(";
    for (const auto& a : args_) canon_ += slot_canon(a);
    canon_ += ")P(";
    for (const auto& p : properties_) canon_ += p.canon();
    canon_ += ")M(";
    for (const auto& m : members_) canon_ += m.canon();
    canon_ += "))";
    key_ = content_key(canon_);
  }

  std::string relation_;
  std::vector<ArgSlot> args_;
  Polarity polarity_ = Polarity::holds;
  std::vector<PropertyTriple> properties_;
  std::vector<Infon> members_;
  std::string canon_;
  std::string key_;
};

// ---------------------------------------------------------------------------
// Construction helpers

/// make_infon of the operation set: a fresh predication with no properties
/// or members. Rejects the degenerate empty form (∅ is built via
/// Infon::empty(), never via make).
inline Infon make_infon(std::string relation, std::vector<ArgSlot> args,
                        Polarity polarity = Polarity::holds) {
  if (relation.empty()) fail(Errc::malformed_infon, "make_infon: empty relation");
  return Infon::predication(std::move(relation), std::move(args), polarity);
}

/// The basic pinfon ⟨is, person, 1⟩: an identifier wrapped as an infon.
inline Infon identifier_infon(const Identifier& identity) {
  return Infon::predication("is", {ObjectRef::person(identity)});
}

inline bool is_identifier_infon(const Infon& s) {
  if (s.relation() != "is" || s.args().size() != 1 || s.polarity() != Polarity::holds) return false;
  if (!s.properties().empty() || !s.members().empty()) return false;
  const auto* o = std::get_if<ObjectRef>(&s.args()[0]);
  return o != nullptr && o->is_person();
}

// ---------------------------------------------------------------------------
// Primitive inspectors

namespace detail {

template <typename Fn>
void for_each_object(const Infon& s, Fn&& fn) {
  for (const auto& slot : s.args())
    if (const auto* o = std::get_if<ObjectRef>(&slot)) fn(*o);
  for (const auto& m : s.members()) for_each_object(m, fn);
}

template <typename Fn>
void for_each_parameter(const Infon& s, Fn&& fn) {
  for (const auto& slot : s.args())
    if (const auto* p = std::get_if<Parameter>(&slot)) fn(*p);
  for (const auto& m : s.members()) for_each_parameter(m, fn);
}

}  // namespace detail

/// Deduplicated set of person keys reachable through args and members,
/// transitively. Duplicate occurrences of one proprietor count once.
inline std::set<std::string> referents(const Infon& s) {
  std::set<std::string> keys;
  detail::for_each_object(s, [&](const ObjectRef& o) {
    if (o.is_person()) keys.insert(o.identity().person_key());
  });
  return keys;
}

/// PROP(σ): the proprietor set, under the name the theory uses.
inline std::set<std::string> prop(const Infon& s) { return referents(s); }

/// n_σ — the number of uniquely identified persons in the infon.
inline std::size_t referent_count(const Infon& s) { return referents(s).size(); }

/// All objects (person and non-person) occurring in the infon, deduplicated
/// by id and ordered by id.
inline std::vector<ObjectRef> objects(const Infon& s) {
  std::vector<ObjectRef> out;
  std::set<std::string> seen;
  detail::for_each_object(s, [&](const ObjectRef& o) {
    if (seen.insert(o.id()).second) out.push_back(o);
  });
  std::sort(out.begin(), out.end(),
            [](const ObjectRef& a, const ObjectRef& b) { return a.id() < b.id(); });
  return out;
}

// ---------------------------------------------------------------------------
// Anchoring

namespace detail {

inline void check_anchor_constraint(const Parameter& param, const ObjectRef& obj) {
  if (param.constraint == ParamConstraint::person && !obj.is_person())
    fail(Errc::constraint_violation,
         "parameter '" + param.name + "' requires a singly identifiable person");
  if (param.constraint == ParamConstraint::nonperson && obj.is_person())
    fail(Errc::constraint_violation, "parameter '" + param.name + "' requires a non-person object");
}

/// Substitute obj for every occurrence of the named parameter, through
/// members transitively. Returns the rewritten infon and the occurrence count.
inline std::pair<Infon, std::size_t> substitute_parameter(const Infon& s, const std::string& name,
                                                          const ObjectRef& obj) {
  std::size_t hits = 0;
  std::vector<ArgSlot> args = s.args();
  for (auto& slot : args) {
    if (const auto* p = std::get_if<Parameter>(&slot); p != nullptr && p->name == name) {
      check_anchor_constraint(*p, obj);
      slot = obj;
      ++hits;
    }
  }
  std::vector<Infon> members;
  members.reserve(s.members().size());
  for (const auto& m : s.members()) {
    auto [rewritten, n] = substitute_parameter(m, name, obj);
    hits += n;
    members.push_back(std::move(rewritten));
  }
  if (hits == 0) return {s, 0};
  if (s.is_grouping()) return {Infon::grouping(std::move(members)), hits};
  Infon out = Infon::predication(s.relation(), std::move(args), s.polarity())
                  .with_properties(s.properties())
                  .with_members(std::move(members));
  return {out, hits};
}

}  // namespace detail

/// Anchor a parameter of the infon to an object. The object is substituted
/// into every top-level slot holding the parameter; the original infon is
/// unchanged. Anchoring never changes the relation, polarity, or slot count.
/// Re-anchoring is idempotent: once a binding has substituted the slot, a
/// second anchor of the same object is a no-op.
inline Infon anchor(const Infon& s, const Parameter& param, const ObjectRef& obj) {
  bool present = false;
  std::vector<ArgSlot> args = s.args();
  for (auto& slot : args) {
    if (const auto* p = std::get_if<Parameter>(&slot); p != nullptr && p->name == param.name) {
      detail::check_anchor_constraint(*p, obj);
      slot = obj;
      present = true;
    }
  }
  if (!present) {
    for (const auto& slot : s.args())
      if (const auto* o = std::get_if<ObjectRef>(&slot); o != nullptr && *o == obj) return s;
    fail(Errc::unknown_parameter, "parameter '" + param.name + "' does not occur in the infon");
  }
  return Infon::predication(s.relation(), std::move(args), s.polarity())
      .with_properties(s.properties())
      .with_members(s.members());
}

}  // namespace piidb
