#pragma once

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include "piidb/infon.hpp"

namespace piidb {

/// One building block of an infon: an object slot, a literal slot, a
/// property triple, or a member infon. Unanchored parameters are abstraction
/// placeholders, not content — they contribute no component. That reading is
/// what makes the component-set laws of the algebra line up: removing an
/// identifier re-opens its slot as a parameter without adding anything to
/// the component set, and anchoring a parameter adds exactly the object.
class Component {
 public:
  using Value = std::variant<ObjectRef, Scalar, PropertyTriple, Infon>;

  explicit Component(ObjectRef o) : value_(std::move(o)) { rebuild(); }
  explicit Component(Scalar v) : value_(std::move(v)) { rebuild(); }
  explicit Component(PropertyTriple t) : value_(std::move(t)) { rebuild(); }
  explicit Component(Infon member) : value_(std::move(member)) { rebuild(); }

  bool is_object() const noexcept { return std::holds_alternative<ObjectRef>(value_); }
  bool is_literal() const noexcept { return std::holds_alternative<Scalar>(value_); }
  bool is_property() const noexcept { return std::holds_alternative<PropertyTriple>(value_); }
  bool is_member() const noexcept { return std::holds_alternative<Infon>(value_); }

  const ObjectRef& object() const { return std::get<ObjectRef>(value_); }
  const Scalar& literal() const { return std::get<Scalar>(value_); }
  const PropertyTriple& property() const { return std::get<PropertyTriple>(value_); }
  const Infon& member() const { return std::get<Infon>(value_); }

  const std::string& canon() const noexcept { return canon_; }

  friend bool operator==(const Component& a, const Component& b) noexcept {
    return a.canon_ == b.canon_;
  }
  friend bool operator<(const Component& a, const Component& b) noexcept {
    return a.canon_ < b.canon_;
  }

 private:
  void rebuild() {
    if (const auto* o = std::get_if<ObjectRef>(&value_))
      canon_ = "co" + o->canon();
    else if (const auto* v = std::get_if<Scalar>(&value_))
      canon_ = "cl" + canon_scalar(*v);
    else if (const auto* t = std::get_if<PropertyTriple>(&value_))
      canon_ = "cp" + t->canon();
    else
      canon_ = "cm" + std::get<Infon>(value_).canon();
  }

  Value value_;
  std::string canon_;
};

using ComponentSet = std::vector<Component>;  // kept sorted and deduplicated

inline void canonicalize(ComponentSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

/// The component set of an infon (a set: duplicates collapse).
inline ComponentSet components(const Infon& s) {
  ComponentSet out;
  for (const auto& slot : s.args()) {
    if (const auto* o = std::get_if<ObjectRef>(&slot))
      out.emplace_back(*o);
    else if (const auto* v = std::get_if<Scalar>(&slot))
      out.emplace_back(*v);
    // parameter slots contribute nothing
  }
  for (const auto& t : s.properties()) out.emplace_back(t);
  for (const auto& m : s.members()) out.emplace_back(m);
  canonicalize(out);
  return out;
}

inline bool contains(const ComponentSet& set, const Component& c) {
  return std::binary_search(set.begin(), set.end(), c);
}

inline ComponentSet set_union(ComponentSet a, const ComponentSet& b) {
  a.insert(a.end(), b.begin(), b.end());
  canonicalize(a);
  return a;
}

inline ComponentSet set_intersection(const ComponentSet& a, const ComponentSet& b) {
  ComponentSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline ComponentSet set_difference(const ComponentSet& a, const ComponentSet& b) {
  ComponentSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool is_subset(const ComponentSet& a, const ComponentSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace piidb
