#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "piidb/component.hpp"
#include "piidb/infon.hpp"

namespace piidb {

enum class TriState { yes, no, unstated };

inline const char* tristate_name(TriState t) noexcept {
  switch (t) {
    case TriState::yes: return "yes";
    case TriState::no: return "no";
    case TriState::unstated: return "unstated";
  }
  return "unstated";
}

/// The world of infons (A; O; P): atomic infons, plus the stated predicate
/// relations. Compatibility and association are each one tri-state map, so a
/// pair can never be stated both ways. Full negation complements against the
/// world's explicit, finite component universe — the engine never infers one.
class InfonWorld {
 public:
  void add_atom(Infon s) { atoms_.push_back(std::move(s)); }
  const std::vector<Infon>& atoms() const noexcept { return atoms_; }

  void add_universe(Component c) {
    universe_.push_back(std::move(c));
    canonicalize(universe_);
  }
  void add_universe(const Infon& s) {
    for (auto& c : components(s)) universe_.push_back(std::move(c));
    canonicalize(universe_);
  }
  const ComponentSet& universe() const noexcept { return universe_; }

  void declare_compatible(const Infon& a, const Infon& b, bool yes) {
    compat_[pair_key(a, b)] = yes;
  }
  void declare_associated(const Infon& a, const Infon& b, bool yes) {
    assoc_[pair_key(a, b)] = yes;
  }

  /// "If we assume the completeness of compatibility and association
  /// predicates": unstated pairs then default to yes.
  void assume_complete(bool compat, bool assoc) {
    compat_complete_ = compat;
    assoc_complete_ = assoc;
  }

  TriState compatible(const Infon& a, const Infon& b) const {
    return lookup(compat_, compat_complete_, a, b);
  }
  TriState associated(const Infon& a, const Infon& b) const {
    return lookup(assoc_, assoc_complete_, a, b);
  }

 private:
  using PairKey = std::pair<std::string, std::string>;

  static PairKey pair_key(const Infon& a, const Infon& b) {
    return a.key() <= b.key() ? PairKey{a.key(), b.key()} : PairKey{b.key(), a.key()};
  }

  static TriState lookup(const std::map<PairKey, bool>& rel, bool complete, const Infon& a,
                         const Infon& b) {
    auto it = rel.find(pair_key(a, b));
    if (it != rel.end()) return it->second ? TriState::yes : TriState::no;
    return complete ? TriState::yes : TriState::unstated;
  }

  std::vector<Infon> atoms_;
  ComponentSet universe_;
  std::map<PairKey, bool> compat_;
  std::map<PairKey, bool> assoc_;
  bool compat_complete_ = false;
  bool assoc_complete_ = false;
};

inline TriState compatible(const InfonWorld& world, const Infon& a, const Infon& b) {
  return world.compatible(a, b);
}

inline TriState associated(const InfonWorld& world, const Infon& a, const Infon& b) {
  return world.associated(a, b);
}

}  // namespace piidb
