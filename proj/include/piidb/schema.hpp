#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace piidb {

/// How a possessive/attributive relation splits into self information plus a
/// fact about the owned object: "John's car is fast" (owner John, owned car)
/// factors into the bridge sapinfon "John has a car" and the remainder
/// "the car is fast".
struct PossessiveRule {
  std::size_t owner_slot = 0;
  std::size_t owned_slot = 1;
  std::string bridge_relation = "has";
};

/// Relation schema table, shipped as configuration. Relations without an
/// entry are not factored; their subject is read positionally.
class RelationSchema {
 public:
  RelationSchema& add_possessive(const std::string& relation, std::size_t owner_slot = 0,
                                 std::size_t owned_slot = 1, std::string bridge = "has") {
    rules_[relation] = PossessiveRule{owner_slot, owned_slot, std::move(bridge)};
    return *this;
  }

  const PossessiveRule* find(const std::string& relation) const {
    auto it = rules_.find(relation);
    return it == rules_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, PossessiveRule>& rules() const noexcept { return rules_; }

 private:
  std::map<std::string, PossessiveRule> rules_;
};

}  // namespace piidb
