#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "piidb/errors.hpp"
#include "piidb/scalar.hpp"

namespace piidb {

/// Length-prefixed string encoding; the building block of every canonical
/// form in the library. Injective, so canonical-form equality is structural
/// equality.
inline std::string canon_str(const std::string& s) {
  return std::to_string(s.size()) + ":" + s;
}

inline std::string canon_scalar(const Scalar& v) {
  return (v.is_text() ? "t" : "n") + canon_str(v.raw());
}

enum class Nature { natural, artificial };

inline const char* nature_name(Nature n) noexcept {
  return n == Nature::natural ? "natural" : "artificial";
}

/// One person descriptor: a natural trait (gender, blood type) or an
/// artificial one mapped onto the person (date of birth, ZIP, issued numbers).
struct Descriptor {
  std::string key;
  Scalar value;
  Nature nature;

  Descriptor(std::string key_, Scalar value_, Nature nature_)
      : key(std::move(key_)), value(std::move(value_)), nature(nature_) {
    if (key.empty()) fail(Errc::malformed_infon, "descriptor key must be non-empty");
  }

  std::string canon() const {
    return "d(" + canon_str(key) + (nature == Nature::natural ? "N" : "A") + canon_scalar(value) + ")";
  }

  friend bool operator==(const Descriptor& a, const Descriptor& b) noexcept {
    return a.key == b.key && a.nature == b.nature && a.value == b.value;
  }
  friend bool operator<(const Descriptor& a, const Descriptor& b) { return a.canon() < b.canon(); }
};

/// A set of descriptors that together recognize exactly one person, plus the
/// opaque person key that registration binds them to. The one-to-one mapping
/// between descriptor set and person key is enforced store-wide at
/// registration time, not here.
class Identifier {
 public:
  Identifier(std::vector<Descriptor> descriptors, std::string person_key)
      : descriptors_(std::move(descriptors)), person_key_(std::move(person_key)) {
    if (descriptors_.empty()) fail(Errc::malformed_infon, "identifier needs at least one descriptor");
    if (person_key_.empty()) fail(Errc::malformed_infon, "identifier needs a person key");
    std::sort(descriptors_.begin(), descriptors_.end());
    descriptors_.erase(std::unique(descriptors_.begin(), descriptors_.end()), descriptors_.end());
  }

  const std::vector<Descriptor>& descriptors() const noexcept { return descriptors_; }
  const std::string& person_key() const noexcept { return person_key_; }

  /// Canonical form of the descriptor set alone; the registration-uniqueness key.
  std::string descriptor_canon() const {
    std::string out = "D(";
    for (const auto& d : descriptors_) out += d.canon();
    return out + ")";
  }

  std::string canon() const { return "id(" + canon_str(person_key_) + descriptor_canon() + ")"; }

  friend bool operator==(const Identifier& a, const Identifier& b) noexcept {
    return a.person_key_ == b.person_key_ && a.descriptors_ == b.descriptors_;
  }

 private:
  std::vector<Descriptor> descriptors_;
  std::string person_key_;
};

enum class ParamConstraint { any, person, nonperson };

inline const char* constraint_name(ParamConstraint c) noexcept {
  switch (c) {
    case ParamConstraint::any: return "any";
    case ParamConstraint::person: return "person";
    case ParamConstraint::nonperson: return "nonperson";
  }
  return "any";
}

/// An unanchored placeholder in an infon ("someone", "some place"). A
/// person-constrained parameter may only ever be anchored to a person object.
struct Parameter {
  std::string name;
  ParamConstraint constraint = ParamConstraint::any;

  Parameter(std::string name_, ParamConstraint constraint_ = ParamConstraint::any)
      : name(std::move(name_)), constraint(constraint_) {
    if (name.empty()) fail(Errc::malformed_infon, "parameter name must be non-empty");
  }

  std::string canon() const {
    return "q(" + canon_str(name) + constraint_name(constraint)[0] + std::string(")");
  }

  friend bool operator==(const Parameter& a, const Parameter& b) noexcept {
    return a.name == b.name && a.constraint == b.constraint;
  }
};

/// A thing in the world: either a registered-identifiable person (carrying
/// exactly one Identifier) or a non-person entity with a label.
class ObjectRef {
 public:
  static ObjectRef person(Identifier identity) {
    ObjectRef o;
    o.id_ = identity.person_key();
    o.person_.emplace(std::move(identity));
    return o;
  }

  static ObjectRef nonperson(std::string id, std::string label) {
    if (id.empty()) fail(Errc::malformed_infon, "object id must be non-empty");
    ObjectRef o;
    o.id_ = std::move(id);
    o.label_ = std::move(label);
    return o;
  }

  const std::string& id() const noexcept { return id_; }
  bool is_person() const noexcept { return person_.has_value(); }
  const Identifier& identity() const { return *person_; }
  const std::string& label() const noexcept { return label_; }

  std::string canon() const {
    if (person_) return "o(" + canon_str(id_) + "p" + person_->canon() + ")";
    return "o(" + canon_str(id_) + "n" + canon_str(label_) + ")";
  }

  friend bool operator==(const ObjectRef& a, const ObjectRef& b) noexcept {
    if (a.id_ != b.id_) return false;
    if (a.person_.has_value() != b.person_.has_value()) return false;
    if (a.person_) return *a.person_ == *b.person_;
    return a.label_ == b.label_;
  }

 private:
  ObjectRef() = default;

  std::string id_;
  std::optional<Identifier> person_;
  std::string label_;
};

}  // namespace piidb
