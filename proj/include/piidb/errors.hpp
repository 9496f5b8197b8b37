#pragma once

#include <stdexcept>
#include <string>

namespace piidb {

// Domain error codes. The wire names (kebab-case) are what the CLI prints
// and what tests assert on.
enum class Errc {
  malformed_infon,
  unknown_parameter,
  constraint_violation,
  unknown_component,
  rename_collision,
  empty_universe,
  empty_join,
  not_pii,
  not_atomic,
  not_compound,
  not_self,
  duplicate_proprietor,
  unknown_proprietor,
  unknown_sphere,
  unknown_infon,
  unknown_rule,
  pii_not_attachable,
  boundary_exceeded,
  pii_not_claimable,
  policy_denied,
  store_io,
  store_locked,
};

inline const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::malformed_infon: return "malformed-infon";
    case Errc::unknown_parameter: return "unknown-parameter";
    case Errc::constraint_violation: return "constraint-violation";
    case Errc::unknown_component: return "unknown-component";
    case Errc::rename_collision: return "rename-collision";
    case Errc::empty_universe: return "empty-universe";
    case Errc::empty_join: return "empty-join";
    case Errc::not_pii: return "not-pii";
    case Errc::not_atomic: return "not-atomic";
    case Errc::not_compound: return "not-compound";
    case Errc::not_self: return "not-self";
    case Errc::duplicate_proprietor: return "duplicate-proprietor";
    case Errc::unknown_proprietor: return "unknown-proprietor";
    case Errc::unknown_sphere: return "unknown-sphere";
    case Errc::unknown_infon: return "unknown-infon";
    case Errc::unknown_rule: return "unknown-rule";
    case Errc::pii_not_attachable: return "pii-not-attachable";
    case Errc::boundary_exceeded: return "boundary-exceeded";
    case Errc::pii_not_claimable: return "pii-not-claimable";
    case Errc::policy_denied: return "policy-denied";
    case Errc::store_io: return "store-io";
    case Errc::store_locked: return "store-locked";
  }
  return "unknown-error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  const char* name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace piidb
