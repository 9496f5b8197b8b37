#pragma once

#include <string>

#include "piidb/infon.hpp"

namespace piidb {

namespace detail {

inline std::string display_name(const ObjectRef& o) {
  if (o.is_person()) {
    for (const auto& d : o.identity().descriptors())
      if (d.key == "name" && d.value.is_text()) return d.value.raw();
    return o.identity().person_key();
  }
  return o.label().empty() ? o.id() : o.label();
}

inline std::string render_slot(const ArgSlot& slot) {
  if (const auto* o = std::get_if<ObjectRef>(&slot)) return display_name(*o);
  if (const auto* p = std::get_if<Parameter>(&slot))
    return p->constraint == ParamConstraint::person ? "someone" : p->name;
  const Scalar& v = std::get<Scalar>(slot);
  return v.raw();
}

}  // namespace detail

/// Informal sentence-like rendering for the `text` output format; the
/// canonical form is the records serialization, not this.
inline std::string render_text(const Infon& s) {
  if (s.is_grouping()) {
    std::string out = "{";
    bool first = true;
    for (const auto& m : s.members()) {
      if (!first) out += "; ";
      out += render_text(m);
      first = false;
    }
    return out + "}";
  }
  std::string body;
  if (s.args().size() == 1) {
    body = detail::render_slot(s.args()[0]) + " " + s.relation();
  } else if (s.args().size() == 2) {
    body = detail::render_slot(s.args()[0]) + " " + s.relation() + " " +
           detail::render_slot(s.args()[1]);
  } else {
    body = s.relation() + "(";
    for (std::size_t i = 0; i < s.args().size(); ++i) {
      if (i) body += ", ";
      body += detail::render_slot(s.args()[i]);
    }
    body += ")";
  }
  if (!s.properties().empty()) {
    body += " [";
    bool first = true;
    for (const auto& t : s.properties()) {
      if (!first) body += ", ";
      body += t.param + "=" + t.value.raw();
      if (t.validity == Validity::invalid) body += "!";
      if (t.validity == Validity::undetermined) body += "?";
      first = false;
    }
    body += "]";
  }
  if (!s.members().empty()) {
    body += " with {";
    bool first = true;
    for (const auto& m : s.members()) {
      if (!first) body += "; ";
      body += render_text(m);
      first = false;
    }
    body += "}";
  }
  return s.polarity() == Polarity::holds ? body : "not(" + body + ")";
}

}  // namespace piidb
