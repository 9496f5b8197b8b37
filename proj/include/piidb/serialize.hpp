#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "piidb/infon.hpp"

namespace piidb {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Canonical textual serialization: one UTF-8 JSON object per line, field
// order fixed (relation, args, polarity, properties, anchors, members) so
// golden files compare byte-for-byte. Anchors are applied by substitution at
// construction time, so the serializer always emits an empty anchors map;
// the parser still accepts a populated one and applies it.

inline Json to_json(const Scalar& v) {
  Json j = Json::object();
  j[v.is_text() ? "text" : "number"] = v.raw();
  return j;
}

inline Scalar scalar_from_json(const Json& j) {
  if (j.is_object() && j.contains("text") && j["text"].is_string())
    return Scalar::text(j["text"].get<std::string>());
  if (j.is_object() && j.contains("number")) {
    const Json& n = j["number"];
    if (n.is_string()) return Scalar::number(n.get<std::string>());
    // integers are exact; anything with a float representation must be
    // spelled as a string to keep records byte-stable
    if (n.is_number_integer()) return Scalar::number(n.get<std::int64_t>());
  }
  fail(Errc::malformed_infon, "scalar must be {\"text\": ...} or {\"number\": ...}");
}

inline Json to_json(const Descriptor& d) {
  Json j = Json::object();
  j["key"] = d.key;
  j["nature"] = nature_name(d.nature);
  j["value"] = to_json(d.value);
  return j;
}

inline Descriptor descriptor_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("key") || !j.contains("nature") || !j.contains("value"))
    fail(Errc::malformed_infon, "descriptor needs key, nature, value");
  std::string nature = j["nature"].get<std::string>();
  if (nature != "natural" && nature != "artificial")
    fail(Errc::malformed_infon, "descriptor nature must be natural or artificial");
  return Descriptor(j["key"].get<std::string>(), scalar_from_json(j["value"]),
                    nature == "natural" ? Nature::natural : Nature::artificial);
}

inline Json to_json(const Identifier& id) {
  Json j = Json::object();
  j["person_key"] = id.person_key();
  Json ds = Json::array();
  for (const auto& d : id.descriptors()) ds.push_back(to_json(d));
  j["descriptors"] = std::move(ds);
  return j;
}

inline Identifier identifier_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("person_key") || !j.contains("descriptors"))
    fail(Errc::malformed_infon, "identifier needs person_key and descriptors");
  std::vector<Descriptor> ds;
  for (const auto& d : j["descriptors"]) ds.push_back(descriptor_from_json(d));
  return Identifier(std::move(ds), j["person_key"].get<std::string>());
}

inline Json to_json(const ObjectRef& o) {
  Json j = Json::object();
  j["id"] = o.id();
  if (o.is_person())
    j["person"] = to_json(o.identity());
  else
    j["label"] = o.label();
  return j;
}

inline ObjectRef object_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("id")) fail(Errc::malformed_infon, "object needs an id");
  if (j.contains("person")) {
    ObjectRef o = ObjectRef::person(identifier_from_json(j["person"]));
    if (o.id() != j["id"].get<std::string>())
      fail(Errc::malformed_infon, "person object id must equal its person_key");
    return o;
  }
  if (!j.contains("label")) fail(Errc::malformed_infon, "non-person object needs a label");
  return ObjectRef::nonperson(j["id"].get<std::string>(), j["label"].get<std::string>());
}

inline ParamConstraint constraint_from_name(const std::string& name) {
  if (name == "any") return ParamConstraint::any;
  if (name == "person") return ParamConstraint::person;
  if (name == "nonperson") return ParamConstraint::nonperson;
  fail(Errc::malformed_infon, "unknown parameter constraint '" + name + "'");
}

inline Json to_json(const Parameter& p) {
  Json j = Json::object();
  j["name"] = p.name;
  j["constraint"] = constraint_name(p.constraint);
  return j;
}

inline Json to_json(const ArgSlot& slot) {
  Json j = Json::object();
  if (const auto* o = std::get_if<ObjectRef>(&slot))
    j["object"] = to_json(*o);
  else if (const auto* p = std::get_if<Parameter>(&slot))
    j["param"] = to_json(*p);
  else
    j["literal"] = to_json(std::get<Scalar>(slot));
  return j;
}

inline ArgSlot slot_from_json(const Json& j) {
  if (j.is_object() && j.contains("object")) return object_from_json(j["object"]);
  if (j.is_object() && j.contains("param")) {
    const Json& p = j["param"];
    if (!p.contains("name")) fail(Errc::malformed_infon, "param needs a name");
    return Parameter(p["name"].get<std::string>(),
                     p.contains("constraint") ? constraint_from_name(p["constraint"].get<std::string>())
                                              : ParamConstraint::any);
  }
  if (j.is_object() && j.contains("literal")) return scalar_from_json(j["literal"]);
  fail(Errc::malformed_infon, "arg slot must be object, param, or literal");
}

inline Json to_json(const PropertyTriple& t) {
  Json j = Json::object();
  j["param"] = t.param;
  j["value"] = to_json(t.value);
  j["validity"] = validity_name(t.validity);
  return j;
}

inline PropertyTriple property_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("param") || !j.contains("value"))
    fail(Errc::malformed_infon, "property needs param and value");
  Validity v = Validity::valid;
  if (j.contains("validity")) {
    std::string name = j["validity"].get<std::string>();
    if (name == "valid")
      v = Validity::valid;
    else if (name == "invalid")
      v = Validity::invalid;
    else if (name == "undetermined")
      v = Validity::undetermined;
    else
      fail(Errc::malformed_infon, "unknown validity '" + name + "'");
  }
  return PropertyTriple(j["param"].get<std::string>(), scalar_from_json(j["value"]), v);
}

inline Json to_json(const Infon& s) {
  Json j = Json::object();
  j["relation"] = s.relation();
  Json args = Json::array();
  for (const auto& a : s.args()) args.push_back(to_json(a));
  j["args"] = std::move(args);
  j["polarity"] = s.polarity() == Polarity::holds ? 1 : 0;
  Json props = Json::array();
  for (const auto& p : s.properties()) props.push_back(to_json(p));
  j["properties"] = std::move(props);
  j["anchors"] = Json::object();
  Json members = Json::array();
  for (const auto& m : s.members()) members.push_back(to_json(m));
  j["members"] = std::move(members);
  return j;
}

/// Single-line record form.
inline std::string to_record_line(const Infon& s) { return to_json(s).dump(); }

inline Infon infon_from_json(const Json& j) {
  if (!j.is_object()) fail(Errc::malformed_infon, "infon record must be a JSON object");
  std::string relation = j.contains("relation") ? j["relation"].get<std::string>() : "";
  Polarity polarity = Polarity::holds;
  if (j.contains("polarity")) {
    int p = j["polarity"].get<int>();
    if (p != 0 && p != 1) fail(Errc::malformed_infon, "polarity must be 0 or 1");
    polarity = p == 1 ? Polarity::holds : Polarity::does_not_hold;
  }
  std::vector<ArgSlot> args;
  if (j.contains("args"))
    for (const auto& a : j["args"]) args.push_back(slot_from_json(a));
  std::vector<PropertyTriple> props;
  if (j.contains("properties"))
    for (const auto& p : j["properties"]) props.push_back(property_from_json(p));
  std::vector<Infon> members;
  if (j.contains("members"))
    for (const auto& m : j["members"]) members.push_back(infon_from_json(m));

  Infon out = relation.empty()
                  ? [&] {
                      if (!args.empty() || !props.empty())
                        fail(Errc::malformed_infon, "a grouping has empty relation and args");
                      return Infon::grouping(std::move(members));
                    }()
                  : Infon::predication(std::move(relation), std::move(args), polarity)
                        .with_properties(std::move(props))
                        .with_members(std::move(members));

  // Compatibility path for hand-written inputs: a populated anchors map is
  // applied by substitution.
  if (j.contains("anchors") && j["anchors"].is_object()) {
    for (const auto& [name, oj] : j["anchors"].items()) {
      auto [rewritten, hits] = detail::substitute_parameter(out, name, object_from_json(oj));
      if (hits == 0) fail(Errc::unknown_parameter, "anchored parameter '" + name + "' not in args");
      out = rewritten;
    }
  }
  return out;
}

inline Infon parse_record_line(const std::string& line) {
  try {
    return infon_from_json(Json::parse(line));
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed_infon, std::string("bad record: ") + e.what());
  }
}

}  // namespace piidb
