// Walkthrough: a family-case database where each person's record lives in
// their own sphere, the compound case row exists only as linked atoms, and
// the mother's record can be hidden without touching anyone else's data.
#include <filesystem>
#include <iostream>

#include "piidb/piidb.hpp"

using namespace piidb;

namespace {

Identifier named_person(const std::string& key, const std::string& name) {
  return Identifier({Descriptor("name", Scalar::text(name), Nature::natural)}, key);
}

void show(Store& store, const std::string& sphere, const PolicyContext& ctx) {
  QueryResult res = store.query(sphere, nullptr, ctx);
  std::cout << "  query " << sphere << " -> " << res.count() << " record(s)\n";
  for (const auto& r : res.records) std::cout << "    " << render_text(r) << "\n";
}

}  // namespace

int main() {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "piidb-demo-case";
  std::filesystem::remove_all(dir);
  Store::init(dir);
  Store store(dir);

  Identifier father = named_person("father", "Adam");
  Identifier mother = named_person("mother", "Alice");
  Identifier child = named_person("child", "John");
  std::string pf = store.register_proprietor(father);
  std::string pm = store.register_proprietor(mother);
  std::string pc = store.register_proprietor(child);
  std::cout << "registered " << pf << ", " << pm << ", " << pc << "\n";

  Infon kase = make_infon("case", {Scalar::number(17), ObjectRef::person(father),
                                   ObjectRef::person(mother), ObjectRef::person(child)});
  IngestReport rep = store.ingest(kase);
  std::cout << "ingested '" << render_text(kase) << "' as " << rep.placements.size()
            << " atoms across spheres, " << rep.links.size() << " link\n";

  PolicyContext clerk{"clerk", "casework", {pf, pm, pc}};
  std::cout << "\nwith all spheres granted:\n";
  show(store, pf, clerk);
  show(store, pm, clerk);

  std::cout << "\nhiding the mother's record existence:\n";
  store.add_rule({"hide-mother", Selector::by_sphere(pm), ProtectionScope::existence_hide});
  show(store, pm, clerk);
  show(store, pf, clerk);

  std::cout << "\nanonymized export of the father's sphere:\n";
  for (const auto& s : store.export_anonymized(pf)) std::cout << "  " << render_text(s) << "\n";

  std::filesystem::remove_all(dir);
  return 0;
}
