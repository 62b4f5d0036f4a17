#include "cl3d/exemplar/memory.hpp"

#include "cl3d/error.hpp"

namespace cl3d {

ExemplarMemory::ExemplarMemory(int per_class) : per_class_(per_class) {
  if (per_class < 1) throw ConfigError("memory: exemplars per class must be >= 1");
}

void ExemplarMemory::add_class(int label, std::vector<LabeledSample> exemplars) {
  if (contains(label)) throw DataError("memory: class " + std::to_string(label) + " is already stored");
  if (exemplars.size() > static_cast<std::size_t>(per_class_))
    throw DataError("memory: " + std::to_string(exemplars.size()) + " exemplars exceed the budget of " +
                    std::to_string(per_class_) + " per class");
  for (const auto& s : exemplars)
    if (s.label != label) throw DataError("memory: exemplar '" + s.id() + "' belongs to another class");
  classes_.emplace(label, std::move(exemplars));
}

const std::vector<LabeledSample>& ExemplarMemory::exemplars(int label) const {
  auto it = classes_.find(label);
  if (it == classes_.end()) throw DataError("memory: class " + std::to_string(label) + " is not stored");
  return it->second;
}

std::vector<int> ExemplarMemory::classes() const {
  std::vector<int> out;
  for (const auto& [label, _] : classes_) out.push_back(label);
  return out;
}

std::size_t ExemplarMemory::size() const {
  std::size_t total = 0;
  for (const auto& [_, samples] : classes_) total += samples.size();
  return total;
}

std::vector<const LabeledSample*> ExemplarMemory::all() const {
  std::vector<const LabeledSample*> out;
  for (const auto& [_, samples] : classes_)
    for (const auto& s : samples) out.push_back(&s);
  return out;
}

nlohmann::json to_json(const ExemplarRecord& record) {
  return {{"mode", record.mode},
          {"exemplar_ids", record.exemplar_ids},
          {"cluster_sizes", record.cluster_sizes},
          {"reference_id", record.reference_id},
          {"seed", record.seed}};
}

nlohmann::json exemplar_report(const std::vector<ExemplarRecord>& records) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : records) out[r.class_name] = to_json(r);
  return out;
}

}  // namespace cl3d
