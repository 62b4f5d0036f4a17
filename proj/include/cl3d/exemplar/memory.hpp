#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cl3d/core/point_cloud.hpp"
#include "cl3d/exemplar/selection.hpp"

namespace cl3d {

// Rehearsal memory with a fixed budget of K exemplars per class. Stores the
// original (unaligned) samples.
class ExemplarMemory {
 public:
  explicit ExemplarMemory(int per_class = 10);

  // Throws DataError if the class is already stored or more than K samples
  // are given.
  void add_class(int label, std::vector<LabeledSample> exemplars);

  bool contains(int label) const { return classes_.count(label) > 0; }
  const std::vector<LabeledSample>& exemplars(int label) const;
  std::vector<int> classes() const;
  std::size_t size() const;
  int per_class() const { return per_class_; }

  // Every stored sample, ordered by class label then selection order.
  std::vector<const LabeledSample*> all() const;

 private:
  int per_class_;
  std::map<int, std::vector<LabeledSample>> classes_;
};

// Per-class entry of the exemplar report.
struct ExemplarRecord {
  std::string class_name;
  std::string mode;
  std::vector<std::string> exemplar_ids;
  std::vector<int> cluster_sizes;
  std::string reference_id;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const ExemplarRecord& record);
// {"<class>": {mode, exemplar_ids, cluster_sizes, reference_id, seed}, ...}
nlohmann::json exemplar_report(const std::vector<ExemplarRecord>& records);

}  // namespace cl3d
