#pragma once

#include <optional>
#include <string>
#include <vector>

namespace growthchart {

// One visit: age t in years, weight w in kg, optional height h in cm.
struct Measurement {
  double t = 0.0;
  double w = 0.0;
  std::optional<double> h;
};

struct Subject {
  std::string id;
  std::vector<Measurement> visits;  // strictly increasing in t
};

// Per-subject measurement sequences.  validate() enforces the invariants:
// t >= 0, w > 0, h > 0 when present, and strictly increasing visit times
// within each subject.
struct LongitudinalDataset {
  std::vector<Subject> subjects;

  // Throws std::invalid_argument naming the subject and visit on violation.
  void validate() const;

  std::size_t total_measurements() const;
  // Number of (j-1, j) transitions, sum over subjects of max(m_i - 1, 0).
  std::size_t total_transitions() const;
};

}  // namespace growthchart
