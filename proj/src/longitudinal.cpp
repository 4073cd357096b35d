#include "growthchart/longitudinal.hpp"

#include <stdexcept>

namespace growthchart {

void LongitudinalDataset::validate() const {
  for (const Subject& s : subjects) {
    for (std::size_t j = 0; j < s.visits.size(); ++j) {
      const Measurement& m = s.visits[j];
      if (!(m.t >= 0.0))
        throw std::invalid_argument("subject " + s.id + ", visit " + std::to_string(j + 1) +
                                    ": age must be >= 0");
      if (!(m.w > 0.0))
        throw std::invalid_argument("subject " + s.id + ", visit " + std::to_string(j + 1) +
                                    ": weight must be > 0");
      if (m.h && !(*m.h > 0.0))
        throw std::invalid_argument("subject " + s.id + ", visit " + std::to_string(j + 1) +
                                    ": height must be > 0 when present");
      if (j > 0 && !(m.t > s.visits[j - 1].t))
        throw std::invalid_argument("subject " + s.id + ", visit " + std::to_string(j + 1) +
                                    ": visit times must be strictly increasing");
    }
  }
}

std::size_t LongitudinalDataset::total_measurements() const {
  std::size_t n = 0;
  for (const Subject& s : subjects) n += s.visits.size();
  return n;
}

std::size_t LongitudinalDataset::total_transitions() const {
  std::size_t n = 0;
  for (const Subject& s : subjects)
    if (!s.visits.empty()) n += s.visits.size() - 1;
  return n;
}

}  // namespace growthchart
