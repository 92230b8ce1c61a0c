#pragma once

// Plain data shared by the sampler and the extreme-value statistics.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "membrane/lattice.hpp"

namespace membrane {

struct SampleSummary {
  std::uint64_t index = 0;
  double max = 0.0;
  lattice::Site argmax{};  // lexicographically first maximizer
  double z = 0.0;          // Z_N
};

struct SampleBatch {
  lattice::GridSpec grid{1};
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  std::vector<SampleSummary> samples;
  std::vector<lattice::Field> fields;  // empty unless requested
  int max_iterations = 0;
  double worst_residual = 0.0;

  std::size_t count() const { return samples.size(); }
};

inline std::string summary_csv(const SampleBatch& batch) {
  std::ostringstream os;
  os.precision(17);
  os << "index,M,argmax_0,argmax_1,argmax_2,argmax_3,Z_N\n";
  for (const auto& s : batch.samples)
    os << s.index << ',' << s.max << ',' << s.argmax[0] << ',' << s.argmax[1] << ',' << s.argmax[2] << ','
       << s.argmax[3] << ',' << s.z << '\n';
  return os.str();
}

}  // namespace membrane
