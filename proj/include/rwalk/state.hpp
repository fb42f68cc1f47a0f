#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwalk {

// Lattice point in Z_+^d. Coordinates are 0-based in code; files and
// diagnostics use 1-based indices.
using WalkState = std::vector<long long>;

// A face is the set of strictly positive coordinates, kept as a bitmask.
// Dimensions beyond 64 are rejected at kernel load.
using FaceMask = std::uint64_t;

inline FaceMask face_of(const WalkState& q) {
  FaceMask m = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0) m |= (FaceMask{1} << i);
  return m;
}

inline bool face_has(FaceMask m, int coord) { return (m >> coord) & 1U; }

inline long long l1_norm(const WalkState& q) {
  long long s = 0;
  for (long long c : q) s += c;
  return s;
}

inline std::string state_to_string(const WalkState& q) {
  std::string s = "(";
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(q[i]);
  }
  s += ")";
  return s;
}

inline std::string face_to_string(FaceMask m, int dimension) {
  std::string s = "{";
  bool first = true;
  for (int i = 0; i < dimension; ++i) {
    if (face_has(m, i)) {
      if (!first) s += ",";
      s += std::to_string(i + 1);  // 1-based for humans and files
      first = false;
    }
  }
  s += "}";
  return s;
}

inline WalkState origin_state(int dimension) {
  return WalkState(static_cast<std::size_t>(dimension), 0);
}

}  // namespace rwalk
