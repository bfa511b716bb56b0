#pragma once

// Binary field snapshots.
//
//   bytes 0-7   "MCSVSNAP"
//   uint32      format version (1)
//   uint32      N
//   uint32      metadata length M in bytes
//   M bytes     "key=value\n" lines (UTF-8)
//   N*N float64 values, row-major (index i*N + j is the sample at (x_i, y_j))
//
// Integers and floats are little-endian. The metadata carries the field name
// and everything needed to rebuild the problem the field belongs to.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcsv/solver.hpp"

namespace mcsv {

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct Snapshot {
  std::string field;
  GridSpec grid;
  std::map<std::string, std::string> meta;  ///< every key except "field"
  ScalarField data;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

/// Key/value description of a problem; values printed with 17 significant
/// digits so that decode_problem reproduces it exactly.
Metadata encode_problem(const ProblemSpec& spec);
/// Inverse of encode_problem. Throws SnapshotError on missing or bad keys.
ProblemSpec decode_problem(const std::map<std::string, std::string>& meta);

void write_snapshot(const std::string& path, const std::string& field, const ScalarField& data,
                    const Metadata& meta);
/// Throws SnapshotError on unreadable or malformed files.
Snapshot read_snapshot(const std::string& path);

}  // namespace mcsv
