#pragma once

#include <string>

#include "xdiff/trajectory.hpp"

namespace xdiff {

/// Dataset file: line-delimited JSON records.
///   record 1: header (format version, task spec, config hash, split fraction)
///   record 2: normalizer sidecar (robot-derived statistics)
///   record 3+: one trajectory per line
/// Doubles are written with 17 significant digits so save/load round-trips
/// are exact.
inline constexpr int kDatasetFormatVersion = 1;

void save_dataset(const DemoDataset& ds, const std::string& path,
                  const std::string& config_hash = "");

/// Throws IoError naming the offending record index on malformed input.
DemoDataset load_dataset(const std::string& path, std::string* config_hash_out = nullptr);

}  // namespace xdiff
