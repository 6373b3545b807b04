#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semslam/sim/simulator.hpp"

namespace semslam {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetFileName = "dataset.ndjson";

/// Newline-delimited JSON, one record per line, header first.
void write_dataset_stream(const Dataset& ds, std::ostream& out);

/// Throws FormatError with the 1-based line number. Cloud contents are not
/// loaded here; see read_dataset.
Dataset read_dataset_stream(std::istream& in);

/// Writes dir/dataset.ndjson and every cloud file. Creates dir.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Reads dir/dataset.ndjson and the cloud files it references.
Dataset read_dataset(const std::filesystem::path& dir);

/// One "x y z" line per point.
void write_cloud(const std::vector<Eigen::Vector3d>& cloud, const std::filesystem::path& file);
std::vector<Eigen::Vector3d> read_cloud(const std::filesystem::path& file);

}  // namespace semslam
