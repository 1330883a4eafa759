#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "recall/core_model.hpp"

namespace recall::cli {

struct ColumnRoles {
  std::string outcome = "y";
  std::string exposure = "zstar";
  /// Empty means every remaining column, in file order.
  std::vector<std::string> covariates;
};

/// Reads a comma-separated file with a header row. Outcome and exposure
/// must be literal 0/1; covariates are parsed as reals. Throws
/// MissingColumn, NonBinaryValue (with the 1-based data row), EmptyFile or
/// InvalidData.
Dataset ingest_csv(const std::string& path, const ColumnRoles& roles);
Dataset ingest_csv(std::istream& in, const ColumnRoles& roles);

/// Writes y, zstar and the covariates with shortest round-trip numbers.
void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::string& outcome = "y",
                       const std::string& exposure = "zstar");

}  // namespace recall::cli
