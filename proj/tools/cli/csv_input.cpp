#include "cli/csv_input.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "recall/errors.hpp"
#include "recall/inference.hpp"

namespace recall::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name, const char* role) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw MissingColumn(std::string(role) + " column '" + name +
                        "' is not in the header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset ingest_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open input file '" + path + "'");
  return ingest_csv(in, roles);
}

Dataset ingest_csv(std::istream& in, const ColumnRoles& roles) {
  std::string line;
  while (std::getline(in, line) && blank(line)) {
  }
  if (blank(line)) throw EmptyFile("input has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split(line);
  std::set<std::string> seen;
  for (const auto& name : header) {
    if (name.empty()) throw MissingColumn("header has an empty column name");
    if (!seen.insert(name).second) {
      throw MissingColumn("column name '" + name + "' appears more than once");
    }
  }
  const auto y_col = find_column(header, roles.outcome, "outcome");
  const auto z_col = find_column(header, roles.exposure, "exposure");
  if (y_col == z_col) throw MissingColumn("outcome and exposure name the same column");

  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (roles.covariates.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j != y_col && j != z_col) {
        x_cols.push_back(j);
        names.push_back(header[j]);
      }
    }
  } else {
    for (const auto& name : roles.covariates) {
      const auto j = find_column(header, name, "covariate");
      if (j == y_col || j == z_col) {
        throw MissingColumn("column '" + name + "' cannot be both a covariate and " +
                            "the outcome or exposure");
      }
      if (std::find(x_cols.begin(), x_cols.end(), j) != x_cols.end()) {
        throw MissingColumn("covariate '" + name + "' is listed twice");
      }
      x_cols.push_back(j);
      names.push_back(name);
    }
  }

  std::vector<std::uint8_t> y, z;
  std::vector<double> x;
  std::size_t row = 0;
  auto binary = [&](const std::string& cell, const std::string& column) {
    if (cell == "0") return std::uint8_t{0};
    if (cell == "1") return std::uint8_t{1};
    throw NonBinaryValue("row " + std::to_string(row) + ", column '" + column +
                         "': expected 0 or 1, got '" + cell + "'");
  };
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InvalidData("row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    y.push_back(binary(cells[y_col], header[y_col]));
    z.push_back(binary(cells[z_col], header[z_col]));
    for (auto j : x_cols) {
      const auto& cell = cells[j];
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw InvalidData("row " + std::to_string(row) + ", column '" + header[j] +
                          "': '" + cell + "' is not a finite number");
      }
      x.push_back(v);
    }
  }
  if (row == 0) throw EmptyFile("input has a header but no data rows");

  const auto n = static_cast<Eigen::Index>(row);
  const auto d = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd covariates(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      covariates(i, j) = x[static_cast<std::size_t>(i * d + j)];
    }
  }
  return Dataset(std::move(covariates), std::move(y), std::move(z), std::move(names));
}

void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::string& outcome, const std::string& exposure) {
  out << outcome << ',' << exposure;
  for (const auto& name : data.covariate_names()) out << ',' << name;
  out << '\n';
  const auto& x = data.covariates();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << int(data.outcome()[i]) << ',' << int(data.exposure_star()[i]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out << ',' << format_number(x(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

}  // namespace recall::cli
