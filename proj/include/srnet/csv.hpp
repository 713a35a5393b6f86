#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "srnet/cgp.hpp"
#include "srnet/errors.hpp"
#include "srnet/matrix.hpp"
#include "srnet/mlp.hpp"

namespace srnet {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Numeric CSV with a header row.
inline CsvTable read_csv(std::istream& is, const std::string& origin = "csv") {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw DataError(origin + ": missing header row");
  t.header = split_csv_line(line);
  std::vector<double> data;
  std::size_t rows = 0, lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " columns, found " + std::to_string(cells.size()));
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        data.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      }
    }
    ++rows;
  }
  t.values = Matrix(rows, t.header.size(), std::move(data));
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return read_csv(is, path);
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header, const Matrix& values) {
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << "\n";
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) os << (c ? "," : "") << format_number(values(r, c));
    os << "\n";
  }
}

/// Feature columns followed by `n_targets` target columns. For classification the single
/// target column holds integer class ids, expanded here to one-hot rows.
inline Dataset dataset_from_table(const CsvTable& t, bool classification, std::size_t n_targets = 1,
                                  std::size_t n_classes = 0) {
  if (classification) n_targets = 1;
  if (t.header.size() <= n_targets) throw DataError("dataset needs at least one feature column");
  const std::size_t d = t.header.size() - n_targets;
  Dataset ds;
  ds.feature_names.assign(t.header.begin(), t.header.begin() + static_cast<std::ptrdiff_t>(d));
  ds.X = Matrix(t.values.rows(), d);
  for (std::size_t r = 0; r < t.values.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) ds.X(r, c) = t.values(r, c);
  if (!classification) {
    ds.Y = Matrix(t.values.rows(), n_targets);
    for (std::size_t r = 0; r < t.values.rows(); ++r)
      for (std::size_t c = 0; c < n_targets; ++c) ds.Y(r, c) = t.values(r, d + c);
    return ds;
  }
  std::vector<std::size_t> labels;
  std::size_t max_label = 0;
  for (std::size_t r = 0; r < t.values.rows(); ++r) {
    const double v = t.values(r, d);
    if (v < 0.0 || v != std::floor(v)) throw DataError("class id on row " + std::to_string(r + 2) + " is not a non-negative integer");
    labels.push_back(static_cast<std::size_t>(v));
    max_label = std::max(max_label, labels.back());
  }
  if (n_classes == 0) n_classes = std::max<std::size_t>(2, max_label + 1);
  if (max_label >= n_classes) throw DataError("class id exceeds class count");
  ds.Y = Matrix(labels.size(), n_classes, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) ds.Y(r, labels[r]) = 1.0;
  return ds;
}

inline Dataset read_dataset(const std::string& path, bool classification, std::size_t n_targets = 1,
                            std::size_t n_classes = 0) {
  return dataset_from_table(read_csv(path), classification, n_targets, n_classes);
}

inline void write_dataset(std::ostream& os, const Dataset& d, bool classification) {
  std::vector<std::string> header = d.feature_names;
  if (header.size() != d.X.cols()) header = indexed_names("x", d.X.cols());
  const std::size_t ny = classification ? 1 : d.Y.cols();
  for (std::size_t c = 0; c < ny; ++c) header.push_back(ny == 1 ? "y" : "y" + std::to_string(c));
  Matrix all(d.size(), d.X.cols() + ny);
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t c = 0; c < d.X.cols(); ++c) all(r, c) = d.X(r, c);
    if (classification) {
      auto row = d.Y.row(r);
      all(r, d.X.cols()) = static_cast<double>(std::max_element(row.begin(), row.end()) - row.begin());
    } else {
      for (std::size_t c = 0; c < ny; ++c) all(r, d.X.cols() + c) = d.Y(r, c);
    }
  }
  write_csv(os, header, all);
}

}  // namespace srnet
