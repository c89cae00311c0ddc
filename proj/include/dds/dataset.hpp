#pragma once

#include "dds/types.hpp"

#include <filesystem>
#include <string_view>

namespace dds {

struct Dataset {
  Matrix features;  // n x d_features
  Vector labels;    // n, entries in {0, 1}

  Eigen::Index size() const { return labels.size(); }
  Eigen::Index n_features() const { return features.cols(); }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long col)
      : Error(what + " at row " + std::to_string(row) + ", column " + std::to_string(col)),
        row_(row),
        col_(col) {}
  long row() const { return row_; }
  long col() const { return col_; }

 private:
  long row_;
  long col_;
};

// Header-less CSV, label (0/1) in column 0, features after. Features are
// standardized per column; constant columns become zero.
Dataset parse_csv_dataset(std::string_view text);
Dataset load_csv_dataset(const std::filesystem::path& path);

void standardize_columns(Matrix& features);

}  // namespace dds
