#include "dds/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace dds {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view field, long row, long col) {
  field = trim(field);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError("cannot parse '" + std::string(field) + "' as a number", row, col);
  if (!std::isfinite(v)) throw ParseError("non-finite value", row, col);
  return v;
}

}  // namespace

void standardize_columns(Matrix& features) {
  if (features.rows() == 0) return;
  const double n = static_cast<double>(features.rows());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    auto col = features.col(j);
    const double mu = col.mean();
    col.array() -= mu;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) col /= sd;
  }
}

Dataset parse_csv_dataset(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  long row = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line =
        trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++row;
    if (line.empty()) continue;
    std::vector<double> values;
    long col = 0;
    std::size_t start = 0;
    while (true) {
      ++col;
      const auto comma = line.find(',', start);
      values.push_back(parse_number(line.substr(start, comma - start), row, col));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (values.size() < 2) throw ParseError("expected a label and at least one feature", row, 1);
    if (values[0] != 0.0 && values[0] != 1.0)
      throw ParseError("label must be 0 or 1", row, 1);
    if (width == 0) width = values.size();
    if (values.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(values.size()),
                       row, static_cast<long>(values.size()));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error("dataset is empty");

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  data.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.labels[static_cast<Eigen::Index>(i)] = rows[i][0];
    for (std::size_t j = 1; j < width; ++j)
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = rows[i][j];
  }
  standardize_columns(data.features);
  return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_dataset(buf.str());
}

}  // namespace dds
