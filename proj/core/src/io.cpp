#include "truncgraph/io.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "truncgraph/errors.hpp"

namespace truncgraph {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
  throw ValidationError(fmt::format("{}:{}: {}", source, line, what));
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
};

Table parse_table(std::istream& in, std::string_view source) {
  Table table;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (first_content) {
      first_content = false;
      bool all_text = true;
      for (auto f : fields) all_text = all_text && !parse_double(f).has_value();
      if (all_text) {
        for (auto f : fields) table.header.emplace_back(f);
        width = fields.size();
        continue;
      }
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      fail(source, line_no, fmt::format("expected {} fields, found {}", width, fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v) fail(source, line_no, fmt::format("field {} ('{}') is not a number", c + 1, fields[c]));
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (table.rows.empty()) fail(source, line_no, "no numeric rows");
  return table;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

Eigen::MatrixXd parse_matrix_csv(std::istream& in, std::string_view source) {
  const Table table = parse_table(in, source);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()),
                    static_cast<Eigen::Index>(table.rows.front().size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < table.rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][j];
    }
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_matrix_csv(in, path.string());
}

TruncationScheme parse_scheme_csv(std::istream& in, std::string_view source) {
  const Table table = parse_table(in, source);
  if (table.rows.front().size() != 3) {
    fail(source, table.line_numbers.front(), "scheme rows need exactly 3 fields: index,a,b");
  }
  const std::size_t p = table.rows.size();
  std::vector<double> lower(p), upper(p);
  std::vector<bool> seen(p, false);
  for (std::size_t r = 0; r < p; ++r) {
    const auto& row = table.rows[r];
    const double idx = row[0];
    if (idx < 1 || idx > static_cast<double>(p) || idx != static_cast<double>(static_cast<std::size_t>(idx))) {
      fail(source, table.line_numbers[r], fmt::format("index {} is not in 1..{}", idx, p));
    }
    const auto j = static_cast<std::size_t>(idx) - 1;
    if (seen[j]) fail(source, table.line_numbers[r], fmt::format("duplicate index {}", j + 1));
    if (!(row[1] < row[2])) {
      fail(source, table.line_numbers[r], fmt::format("need a < b, got a = {}, b = {}", row[1], row[2]));
    }
    seen[j] = true;
    lower[j] = row[1];
    upper[j] = row[2];
  }
  return TruncationScheme(std::move(lower), std::move(upper));
}

TruncationScheme read_scheme_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_scheme_csv(in, path.string());
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << fmt::format("{}", m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_output(path);
  write_matrix_csv(out, m);
}

void write_scheme_csv(std::ostream& out, const TruncationScheme& scheme) {
  out << "index,a,b\n";
  for (std::size_t j = 0; j < scheme.dimension(); ++j) {
    out << fmt::format("{},{},{}\n", j + 1, scheme.lower(j), scheme.upper(j));
  }
}

void write_scheme_csv(const std::filesystem::path& path, const TruncationScheme& scheme) {
  auto out = open_output(path);
  write_scheme_csv(out, scheme);
}

}  // namespace truncgraph
