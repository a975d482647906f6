#pragma once

// Plain-text exchange formats.
//
// Data / matrix files: CSV, one row per line, decimal-point reals, optional
// header line of non-numeric names. In data files a literal 0 marks a
// censored entry; an observation exactly equal to 0 is therefore always read
// as censored, which under a continuous latent model happens with
// probability zero.
//
// Scheme files: CSV with header `index,a,b`, one line per variable, index
// 1-based.

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include <Eigen/Dense>

#include "truncgraph/truncdist.hpp"

namespace truncgraph {

/// Throws ValidationError (with source name and line number) on ragged rows,
/// unparsable fields or an empty table.
Eigen::MatrixXd parse_matrix_csv(std::istream& in, std::string_view source);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

TruncationScheme parse_scheme_csv(std::istream& in, std::string_view source);
TruncationScheme read_scheme_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
void write_scheme_csv(std::ostream& out, const TruncationScheme& scheme);
void write_scheme_csv(const std::filesystem::path& path, const TruncationScheme& scheme);

}  // namespace truncgraph
