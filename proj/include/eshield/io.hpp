#pragma once

#include <Eigen/Dense>
#include <string>

namespace eshield::io {

// Binary matrix container: "ESMX" magic, u32 format version, u64 rows/cols
// (all little-endian), then row-major f64 payload. Bit-exact round trip.
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

void save_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::string& path);

// CSV with a header row; values parsed as doubles.
void save_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_csv(const std::string& path);

// Loads ESMX or CSV depending on the magic bytes.
Eigen::MatrixXd load_matrix_any(const std::string& path);

// Temp-file write plus rename.
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace eshield::io
