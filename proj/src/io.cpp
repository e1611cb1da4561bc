#include "eshield/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "eshield/common.hpp"

namespace eshield::io {

namespace {
constexpr char kMagic[4] = {'E', 'S', 'M', 'X'};
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_matrix: cannot open " + tmp);
    out.write(kMagic, 4);
    const std::uint32_t version = kMatrixFormatVersion;
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
    if (!out) throw std::runtime_error("save_matrix: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("save_matrix: rename failed for " + path);
  }
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFileError("load_matrix: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CorruptFileError("load_matrix: bad magic in " + path);
  }
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kMatrixFormatVersion) {
    throw VersionMismatchError("load_matrix: unsupported format version in " + path);
  }
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32)) {
    throw CorruptFileError("load_matrix: bad header in " + path);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      if (!in) throw CorruptFileError("load_matrix: truncated payload in " + path);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return m;
}

void save_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out << (j ? ",c" : "c") << j;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

Eigen::MatrixXd load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptFileError("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw CorruptFileError("load_csv: empty file " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw CorruptFileError("load_csv: non-numeric cell '" + cell + "' in " + path);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw CorruptFileError("load_csv: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CorruptFileError("load_csv: no data rows in " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

Eigen::MatrixXd load_matrix_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw CorruptFileError("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kMagic, 4) == 0) return load_matrix(path);
  return load_csv(path);
}

void atomic_write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write_text: cannot open " + tmp);
    out << text;
    if (!out) throw std::runtime_error("atomic_write_text: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("atomic_write_text: rename failed for " + path);
  }
}

}  // namespace eshield::io
