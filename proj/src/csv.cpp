#include "geko/csv.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace geko {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

void write_matrix_csv(std::ostream& os, const Matrix& m,
                      const std::vector<std::string>& comments) {
  for (const auto& c : comments) os << "# " << c << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& comments) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_matrix_csv(f, m, comments);
  if (!f.good()) throw IoError("write failed for '" + path + "'");
}

Matrix read_matrix_csv(std::istream& is, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t cols = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    std::vector<double> row;
    for (auto field : split(sv, ',')) {
      bool ok = false;
      const double v = parse_double(trim(field), &ok);
      if (!ok) {
        throw IoError(name + ":" + std::to_string(lineno) + ": invalid number '" +
                      std::string(trim(field)) + "'");
      }
      row.push_back(v);
    }
    if (cols == 0) {
      cols = row.size();
    } else if (row.size() != cols) {
      throw IoError(name + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(cols) + " fields, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(name + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return read_matrix_csv(f, path);
}

std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream os;
  write_matrix_csv(os, m);
  return os.str();
}

Matrix matrix_from_csv(const std::string& text, const std::string& name) {
  std::istringstream is(text);
  return read_matrix_csv(is, name);
}

}  // namespace geko
