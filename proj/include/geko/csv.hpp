#ifndef GEKO_CSV_HPP
#define GEKO_CSV_HPP

#include "geko/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace geko {

// Matrix CSV: one matrix row per line, comma separated, 17 significant
// digits, '.' decimal point regardless of locale. Lines starting with '#'
// are comments and are skipped on read.

void write_matrix_csv(std::ostream& os, const Matrix& m,
                      const std::vector<std::string>& comments = {});
void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& comments = {});

Matrix read_matrix_csv(std::istream& is, const std::string& name = "<stream>");
Matrix read_matrix_csv(const std::string& path);

std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(const std::string& text, const std::string& name = "<string>");

}  // namespace geko

#endif  // GEKO_CSV_HPP
