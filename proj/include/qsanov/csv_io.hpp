#pragma once

#include <string>

#include "qsanov/operator_core.hpp"

namespace qsanov {

// Dense complex matrix interchange: one line per matrix row, entries are
// "re,im" pairs separated by semicolons.
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Mat& m);

std::string format_matrix_csv(const Mat& m);
Mat parse_matrix_csv(const std::string& text, const std::string& origin = "<string>");

}  // namespace qsanov
