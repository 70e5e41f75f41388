#pragma once

#include <string>
#include <vector>

#include "deci/types.hpp"

namespace deci {

// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

// Plain numeric CSV, no header, comma separated, one row per line.
void write_csv(const std::string& path, const RealMatrix& m);
RealMatrix read_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace deci
