#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix::detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

// Parses one numeric cell; `where` names the file location for errors.
inline double parse_cell(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    // from_chars does not accept "inf"/"nan" spellings everywhere; we only
    // ever need finite numbers in CSV inputs, so reject anything unparsed.
    throw std::runtime_error(where + ": non-numeric cell '" + t + "'");
  }
  return value;
}

}  // namespace unmix::detail
