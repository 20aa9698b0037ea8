#include "wsca/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace wsca {

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), Err::BadArgument, "cannot open " + path + " for writing");
  for (size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << "\n";
  char buf[64];
  for (const auto& row : rows) {
    require(row.size() == header.size(), Err::DimMismatch, "csv row width != header width");
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      f << (i ? "," : "") << buf;
    }
    f << "\n";
  }
}

Csv read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Err::BadArgument, "cannot open " + path);
  Csv csv;
  std::string line;
  if (!std::getline(f, line)) fail(Err::SchemaMismatch, "empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) csv.header.push_back(cell);
  require(!csv.header.empty(), Err::SchemaMismatch, "CSV has no header: " + path);
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(Err::SchemaMismatch, "non-numeric CSV cell: " + cell);
      }
    }
    require(row.size() == csv.header.size(), Err::SchemaMismatch,
            "CSV row width differs from header");
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

} // namespace wsca
