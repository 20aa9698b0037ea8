#pragma once

#include <string>
#include <vector>

#include "wsca/errors.hpp"

namespace wsca {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  size_t column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(Err::SchemaMismatch, "missing CSV column: " + name);
  }
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

Csv read_csv(const std::string& path);

} // namespace wsca
