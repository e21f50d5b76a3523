#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace phishaudit::csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: comma-delimited, double-quoted fields may contain commas,
// quotes ("") and newlines. Accepts both LF and CRLF line endings.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Returns false at end of input.
  bool next(Record& record);

 private:
  std::istream& in_;
};

std::vector<Record> read_file(const std::string& path);

std::string escape(std::string_view field);
void write_record(std::ostream& out, const Record& record);

// Shortest text that parses back to the same double ("%.17g" fallback).
std::string format_double(double value);

}  // namespace phishaudit::csv
