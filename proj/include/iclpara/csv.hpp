#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace iclpara::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based physical line where the record starts
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
// Accepts LF or CRLF record separators. Throws InputError on an unterminated quote.
std::vector<Row> read(std::istream& in);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

}  // namespace iclpara::csv
