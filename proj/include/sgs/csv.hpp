#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sgs::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader. Accepts LF or CRLF line endings and a leading UTF-8 BOM.
// Blank lines are skipped. Throws sgs::InvalidInput on an unterminated quote.
std::vector<Row> parse(std::string_view text);
std::vector<Row> read_file(const std::string& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace sgs::csv
