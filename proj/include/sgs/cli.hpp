#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sgs::cli {

// Parses flags into a RunConfig and runs it. args excludes the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgs::cli
