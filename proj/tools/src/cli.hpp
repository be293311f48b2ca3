#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agdc::cli {

/// Runs one command line (without the program name). Returns the process
/// exit status; usage errors and module errors are reported on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace agdc::cli
