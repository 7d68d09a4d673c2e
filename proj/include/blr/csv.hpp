#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace blr::csv {

/// Shortest decimal text that round-trips to the same double.
std::string format(double value);

/// Split one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line);

/// Read every record of a file. Blank trailing lines are ignored; CR before LF is stripped.
std::vector<std::vector<std::string>> read_records(const std::filesystem::path& path);

/// Buffered writer producing one header plus rows. Fields needing quotes are quoted.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

void write_file(const std::filesystem::path& path,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

}  // namespace blr::csv
