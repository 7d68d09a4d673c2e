#include "blr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "blr/common.hpp"

namespace blr::csv {

std::string format(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw data_error("data.load", "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::vector<std::vector<std::string>> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("data.load", "cannot open " + path.string());
  std::vector<std::vector<std::string>> records;
  std::string line;
  std::size_t blank_run = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++blank_run;
      continue;
    }
    if (blank_run > 0) throw data_error("data.load", "blank line inside " + path.string());
    records.push_back(split_record(line));
  }
  return records;
}

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char c : f) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    } else {
      out_ << f;
    }
  }
  out_ << '\n';
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream buf;
  Writer w(buf);
  w.row(header);
  for (const auto& r : rows) w.row(r);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("io.write", "cannot write " + path.string());
  out << buf.str();
}

}  // namespace blr::csv
