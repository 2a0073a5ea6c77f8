#include "emuval/csv.hpp"

#include "emuval/errors.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace emuval {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_number(std::string_view field, double& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Sample parse_sample_csv(std::istream& in, std::string_view source) {
  std::string line;
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  bool first_content = true;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view);
    row.clear();
    bool numeric = true;
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first_content) {  // header
        first_content = false;
        dim = fields.size();
        continue;
      }
      throw InvalidInput(std::string(source) + ":" + std::to_string(line_no) +
                         ": non-numeric field");
    }
    if (dim == 0) dim = row.size();
    if (row.size() != dim) {
      throw InvalidInput(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(dim) + " columns, found " +
                         std::to_string(row.size()));
    }
    first_content = false;
    values.insert(values.end(), row.begin(), row.end());
  }
  if (values.empty()) throw InvalidInput(std::string(source) + ": no data rows");
  try {
    return Sample(dim, std::move(values));
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(source) + ": " + e.what());
  }
}

Sample read_sample_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return parse_sample_csv(in, path.string());
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_sample_csv(std::ostream& out, const Sample& sample) {
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto r = sample.row(i);
    for (std::size_t d = 0; d < r.size(); ++d) {
      if (d > 0) out << ',';
      out << format_double(r[d]);
    }
    out << '\n';
  }
}

void write_sample_csv(const std::filesystem::path& path, const Sample& sample) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_sample_csv(out, sample);
}

}  // namespace emuval
