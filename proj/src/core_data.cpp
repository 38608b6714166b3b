#include "gapdeck/core_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "gapdeck/errors.hpp"

namespace gapdeck {

Outcome outcome(const SeekerRecord& record) { return Outcome{std::log(1000.0 * record.desired_wage)}; }

std::size_t IngestReport::rows_dropped() const {
  std::size_t total = 0;
  for (const auto& [reason, count] : drops) total += count;
  return total;
}

std::size_t IngestReport::drop_count(const std::string& reason) const {
  const auto it = drops.find(reason);
  return it == drops.end() ? 0 : it->second;
}

namespace csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
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
  fields.push_back(std::move(field));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace csv

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_gender(std::string_view s) {
  s = trim(s);
  if (s == "F" || s == "f" || s == "1") return 1;
  if (s == "M" || s == "m" || s == "0") return 0;
  return std::nullopt;
}

class Table {
 public:
  Table(std::istream& in, std::string_view source) : in_(in), source_(source) {
    std::string header;
    if (!std::getline(in_, header)) throw DataError(source_ + ": missing header");
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    const auto names = csv::split_line(header);
    for (std::size_t i = 0; i < names.size(); ++i) index_[std::string(trim(names[i]))] = i;
    width_ = names.size();
  }

  std::size_t column(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw DataError(source_ + ": missing mandatory column '" + name + "'");
    return it->second;
  }

  /// Next non-blank row; false at end of input.
  bool next(std::vector<std::string>& row) {
    std::string line;
    while (std::getline(in_, line)) {
      if (trim(line).empty() || line == "\r") continue;
      row = csv::split_line(line);
      return true;
    }
    return false;
  }

  std::size_t width() const { return width_; }

 private:
  std::istream& in_;
  std::string source_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

}  // namespace

Loaded<SeekerRecord> parse_seekers(std::istream& in, const SeekerSchema& schema, std::string_view source) {
  Table table(in, source);
  const std::size_t c_id = table.column(schema.id);
  const std::size_t c_gender = table.column(schema.gender);
  const std::size_t c_age = table.column(schema.age);
  const std::size_t c_month = table.column(schema.month);
  const std::size_t c_region = table.column(schema.region);
  const std::size_t c_occ = table.column(schema.occupation);
  const std::size_t c_wage = table.column(schema.desired_wage);

  Loaded<SeekerRecord> out;
  out.report.source = std::string(source);
  std::vector<std::string> row;
  while (table.next(row)) {
    ++out.report.rows_read;
    auto drop = [&](const char* reason) { ++out.report.drops[reason]; };
    if (row.size() != table.width()) {
      drop("field_count");
      continue;
    }
    SeekerRecord r;
    r.id = std::string(trim(row[c_id]));
    const auto gender = parse_gender(row[c_gender]);
    if (!gender) { drop("gender"); continue; }
    const auto age = parse_int(row[c_age]);
    if (!age || *age < 15) { drop("age"); continue; }
    const auto month = parse_int(row[c_month]);
    if (!month || *month < 1 || *month > 12) { drop("month"); continue; }
    const auto region = parse_int(row[c_region]);
    if (!region || *region < 1 || *region > 47) { drop("region"); continue; }
    const auto wage = parse_double(row[c_wage]);
    if (!wage || !(*wage > 0)) { drop("desired_wage"); continue; }
    const auto occ = trim(row[c_occ]);
    if (occ.empty()) {
      if (schema.drop_missing_occupation) { drop("occupation"); continue; }
    } else {
      r.occupation = std::string(occ);
    }
    r.gender = *gender;
    r.age = *age;
    r.month = *month;
    r.region = *region;
    r.desired_wage = *wage;
    out.records.push_back(std::move(r));
  }
  out.report.rows_kept = out.records.size();
  if (out.records.empty()) throw DataError(std::string(source) + ": zero valid rows");
  return out;
}

Loaded<PostingRecord> parse_postings(std::istream& in, const PostingSchema& schema, std::string_view source) {
  Table table(in, source);
  const std::size_t c_id = table.column(schema.id);
  const std::size_t c_region = table.column(schema.region);
  const std::size_t c_occ = table.column(schema.occupation);
  const std::size_t c_lower = table.column(schema.wage_lower);
  const std::size_t c_upper = table.column(schema.wage_upper);

  Loaded<PostingRecord> out;
  out.report.source = std::string(source);
  std::vector<std::string> row;
  while (table.next(row)) {
    ++out.report.rows_read;
    auto drop = [&](const char* reason) { ++out.report.drops[reason]; };
    if (row.size() != table.width()) {
      drop("field_count");
      continue;
    }
    PostingRecord r;
    r.id = std::string(trim(row[c_id]));
    const auto region = parse_int(row[c_region]);
    if (!region || *region < 1 || *region > 47) { drop("region"); continue; }
    const auto occ = trim(row[c_occ]);
    if (occ.empty()) { drop("occupation"); continue; }
    const auto lower = parse_double(row[c_lower]);
    if (!lower || !(*lower > 0)) { drop("wage_lower"); continue; }
    const auto upper = parse_double(row[c_upper]);
    if (!upper) { drop("wage_upper"); continue; }
    if (*lower > *upper) { drop("wage_order"); continue; }
    r.region = *region;
    r.occupation = std::string(occ);
    r.wage_lower = *lower;
    r.wage_upper = *upper;
    out.records.push_back(std::move(r));
  }
  out.report.rows_kept = out.records.size();
  if (out.records.empty()) throw DataError(std::string(source) + ": zero valid rows");
  return out;
}

Loaded<SeekerRecord> load_seekers(const std::filesystem::path& path, const SeekerSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read seekers file: " + path.string());
  return parse_seekers(in, schema, path.string());
}

Loaded<PostingRecord> load_postings(const std::filesystem::path& path, const PostingSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read postings file: " + path.string());
  return parse_postings(in, schema, path.string());
}

void write_seekers(std::ostream& out, const std::vector<SeekerRecord>& records) {
  out << "id,gender,age,month,region,occupation,desired_wage\n";
  for (const auto& r : records) {
    out << csv::escape(r.id) << ',' << r.gender << ',' << r.age << ',' << r.month << ',' << r.region << ','
        << (r.occupation ? csv::escape(*r.occupation) : std::string()) << ','
        << csv::format_double(r.desired_wage) << '\n';
  }
}

void write_postings(std::ostream& out, const std::vector<PostingRecord>& records) {
  out << "id,region,occupation,wage_lower,wage_upper\n";
  for (const auto& r : records) {
    out << csv::escape(r.id) << ',' << r.region << ',' << csv::escape(r.occupation) << ','
        << csv::format_double(r.wage_lower) << ',' << csv::format_double(r.wage_upper) << '\n';
  }
}

}  // namespace gapdeck
