#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gapdeck {

/// One job seeker. gender is the indicator D (1 = female, 0 = male);
/// desired_wage is the reported minimum monthly wage in units of 1,000 yen.
struct SeekerRecord {
  std::string id;
  int gender = 0;
  int age = 0;
  int month = 1;
  int region = 1;
  std::optional<std::string> occupation;
  double desired_wage = 0.0;
};

/// One vacancy. Wages are monthly amounts in yen.
struct PostingRecord {
  std::string id;
  int region = 1;
  std::string occupation;
  double wage_lower = 0.0;
  double wage_upper = 0.0;
};

/// Log desired monthly wage in yen.
struct Outcome {
  double y = 0.0;
};

Outcome outcome(const SeekerRecord& record);

/// Header names for each logical seeker column.
struct SeekerSchema {
  std::string id = "id";
  std::string gender = "gender";
  std::string age = "age";
  std::string month = "month";
  std::string region = "region";
  std::string occupation = "occupation";
  std::string desired_wage = "desired_wage";
  bool drop_missing_occupation = false;
};

struct PostingSchema {
  std::string id = "id";
  std::string region = "region";
  std::string occupation = "occupation";
  std::string wage_lower = "wage_lower";
  std::string wage_upper = "wage_upper";
};

struct IngestReport {
  std::string source;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  /// Drop reason (usually the offending column) -> count. Each dropped row
  /// is charged to the first check it fails.
  std::map<std::string, std::size_t> drops;

  std::size_t rows_dropped() const;
  std::size_t drop_count(const std::string& reason) const;
};

template <typename Record>
struct Loaded {
  std::vector<Record> records;
  IngestReport report;
};

Loaded<SeekerRecord> parse_seekers(std::istream& in, const SeekerSchema& schema,
                                   std::string_view source = "<stream>");
Loaded<PostingRecord> parse_postings(std::istream& in, const PostingSchema& schema,
                                     std::string_view source = "<stream>");

Loaded<SeekerRecord> load_seekers(const std::filesystem::path& path, const SeekerSchema& schema = {});
Loaded<PostingRecord> load_postings(const std::filesystem::path& path, const PostingSchema& schema = {});

void write_seekers(std::ostream& out, const std::vector<SeekerRecord>& records);
void write_postings(std::ostream& out, const std::vector<PostingRecord>& records);

namespace csv {

/// Splits one comma-delimited line. Double-quoted fields may contain commas
/// and "" escapes. A trailing CR is ignored.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace csv

}  // namespace gapdeck
