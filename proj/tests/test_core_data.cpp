#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gapdeck/core_data.hpp"
#include "gapdeck/errors.hpp"

using namespace gapdeck;

namespace {

const char* kSeekerHeader = "id,gender,age,month,region,occupation,desired_wage\n";
const char* kPostingHeader = "id,region,occupation,wage_lower,wage_upper\n";

Loaded<SeekerRecord> seekers(const std::string& body, const SeekerSchema& schema = {}) {
  std::istringstream in(kSeekerHeader + body);
  return parse_seekers(in, schema);
}

Loaded<PostingRecord> postings(const std::string& body) {
  std::istringstream in(kPostingHeader + body);
  return parse_postings(in, {});
}

}  // namespace

TEST_CASE("seeker with zero desired wage is dropped and counted") {
  const auto got = seekers(
      "a,F,30,1,13,111,200\n"
      "b,M,40,2,13,112,250\n"
      "c,1,25,3,1,,180\n"
      "d,0,50,4,47,113,0\n");
  CHECK(got.records.size() == 3);
  CHECK(got.report.drop_count("desired_wage") == 1);
  CHECK(got.report.rows_read == 4);
  CHECK(got.report.rows_kept == 3);
}

TEST_CASE("empty occupation is kept as absent") {
  const auto got = seekers("a,F,30,1,13,,200\n");
  REQUIRE(got.records.size() == 1);
  CHECK_FALSE(got.records[0].occupation.has_value());
  CHECK(got.report.rows_dropped() == 0);
}

TEST_CASE("drop_missing_occupation switch removes seekers without occupation") {
  SeekerSchema schema;
  schema.drop_missing_occupation = true;
  const auto got = seekers("a,F,30,1,13,,200\nb,M,30,1,13,x1,200\n", schema);
  CHECK(got.records.size() == 1);
  CHECK(got.report.drop_count("occupation") == 1);
}

TEST_CASE("header-only file reports zero valid rows") {
  std::istringstream in(kSeekerHeader);
  try {
    parse_seekers(in, {});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zero valid rows") != std::string::npos);
  }
}

TEST_CASE("missing mandatory column is a data error") {
  std::istringstream in("id,gender,age,month,region,desired_wage\na,F,30,1,1,200\n");
  CHECK_THROWS_AS(parse_seekers(in, {}), DataError);
}

TEST_CASE("seeker invariant checks") {
  const auto got = seekers(
      "a,X,30,1,1,o,200\n"
      "b,F,14,1,1,o,200\n"
      "c,F,30,13,1,o,200\n"
      "d,F,30,0,1,o,200\n"
      "e,F,30,1,48,o,200\n"
      "f,F,30,1,0,o,200\n"
      "g,F,30,1,1,o,-5\n"
      "h,F,30,1,1,o\n"
      "i,f,15,12,47,o,0.5\n");
  CHECK(got.records.size() == 1);
  CHECK(got.report.drop_count("gender") == 1);
  CHECK(got.report.drop_count("age") == 1);
  CHECK(got.report.drop_count("month") == 2);
  CHECK(got.report.drop_count("region") == 2);
  CHECK(got.report.drop_count("desired_wage") == 1);
  CHECK(got.report.drop_count("field_count") == 1);
  CHECK(got.records[0].gender == 1);
}

TEST_CASE("inverted posting wage range is dropped") {
  const auto got = postings("p1,13,111,200000,180000\np2,13,111,200000,220000\n");
  CHECK(got.records.size() == 1);
  CHECK(got.report.drop_count("wage_order") == 1);
}

TEST_CASE("equal posting bounds are retained") {
  const auto got = postings("p1,13,111,200000,200000\n");
  REQUIRE(got.records.size() == 1);
  CHECK(got.records[0].wage_lower == 200000);
}

TEST_CASE("five postings with two invalid give three records") {
  const auto got = postings(
      "p1,13,111,200000,210000\n"
      "p2,60,111,200000,210000\n"
      "p3,13,112,190000,250000\n"
      "p4,13,113,0,250000\n"
      "p5,1,114,150000,150000\n");
  CHECK(got.records.size() == 3);
  CHECK(got.report.rows_dropped() == 2);
}

TEST_CASE("outcome is log of monthly yen") {
  SeekerRecord r;
  r.desired_wage = 200;
  CHECK(outcome(r).y == doctest::Approx(std::log(200000.0)).epsilon(1e-15));
  CHECK(outcome(r).y == doctest::Approx(12.2061).epsilon(1e-5));
  r.desired_wage = 1;
  CHECK(outcome(r).y == doctest::Approx(6.9078).epsilon(1e-5));
  SeekerRecord a, b;
  a.desired_wage = 200;
  b.desired_wage = 220;
  CHECK(outcome(b).y - outcome(a).y == doctest::Approx(std::log(1.1)).epsilon(1e-12));
}

TEST_CASE("outcome is strictly increasing in the desired wage") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2000);
  for (int i = 0; i < 1000; ++i) {
    SeekerRecord a, b;
    a.desired_wage = u(rng);
    b.desired_wage = a.desired_wage * (1 + 1e-9);
    CHECK(outcome(a).y < outcome(b).y);
  }
}

TEST_CASE("kept plus dropped equals data rows on random files") {
  std::mt19937_64 rng(11);
  const char* genders[] = {"F", "M", "0", "1", "?"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string body;
    const int rows = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < rows; ++i) {
      body += "s" + std::to_string(i) + "," + genders[rng() % 5] + "," + std::to_string(10 + rng() % 60) + "," +
              std::to_string(rng() % 14) + "," + std::to_string(rng() % 50) + ",o" + std::to_string(rng() % 3) +
              "," + std::to_string(static_cast<int>(rng() % 400) - 20) + "\n";
    }
    body += "ok,F,30,1,1,o,100\n";
    const auto got = seekers(body);
    CHECK(got.report.rows_kept + got.report.rows_dropped() == got.report.rows_read);
    CHECK(got.report.rows_read == static_cast<std::size_t>(rows + 1));
  }
}

TEST_CASE("ingest is deterministic and round-trips through the writer") {
  const std::string body = "a,F,30,1,13,\"x,1\",200.5\nb,M,41,2,13,,250\n";
  const auto first = seekers(body);
  const auto second = seekers(body);
  REQUIRE(first.records.size() == second.records.size());
  std::ostringstream out;
  write_seekers(out, first.records);
  std::istringstream in(out.str());
  const auto back = parse_seekers(in, {});
  REQUIRE(back.records.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.records[i].id == first.records[i].id);
    CHECK(back.records[i].occupation == first.records[i].occupation);
    CHECK(back.records[i].desired_wage == first.records[i].desired_wage);
    CHECK(second.records[i].age == first.records[i].age);
  }
  CHECK(*back.records[0].occupation == "x,1");
}

TEST_CASE("csv helpers") {
  const auto f = csv::split_line("a,\"b,c\",\"d\"\"e\",\r");
  REQUIRE(f.size() == 4);
  CHECK(f[1] == "b,c");
  CHECK(f[2] == "d\"e");
  CHECK(f[3].empty());
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng);
    CHECK(std::stod(csv::format_double(v)) == v);
  }
}

TEST_CASE("schema remapping") {
  SeekerSchema schema;
  schema.desired_wage = "ask";
  std::istringstream in("id,gender,age,month,region,occupation,ask\na,F,30,1,1,o,100\n");
  CHECK(parse_seekers(in, schema).records.size() == 1);
}

TEST_CASE("unreadable file is a data error") {
  CHECK_THROWS_AS(load_seekers("/nonexistent/seekers.csv"), DataError);
  CHECK_THROWS_AS(load_postings("/nonexistent/postings.csv"), DataError);
}
