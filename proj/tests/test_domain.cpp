#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "reciprank/domain.hpp"
#include "reciprank/synth.hpp"

using namespace reciprank;

namespace {

InteractionEvent ev(std::int64_t ts, CompanyId c, SeekerId j, bool scout, bool reply) {
  return InteractionEvent{ts, c, j, scout, reply};
}

Dataset default_synthetic() {
  SynthConfig cfg;
  cfg.rng_seed = 7;
  return simulate_log(generate_ground_truth(cfg), cfg);
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("match_label definition") {
  CHECK(match_label(ev(1, 0, 0, true, true)) == true);
  CHECK(match_label(ev(1, 0, 0, true, false)) == false);
  CHECK(match_label(ev(1, 0, 0, false, false)) == false);
}

TEST_CASE("sparsity zero and simple counts") {
  Dataset d;
  d.num_companies = 10;
  d.num_seekers = 10;
  for (int i = 0; i < 8; ++i) d.events.push_back(ev(i + 1, i % 3, i % 5, true, false));
  CHECK(sparsity(d) == 0.0);

  d.events.clear();
  for (int i = 0; i < 5; ++i) d.events.push_back(ev(i + 1, i % 3, i, true, true));
  CHECK(sparsity(d) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("sparsity rejects an empty market") {
  Dataset d;
  d.num_companies = 0;
  d.num_seekers = 10;
  CHECK_THROWS_WITH_AS(sparsity(d), "empty market", std::invalid_argument);
}

TEST_CASE("sparsity matches a linear-scan count on synthetic data") {
  const Dataset d = default_synthetic();
  std::int64_t matches = 0;
  for (const InteractionEvent& e : d.events) {
    if (e.scout_sent && e.replied) ++matches;
  }
  const double expected = static_cast<double>(matches) /
                          (static_cast<double>(d.num_companies) * d.num_seekers);
  CHECK(sparsity(d) == expected);
  // Documented default lands in the sparse regime.
  CHECK(sparsity(d) > 1e-4);
  CHECK(sparsity(d) < 1e-1);
}

TEST_CASE("split_by_time partitions at the boundary") {
  Dataset d;
  d.num_companies = 1;
  d.num_seekers = 3;
  d.events = {ev(1, 0, 0, true, false), ev(2, 0, 1, false, false), ev(3, 0, 2, true, true)};
  const TimeSplit split = split_by_time(d, 3);
  REQUIRE(split.train.events.size() == 2);
  REQUIRE(split.test.events.size() == 1);
  CHECK(split.test.events[0].timestamp == 3);
  for (const InteractionEvent& e : split.train.events) CHECK(e.timestamp < 3);
}

TEST_CASE("split_by_time rejects degenerate boundaries") {
  Dataset d;
  d.num_companies = 1;
  d.num_seekers = 2;
  d.events = {ev(1, 0, 0, true, false), ev(2, 0, 1, false, false)};
  CHECK_THROWS_WITH_AS(split_by_time(d, 1), "degenerate split", std::invalid_argument);
  CHECK_THROWS_WITH_AS(split_by_time(d, 5), "degenerate split", std::invalid_argument);
}

TEST_CASE("split_by_time agrees with a linear scan on synthetic data") {
  const Dataset d = default_synthetic();
  REQUIRE(d.events.size() > 1000);
  const std::size_t idx = d.events.size() * 8 / 10;
  const std::int64_t boundary = d.events[idx].timestamp;
  const TimeSplit split = split_by_time(d, boundary);

  std::size_t expected_train = 0;
  for (const InteractionEvent& e : d.events) {
    if (e.timestamp < boundary) ++expected_train;
  }
  CHECK(split.train.events.size() == expected_train);
  CHECK(split.train.events.size() + split.test.events.size() == d.events.size());
  for (const InteractionEvent& e : split.test.events) CHECK(e.timestamp >= boundary);
}

TEST_CASE("assign_segments ranks by scout count") {
  Dataset d;
  d.num_companies = 3;
  d.num_seekers = 50;
  std::int64_t ts = 0;
  auto add_scouts = [&](CompanyId c, int n) {
    for (int i = 0; i < n; ++i) d.events.push_back(ev(++ts, c, i, true, false));
  };
  add_scouts(0, 10);
  add_scouts(1, 5);
  add_scouts(2, 1);
  std::sort(d.events.begin(), d.events.end(),
            [](const InteractionEvent& a, const InteractionEvent& b) {
              return a.timestamp < b.timestamp;
            });
  const SegmentAssignment segments = assign_segments(d);
  CHECK(segments.at(0) == Segment::High);
  CHECK(segments.at(1) == Segment::Middle);
  CHECK(segments.at(2) == Segment::Low);
}

TEST_CASE("assign_segments splits equal counts by id order") {
  Dataset d;
  d.num_companies = 7;
  d.num_seekers = 7;
  std::int64_t ts = 0;
  for (CompanyId c = 0; c < 7; ++c) d.events.push_back(ev(++ts, c, c, true, false));
  const SegmentAssignment segments = assign_segments(d);
  const auto counts = segments.counts();
  const int max_count = *std::max_element(counts.begin(), counts.end());
  const int min_count = *std::min_element(counts.begin(), counts.end());
  CHECK(max_count - min_count <= 1);
  // Id order: lowest ids fill High first.
  CHECK(segments.at(0) == Segment::High);
  CHECK(segments.at(6) == Segment::Low);
}

TEST_CASE("assign_segments matches a sort oracle on 300 synthetic companies") {
  const Dataset d = default_synthetic();
  REQUIRE(d.num_companies == 300);
  const TimeSplit split = split_by_time(d, d.events[d.events.size() * 8 / 10].timestamp);
  const SegmentAssignment segments = assign_segments(split.train);

  const auto counts = segments.counts();
  CHECK(counts[0] == 100);
  CHECK(counts[1] == 100);
  CHECK(counts[2] == 100);

  // Independent oracle: full sort + slice.
  std::vector<std::int64_t> scouts(300, 0);
  for (const InteractionEvent& e : split.train.events) {
    if (e.scout_sent) scouts[static_cast<std::size_t>(e.company)]++;
  }
  std::vector<CompanyId> order(300);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](CompanyId a, CompanyId b) {
    return scouts[static_cast<std::size_t>(a)] > scouts[static_cast<std::size_t>(b)];
  });
  for (std::size_t rank = 0; rank < 300; ++rank) {
    const Segment expected =
        rank < 100 ? Segment::High : (rank < 200 ? Segment::Middle : Segment::Low);
    CHECK(segments.at(order[rank]) == expected);
  }

  // Deterministic and independent of test-window data.
  const SegmentAssignment again = assign_segments(split.train);
  CHECK(again.by_company == segments.by_company);
}

TEST_CASE("zero-event companies fall in Low") {
  Dataset d;
  d.num_companies = 4;  // company 3 never appears
  d.num_seekers = 4;
  d.events = {ev(1, 0, 0, true, false), ev(2, 1, 1, true, false), ev(3, 2, 2, true, false)};
  const SegmentAssignment segments = assign_segments(d);
  CHECK(segments.at(3) == Segment::Low);
}

TEST_CASE("validate enforces reply-implies-scout and ordering") {
  Dataset d;
  d.num_companies = 2;
  d.num_seekers = 2;
  d.events = {ev(1, 0, 0, false, true)};
  CHECK_THROWS(validate(d));

  d.events = {ev(2, 0, 0, true, false), ev(1, 1, 1, true, false)};
  CHECK_THROWS(validate(d));

  d.events = {ev(1, 0, 0, true, false), ev(1, 0, 0, true, false)};
  CHECK_THROWS(validate(d));

  d.events = {ev(1, 0, 0, true, false), ev(1, 0, 1, true, false), ev(2, 0, 0, true, true)};
  CHECK_NOTHROW(validate(d));
}

TEST_CASE("event csv round-trips and the loader reports offending lines") {
  const Dataset d = default_synthetic();
  const auto path = temp_path("reciprank_events_roundtrip.csv");
  save_events_csv(d, path.string());
  const Dataset loaded = load_events_csv(path.string(), d.num_companies, d.num_seekers);
  REQUIRE(loaded.events.size() == d.events.size());
  CHECK(loaded.num_companies == d.num_companies);
  for (std::size_t i = 0; i < d.events.size(); ++i) {
    CHECK(loaded.events[i].timestamp == d.events[i].timestamp);
    CHECK(loaded.events[i].company == d.events[i].company);
    CHECK(loaded.events[i].seeker == d.events[i].seeker);
    CHECK(loaded.events[i].scout_sent == d.events[i].scout_sent);
    CHECK(loaded.events[i].replied == d.events[i].replied);
  }
  std::filesystem::remove(path);

  const auto bad = temp_path("reciprank_events_bad.csv");
  {
    std::ofstream out(bad);
    out << "timestamp,company_id,seeker_id,scout_sent,replied\n";
    out << "1,0,0,1,0\n";
    out << "2,0,1,0,1\n";  // reply without scout on line 3
  }
  try {
    load_events_csv(bad.string());
    FAIL("expected a load error");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK(what.find(":3") != std::string::npos);
    CHECK(what.find("reply without scout") != std::string::npos);
  }
  std::filesystem::remove(bad);
}
