#include "reciprank/domain.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "reciprank/common.hpp"

namespace reciprank {

const char* segment_name(Segment s) {
  switch (s) {
    case Segment::High: return "High";
    case Segment::Middle: return "Middle";
    case Segment::Low: return "Low";
  }
  return "?";
}

std::optional<Segment> parse_segment(std::string_view name) {
  if (name == "High") return Segment::High;
  if (name == "Middle") return Segment::Middle;
  if (name == "Low") return Segment::Low;
  return std::nullopt;
}

namespace {

std::uint64_t pair_key(const Dataset& d, CompanyId c, SeekerId j) {
  return static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(d.num_seekers) +
         static_cast<std::uint64_t>(j);
}

}  // namespace

void validate(const Dataset& dataset) {
  if (dataset.num_companies < 0 || dataset.num_seekers < 0) {
    throw std::invalid_argument("negative entity count");
  }
  std::unordered_set<std::uint64_t> seen_at_ts;
  std::int64_t ts = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < dataset.events.size(); ++i) {
    const InteractionEvent& e = dataset.events[i];
    if (e.timestamp < ts) {
      throw std::invalid_argument("events not sorted by timestamp at index " +
                                  std::to_string(i));
    }
    if (e.timestamp > ts) {
      ts = e.timestamp;
      seen_at_ts.clear();
    }
    if (e.company < 0 || e.company >= dataset.num_companies || e.seeker < 0 ||
        e.seeker >= dataset.num_seekers) {
      throw std::invalid_argument("id out of bounds at index " + std::to_string(i));
    }
    if (e.replied && !e.scout_sent) {
      throw std::invalid_argument("reply without scout at index " + std::to_string(i));
    }
    if (!seen_at_ts.insert(pair_key(dataset, e.company, e.seeker)).second) {
      throw std::invalid_argument("duplicate (company, seeker, timestamp) at index " +
                                  std::to_string(i));
    }
  }
}

double sparsity(const Dataset& dataset) {
  if (dataset.num_companies <= 0 || dataset.num_seekers <= 0) {
    throw std::invalid_argument("empty market");
  }
  std::int64_t matches = 0;
  for (const InteractionEvent& e : dataset.events) {
    if (match_label(e)) ++matches;
  }
  return static_cast<double>(matches) /
         (static_cast<double>(dataset.num_companies) *
          static_cast<double>(dataset.num_seekers));
}

TimeSplit split_by_time(const Dataset& dataset, std::int64_t boundary) {
  TimeSplit out;
  out.boundary_timestamp = boundary;
  out.train.num_companies = out.test.num_companies = dataset.num_companies;
  out.train.num_seekers = out.test.num_seekers = dataset.num_seekers;
  for (const InteractionEvent& e : dataset.events) {
    (e.timestamp < boundary ? out.train : out.test).events.push_back(e);
  }
  if (out.train.events.empty() || out.test.events.empty()) {
    throw std::invalid_argument("degenerate split");
  }
  return out;
}

Segment SegmentAssignment::at(CompanyId c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= by_company.size()) {
    throw std::out_of_range("unassigned company " + std::to_string(c));
  }
  return by_company[static_cast<std::size_t>(c)];
}

std::optional<Segment> SegmentAssignment::find(CompanyId c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= by_company.size()) return std::nullopt;
  return by_company[static_cast<std::size_t>(c)];
}

std::array<int, kNumSegments> SegmentAssignment::counts() const {
  std::array<int, kNumSegments> out{};
  for (Segment s : by_company) out[static_cast<int>(s)]++;
  return out;
}

SegmentAssignment assign_segments(const Dataset& train) {
  if (train.events.empty()) {
    throw std::invalid_argument("cannot assign segments from an empty train window");
  }
  const std::size_t n = static_cast<std::size_t>(train.num_companies);
  std::vector<std::int64_t> scout_count(n, 0);
  for (const InteractionEvent& e : train.events) {
    if (e.scout_sent) scout_count[static_cast<std::size_t>(e.company)]++;
  }
  std::vector<CompanyId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](CompanyId a, CompanyId b) {
    const std::int64_t ca = scout_count[static_cast<std::size_t>(a)];
    const std::int64_t cb = scout_count[static_cast<std::size_t>(b)];
    if (ca != cb) return ca > cb;
    return a < b;
  });
  const std::size_t cut1 = n / 3;
  const std::size_t cut2 = (2 * n) / 3;
  SegmentAssignment out;
  out.by_company.assign(n, Segment::Low);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const Segment s =
        rank < cut1 ? Segment::High : (rank < cut2 ? Segment::Middle : Segment::Low);
    out.by_company[static_cast<std::size_t>(order[rank])] = s;
  }
  return out;
}

Dataset load_events_csv(const std::string& path, CompanyId num_companies,
                        SeekerId num_seekers) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (trim(line) != "timestamp,company_id,seeker_id,scout_sent,replied") {
    throw std::runtime_error(path + ": unexpected header '" + trim(line) + "'");
  }
  Dataset out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != 5) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 5 fields");
    }
    InteractionEvent e;
    e.timestamp = parse_int(fields[0], "timestamp");
    e.company = static_cast<CompanyId>(parse_int(fields[1], "company_id"));
    e.seeker = static_cast<SeekerId>(parse_int(fields[2], "seeker_id"));
    e.scout_sent = parse_int(fields[3], "scout_sent") != 0;
    e.replied = parse_int(fields[4], "replied") != 0;
    if (e.replied && !e.scout_sent) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": reply without scout");
    }
    if (e.company < 0 || e.seeker < 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": negative id");
    }
    out.events.push_back(e);
  }
  CompanyId max_c = -1;
  SeekerId max_j = -1;
  for (const InteractionEvent& e : out.events) {
    max_c = std::max(max_c, e.company);
    max_j = std::max(max_j, e.seeker);
  }
  out.num_companies = num_companies > 0 ? num_companies : max_c + 1;
  out.num_seekers = num_seekers > 0 ? num_seekers : max_j + 1;
  validate(out);
  return out;
}

void save_events_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF line endings everywhere
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "timestamp,company_id,seeker_id,scout_sent,replied\n";
  for (const InteractionEvent& e : dataset.events) {
    out << e.timestamp << ',' << e.company << ',' << e.seeker << ','
        << (e.scout_sent ? 1 : 0) << ',' << (e.replied ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace reciprank
