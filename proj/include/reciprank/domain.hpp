#ifndef RECIPRANK_DOMAIN_HPP
#define RECIPRANK_DOMAIN_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reciprank {

// Ids are dense within one dataset: companies in [0, num_companies),
// seekers in [0, num_seekers).
using CompanyId = std::int32_t;
using SeekerId = std::int32_t;

enum class Segment { High = 0, Middle = 1, Low = 2 };
inline constexpr int kNumSegments = 3;
inline constexpr std::array<Segment, kNumSegments> kAllSegments = {
    Segment::High, Segment::Middle, Segment::Low};

const char* segment_name(Segment s);
std::optional<Segment> parse_segment(std::string_view name);

/// One timestamped (company, seeker) exposure with its outcome bits.
/// A reply presupposes a scout: replied implies scout_sent.
struct InteractionEvent {
  std::int64_t timestamp = 0;  // epoch seconds
  CompanyId company = 0;
  SeekerId seeker = 0;
  bool scout_sent = false;
  bool replied = false;
};

/// Realized match label: scout sent and replied.
inline bool match_label(const InteractionEvent& e) { return e.scout_sent && e.replied; }

struct Dataset {
  std::vector<InteractionEvent> events;  // sorted ascending by timestamp
  CompanyId num_companies = 0;
  SeekerId num_seekers = 0;
};

/// Checks every Dataset invariant (ordering, id bounds, reply-implies-scout,
/// no duplicate (company, seeker, timestamp)); throws on the first violation.
void validate(const Dataset& dataset);

/// Fraction of match-positive events over the |C| x |J| pair universe.
/// Throws "empty market" if either side is empty.
double sparsity(const Dataset& dataset);

struct TimeSplit {
  Dataset train;  // events strictly before the boundary
  Dataset test;   // events at or after the boundary
  std::int64_t boundary_timestamp = 0;
};

/// Partitions by timestamp. Throws "degenerate split" if either side is empty.
TimeSplit split_by_time(const Dataset& dataset, std::int64_t boundary);

struct SegmentAssignment {
  std::vector<Segment> by_company;  // indexed by CompanyId, size num_companies

  Segment at(CompanyId c) const;  // throws "unassigned company"
  std::optional<Segment> find(CompanyId c) const;
  std::array<int, kNumSegments> counts() const;
};

/// Ranks companies by scout count in the train window (ties by ascending id)
/// and cuts the ranking into High/Middle/Low terciles. Companies without
/// events count as zero and land in Low.
SegmentAssignment assign_segments(const Dataset& train);

/// Event CSV: header `timestamp,company_id,seeker_id,scout_sent,replied`.
/// Pass 0 for either count to infer it as max id + 1. Violations are rejected
/// with the offending line number.
Dataset load_events_csv(const std::string& path, CompanyId num_companies = 0,
                        SeekerId num_seekers = 0);
void save_events_csv(const Dataset& dataset, const std::string& path);

}  // namespace reciprank

#endif
