#ifndef RECIPRANK_AGGREGATE_HPP
#define RECIPRANK_AGGREGATE_HPP

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "reciprank/domain.hpp"
#include "reciprank/learners.hpp"

namespace reciprank {

enum class Aggregator { ScoutOnly, ReplyOnly, Multiplication, HarmonicMean };
inline constexpr std::array<Aggregator, 4> kAllAggregators = {
    Aggregator::ScoutOnly, Aggregator::ReplyOnly, Aggregator::Multiplication,
    Aggregator::HarmonicMean};

/// CLI names: scout-only | reply-only | multiplication | harmonic-mean.
const char* aggregator_name(Aggregator kind);
std::optional<Aggregator> parse_aggregator(std::string_view name);

/// Combines two directional probabilities into one match score.
/// HarmonicMean(0, 0) is defined as 0. Inputs outside [0, 1] raise
/// "invalid probability".
double aggregate(Aggregator kind, double p_scout, double p_reply);

/// Candidates sorted by descending aggregated score, ties by ascending id.
std::vector<SeekerId> pta_rank(const PairScoreModel& scout_model,
                               const PairScoreModel& reply_model, Aggregator kind,
                               CompanyId company, const std::vector<SeekerId>& candidates);

}  // namespace reciprank

#endif
