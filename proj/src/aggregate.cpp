#include "reciprank/aggregate.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace reciprank {

const char* aggregator_name(Aggregator kind) {
  switch (kind) {
    case Aggregator::ScoutOnly: return "scout-only";
    case Aggregator::ReplyOnly: return "reply-only";
    case Aggregator::Multiplication: return "multiplication";
    case Aggregator::HarmonicMean: return "harmonic-mean";
  }
  return "?";
}

std::optional<Aggregator> parse_aggregator(std::string_view name) {
  for (Aggregator kind : kAllAggregators) {
    if (name == aggregator_name(kind)) return kind;
  }
  return std::nullopt;
}

double aggregate(Aggregator kind, double p_scout, double p_reply) {
  if (!(p_scout >= 0.0 && p_scout <= 1.0) || !(p_reply >= 0.0 && p_reply <= 1.0)) {
    throw std::invalid_argument("invalid probability");
  }
  switch (kind) {
    case Aggregator::ScoutOnly: return p_scout;
    case Aggregator::ReplyOnly: return p_reply;
    case Aggregator::Multiplication: return p_scout * p_reply;
    case Aggregator::HarmonicMean:
      if (p_scout + p_reply == 0.0) return 0.0;
      return 2.0 * p_scout * p_reply / (p_scout + p_reply);
  }
  throw std::invalid_argument("unknown aggregator");
}

std::vector<SeekerId> pta_rank(const PairScoreModel& scout_model,
                               const PairScoreModel& reply_model, Aggregator kind,
                               CompanyId company, const std::vector<SeekerId>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("pta_rank: empty candidates");
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = aggregate(kind, scout_model.score(company, candidates[i]),
                          reply_model.score(company, candidates[i]));
  }
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<SeekerId> out(candidates.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = candidates[idx[i]];
  return out;
}

}  // namespace reciprank
