#ifndef RECIPRANK_PSEUDO_HPP
#define RECIPRANK_PSEUDO_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "reciprank/domain.hpp"
#include "reciprank/learners.hpp"

namespace reciprank {

/// Blend weight policy: one global alpha, or one alpha per activity segment.
struct AlphaPolicy {
  enum class Mode { Global, PerSegment };

  Mode mode = Mode::Global;
  double global_alpha = 0.0;
  std::array<double, kNumSegments> segment_alphas{};  // indexed by Segment

  static AlphaPolicy global(double alpha);
  static AlphaPolicy per_segment(double high, double middle, double low);

  double alpha_for(Segment s) const {
    return mode == Mode::Global ? global_alpha
                                : segment_alphas[static_cast<int>(s)];
  }
};

/// Every alpha must lie in [0, 1]; violations raise "invalid weight".
void validate(const AlphaPolicy& policy);

/// Weighted blend of the true match label and the match prediction:
/// alpha * m + (1 - alpha) * (p_scout_hat * p_reply_hat).
double pseudo_score(bool true_match, double p_scout_hat, double p_reply_hat,
                    double alpha);

/// Global -> global alpha; PerSegment -> the alpha of the company's segment.
/// Raises "unassigned company" when the company has no segment.
double resolve_alpha(const AlphaPolicy& policy, const SegmentAssignment& segments,
                     CompanyId company);

struct PseudoRow {
  CompanyId company = 0;
  SeekerId seeker = 0;
  Segment segment = Segment::Low;
  bool true_match = false;
  double prediction = 0.0;  // p_scout_hat * p_reply_hat
  double s_pseudo = 0.0;
};

struct PseudoLabelSet {
  std::vector<PseudoRow> rows;
};

/// One row per train exposure event (in event order) followed by sampled
/// unexposed negatives (true_match = 0), negatives_per_positive per
/// match-positive event. With the seed used for DMP training the negative
/// pairs are identical to the DMP training universe.
PseudoLabelSet build_pseudo_labels(const Dataset& train, const PairScoreModel& scout_model,
                                   const PairScoreModel& reply_model,
                                   const AlphaPolicy& policy,
                                   const SegmentAssignment& segments,
                                   int negatives_per_positive, std::uint64_t rng_seed);

/// CSV `company_id,seeker_id,segment,true_match,prediction,s_pseudo`.
void save_pseudo_csv(const PseudoLabelSet& labels, const std::string& path);
PseudoLabelSet load_pseudo_csv(const std::string& path);

}  // namespace reciprank

#endif
