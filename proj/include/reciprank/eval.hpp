#ifndef RECIPRANK_EVAL_HPP
#define RECIPRANK_EVAL_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "reciprank/domain.hpp"
#include "reciprank/learners.hpp"
#include "reciprank/meta.hpp"
#include "reciprank/pseudo.hpp"

namespace reciprank {

struct RankedList {
  CompanyId company = 0;
  std::vector<SeekerId> seekers;  // no duplicates
};

/// Test-window candidates per company: exposed seekers with binary relevance
/// (the realized match label; repeated exposures of a pair OR together).
struct CandidateSet {
  // company -> (seeker, relevant), sorted by seeker id
  std::map<CompanyId, std::vector<std::pair<SeekerId, bool>>> by_company;
};

CandidateSet build_candidates(const Dataset& test);

/// NDCG with binary gains: DCG@k = sum rel(i) / log2(i + 1); 0 when IDCG is 0.
double ndcg_at_k(const RankedList& ranking, const std::map<SeekerId, bool>& relevance,
                 int k);

/// A ranking method: candidates in, ranked candidates out.
using RankFn =
    std::function<std::vector<SeekerId>(CompanyId, const std::vector<SeekerId>&)>;

struct SegmentScore {
  double mean_ndcg = 0.0;
  int num_companies = 0;
};

struct MethodEvaluation {
  std::string method;
  SegmentScore overall;
  std::array<SegmentScore, kNumSegments> per_segment{};
  int companies_without_positive = 0;
};

/// Mean NDCG@k over companies with at least one positive candidate, overall
/// and per segment. Companies are processed in ascending id order and merged
/// deterministically regardless of thread count.
MethodEvaluation evaluate_method(const std::string& method, const RankFn& ranker,
                                 const CandidateSet& candidates,
                                 const SegmentAssignment& segments, int k,
                                 int threads = 1);

struct TuneTraceRow {
  std::string mode;     // "global" | "per-segment"
  std::string segment;  // "overall" or a segment name
  double alpha = 0.0;
  int fold = 0;
  double validation_ndcg = 0.0;
};

/// Everything a fold run needs to train and score one alpha.
struct TuneConfig {
  AlphaPolicy::Mode mode = AlphaPolicy::Mode::Global;
  std::vector<double> grid;
  int folds = 5;
  int k = 10;
  TrainConfig learner;
  GbdtConfig meta;
  int negatives_per_positive = 4;
  std::uint64_t rng_seed = 1;
};

struct TuneResult {
  AlphaPolicy policy;
  std::vector<TuneTraceRow> trace;
};

/// Cross-validated alpha selection on the train window only. Folds are
/// contiguous time blocks (expanding window: fold f trains on blocks 0..f,
/// validates on block f+1). Global mode maximizes mean overall validation
/// NDCG@k; PerSegment picks each segment's alpha from that segment's mean
/// independently. Ties break toward the larger alpha. Folds whose validation
/// block has no evaluable company contribute 0 to the mean.
TuneResult tune_alpha(const Dataset& train, const TuneConfig& config);

/// Fold runs shared between modes: one run per (fold, alpha), seeded by the
/// alpha value itself so results are grid-independent.
struct FoldOutcome {
  double overall = 0.0;
  std::array<double, kNumSegments> per_segment{};
};
std::vector<std::vector<FoldOutcome>> run_alpha_folds(const Dataset& train,
                                                      const std::vector<double>& grid,
                                                      const TuneConfig& config);
TuneResult select_from_folds(const std::vector<std::vector<FoldOutcome>>& outcomes,
                             const std::vector<double>& grid,
                             AlphaPolicy::Mode mode, int folds);

/// Report CSV `method,segment,ndcg_at_k,num_companies` (segment "overall"
/// first, then High/Middle/Low).
void write_report_csv(const std::vector<MethodEvaluation>& methods,
                      const std::string& path);
/// Trace CSV `mode,segment,alpha,fold,validation_ndcg`.
void write_trace_csv(const std::vector<TuneTraceRow>& rows, const std::string& path);

/// Human-readable aligned table.
std::string format_report_table(const std::vector<MethodEvaluation>& methods, int k);

}  // namespace reciprank

#endif
