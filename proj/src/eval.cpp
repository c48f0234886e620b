#include "reciprank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "reciprank/common.hpp"
#include "reciprank/meta.hpp"

namespace reciprank {

CandidateSet build_candidates(const Dataset& test) {
  if (test.events.empty()) throw std::invalid_argument("build_candidates: empty test set");
  std::map<CompanyId, std::map<SeekerId, bool>> grouped;
  for (const InteractionEvent& e : test.events) {
    bool& rel = grouped[e.company][e.seeker];
    rel = rel || match_label(e);
  }
  CandidateSet out;
  for (const auto& [company, seekers] : grouped) {
    auto& list = out.by_company[company];
    list.reserve(seekers.size());
    for (const auto& [seeker, rel] : seekers) list.emplace_back(seeker, rel);
  }
  return out;
}

double ndcg_at_k(const RankedList& ranking, const std::map<SeekerId, bool>& relevance,
                 int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  int num_relevant = 0;
  for (const auto& [seeker, rel] : relevance) {
    if (rel) ++num_relevant;
  }
  const int ideal_hits = std::min(k, num_relevant);
  if (ideal_hits == 0) return 0.0;

  double dcg = 0.0;
  const int depth = std::min<int>(k, static_cast<int>(ranking.seekers.size()));
  for (int i = 0; i < depth; ++i) {
    const auto it = relevance.find(ranking.seekers[static_cast<std::size_t>(i)]);
    if (it == relevance.end()) {
      throw std::invalid_argument("ndcg_at_k: ranked seeker missing from relevance");
    }
    if (it->second) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  for (int i = 0; i < ideal_hits; ++i) {
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

MethodEvaluation evaluate_method(const std::string& method, const RankFn& ranker,
                                 const CandidateSet& candidates,
                                 const SegmentAssignment& segments, int k,
                                 int threads) {
  if (k < 1) throw std::invalid_argument("evaluate_method: k must be >= 1");
  if (threads < 1) threads = 1;

  struct Item {
    CompanyId company;
    const std::vector<std::pair<SeekerId, bool>>* cands;
  };
  std::vector<Item> items;  // ascending company id (map order)
  items.reserve(candidates.by_company.size());
  int without_positive = 0;
  for (const auto& [company, cands] : candidates.by_company) {
    const bool has_positive =
        std::any_of(cands.begin(), cands.end(), [](const auto& p) { return p.second; });
    if (has_positive) {
      items.push_back({company, &cands});
    } else {
      ++without_positive;
    }
  }

  std::vector<double> scores(items.size(), 0.0);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Item& item = items[i];
      std::vector<SeekerId> pool;
      std::map<SeekerId, bool> relevance;
      pool.reserve(item.cands->size());
      for (const auto& [seeker, rel] : *item.cands) {
        pool.push_back(seeker);
        relevance[seeker] = rel;
      }
      RankedList ranked;
      ranked.company = item.company;
      ranked.seekers = ranker(item.company, pool);
      scores[i] = ndcg_at_k(ranked, relevance, k);
    }
  };

  if (threads == 1 || items.size() < 2) {
    worker(0, items.size());
  } else {
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), items.size());
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t chunk = (items.size() + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(items.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          worker(begin, end);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  MethodEvaluation out;
  out.method = method;
  out.companies_without_positive = without_positive;
  std::array<double, kNumSegments> seg_sum{};
  std::array<int, kNumSegments> seg_n{};
  double sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    sum += scores[i];
    const Segment s = segments.find(items[i].company).value_or(Segment::Low);
    seg_sum[static_cast<std::size_t>(s)] += scores[i];
    seg_n[static_cast<std::size_t>(s)] += 1;
  }
  out.overall.num_companies = static_cast<int>(items.size());
  out.overall.mean_ndcg = items.empty() ? 0.0 : sum / static_cast<double>(items.size());
  for (int s = 0; s < kNumSegments; ++s) {
    out.per_segment[static_cast<std::size_t>(s)].num_companies = seg_n[static_cast<std::size_t>(s)];
    out.per_segment[static_cast<std::size_t>(s)].mean_ndcg =
        seg_n[static_cast<std::size_t>(s)] == 0
            ? 0.0
            : seg_sum[static_cast<std::size_t>(s)] / seg_n[static_cast<std::size_t>(s)];
  }
  return out;
}

namespace {

// Contiguous time blocks by event count: block b is
// events[round(b*n/(folds+1)), round((b+1)*n/(folds+1))).
std::vector<std::size_t> block_boundaries(std::size_t n, int folds) {
  std::vector<std::size_t> bounds;
  const int blocks = folds + 1;
  for (int b = 0; b <= blocks; ++b) {
    bounds.push_back(static_cast<std::size_t>(
        (static_cast<unsigned long long>(n) * static_cast<unsigned long long>(b)) /
        static_cast<unsigned long long>(blocks)));
  }
  return bounds;
}

Dataset slice(const Dataset& d, std::size_t begin, std::size_t end) {
  Dataset out;
  out.num_companies = d.num_companies;
  out.num_seekers = d.num_seekers;
  out.events.assign(d.events.begin() + static_cast<std::ptrdiff_t>(begin),
                    d.events.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::uint64_t alpha_stream(int fold, double alpha) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(alpha));
  std::memcpy(&bits, &alpha, sizeof(bits));
  return derive_seed(bits, static_cast<std::uint64_t>(fold) + 0x7001);
}

}  // namespace

std::vector<std::vector<FoldOutcome>> run_alpha_folds(const Dataset& train,
                                                      const std::vector<double>& grid,
                                                      const TuneConfig& config) {
  if (grid.empty()) throw std::invalid_argument("tune_alpha: empty grid");
  if (config.folds < 1) throw std::invalid_argument("tune_alpha: folds must be >= 1");
  const std::size_t n = train.events.size();
  const auto bounds = block_boundaries(n, config.folds);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    if (bounds[b] == bounds[b + 1]) throw std::invalid_argument("degenerate folds");
  }

  std::vector<std::vector<FoldOutcome>> outcomes(
      grid.size(), std::vector<FoldOutcome>(static_cast<std::size_t>(config.folds)));
  for (int fold = 0; fold < config.folds; ++fold) {
    const Dataset fold_train = slice(train, 0, bounds[static_cast<std::size_t>(fold) + 1]);
    const Dataset fold_val = slice(train, bounds[static_cast<std::size_t>(fold) + 1],
                                   bounds[static_cast<std::size_t>(fold) + 2]);
    const SegmentAssignment fold_segments = assign_segments(fold_train);

    TrainConfig scout_cfg = config.learner;
    scout_cfg.rng_seed = derive_seed(config.rng_seed, 0x2000 + static_cast<std::uint64_t>(fold));
    TrainConfig reply_cfg = config.learner;
    reply_cfg.rng_seed = derive_seed(config.rng_seed, 0x3000 + static_cast<std::uint64_t>(fold));
    const MfModel scout_model = train_scout_model(fold_train, scout_cfg);
    const MfModel reply_model = train_reply_model(fold_train, reply_cfg);
    const FeatureContext ctx =
        build_feature_context(fold_train, scout_model, reply_model, fold_segments);
    const CandidateSet candidates = build_candidates(fold_val);

    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double alpha = grid[g];
      const std::uint64_t run_seed =
          derive_seed(config.rng_seed, alpha_stream(fold, alpha));
      const AlphaPolicy policy = AlphaPolicy::global(alpha);
      const PseudoLabelSet labels =
          build_pseudo_labels(fold_train, scout_model, reply_model, policy, fold_segments,
                              config.negatives_per_positive, run_seed);
      GbdtConfig meta_cfg = config.meta;
      meta_cfg.rng_seed = derive_seed(run_seed, 0x40);
      const GbdtModel meta_model = train_meta(labels, ctx, meta_cfg);
      const RankFn ranker = [&](CompanyId c, const std::vector<SeekerId>& cands) {
        return bob_rank(meta_model, ctx, c, cands);
      };
      const MethodEvaluation eval =
          evaluate_method("fold", ranker, candidates, fold_segments, config.k);
      FoldOutcome& o = outcomes[g][static_cast<std::size_t>(fold)];
      o.overall = eval.overall.mean_ndcg;
      for (int s = 0; s < kNumSegments; ++s) {
        o.per_segment[static_cast<std::size_t>(s)] =
            eval.per_segment[static_cast<std::size_t>(s)].mean_ndcg;
      }
    }
  }
  return outcomes;
}

TuneResult select_from_folds(const std::vector<std::vector<FoldOutcome>>& outcomes,
                             const std::vector<double>& grid,
                             AlphaPolicy::Mode mode, int folds) {
  TuneResult result;
  const char* mode_name = mode == AlphaPolicy::Mode::Global ? "global" : "per-segment";

  auto fold_mean = [&](std::size_t g, int segment /* -1 = overall */) {
    double sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      const FoldOutcome& o = outcomes[g][static_cast<std::size_t>(f)];
      sum += segment < 0 ? o.overall : o.per_segment[static_cast<std::size_t>(segment)];
    }
    return sum / static_cast<double>(folds);
  };

  if (mode == AlphaPolicy::Mode::Global) {
    double best_score = -1.0;
    double best_alpha = grid.front();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (int f = 0; f < folds; ++f) {
        result.trace.push_back({mode_name, "overall", grid[g], f,
                                outcomes[g][static_cast<std::size_t>(f)].overall});
      }
      const double score = fold_mean(g, -1);
      if (score >= best_score) {  // >= breaks ties toward the larger alpha
        best_score = score;
        best_alpha = grid[g];
      }
    }
    result.policy = AlphaPolicy::global(best_alpha);
  } else {
    std::array<double, kNumSegments> best_alpha{};
    std::array<double, kNumSegments> best_score;
    best_score.fill(-1.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (int f = 0; f < folds; ++f) {
        for (int s = 0; s < kNumSegments; ++s) {
          result.trace.push_back(
              {mode_name, segment_name(static_cast<Segment>(s)), grid[g], f,
               outcomes[g][static_cast<std::size_t>(f)].per_segment[static_cast<std::size_t>(s)]});
        }
      }
      for (int s = 0; s < kNumSegments; ++s) {
        const double score = fold_mean(g, s);
        if (score >= best_score[static_cast<std::size_t>(s)]) {
          best_score[static_cast<std::size_t>(s)] = score;
          best_alpha[static_cast<std::size_t>(s)] = grid[g];
        }
      }
    }
    result.policy = AlphaPolicy::per_segment(best_alpha[0], best_alpha[1], best_alpha[2]);
  }
  return result;
}

TuneResult tune_alpha(const Dataset& train, const TuneConfig& config) {
  const auto outcomes = run_alpha_folds(train, config.grid, config);
  return select_from_folds(outcomes, config.grid, config.mode, config.folds);
}

void write_report_csv(const std::vector<MethodEvaluation>& methods,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "method,segment,ndcg_at_k,num_companies\n";
  for (const MethodEvaluation& m : methods) {
    out << m.method << ",overall," << format_double(m.overall.mean_ndcg) << ','
        << m.overall.num_companies << '\n';
    for (int s = 0; s < kNumSegments; ++s) {
      out << m.method << ',' << segment_name(static_cast<Segment>(s)) << ','
          << format_double(m.per_segment[static_cast<std::size_t>(s)].mean_ndcg) << ','
          << m.per_segment[static_cast<std::size_t>(s)].num_companies << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_trace_csv(const std::vector<TuneTraceRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "mode,segment,alpha,fold,validation_ndcg\n";
  for (const TuneTraceRow& r : rows) {
    out << r.mode << ',' << r.segment << ',' << format_double(r.alpha) << ',' << r.fold
        << ',' << format_double(r.validation_ndcg) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string format_report_table(const std::vector<MethodEvaluation>& methods, int k) {
  std::size_t name_width = 6;
  for (const MethodEvaluation& m : methods) name_width = std::max(name_width, m.method.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s  %10s  %10s  %10s  %10s  %9s\n",
                static_cast<int>(name_width), "method", "overall", "High", "Middle",
                "Low", "companies");
  out << "NDCG@" << k << " by method and activity segment\n" << buf;
  out << std::string(name_width + 2 + 4 * 12 + 9, '-') << '\n';
  for (const MethodEvaluation& m : methods) {
    std::snprintf(buf, sizeof(buf), "%-*s  %10.4f  %10.4f  %10.4f  %10.4f  %9d\n",
                  static_cast<int>(name_width), m.method.c_str(), m.overall.mean_ndcg,
                  m.per_segment[0].mean_ndcg, m.per_segment[1].mean_ndcg,
                  m.per_segment[2].mean_ndcg, m.overall.num_companies);
    out << buf;
  }
  return out.str();
}

}  // namespace reciprank
