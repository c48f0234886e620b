#ifndef RECIPRANK_SYNTH_HPP
#define RECIPRANK_SYNTH_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reciprank/domain.hpp"

namespace reciprank {

struct SynthConfig {
  CompanyId num_companies = 300;
  SeekerId num_seekers = 2000;
  int latent_dim = 8;
  // Average exposures per company; individual volumes scale with the
  // company's activity weight.
  int exposures_per_company = 100;
  double scout_scale = -0.7;
  double reply_scale = -1.4;
  // Spread of the per-company scout propensity and per-seeker reply
  // propensity on the logit scale.
  double company_bias_std = 0.8;
  double seeker_bias_std = 1.5;
  // Spread of per-seeker popularity in the scout direction (how much the
  // company side agrees on who to scout).
  double seeker_popularity_std = 1.3;
  // Funnel interaction: weight of the scout-side factor affinity inside the
  // reply logit (seekers reply more readily to well-targeted scouts). 0
  // makes the two directions fully independent.
  double funnel_strength = 1.0;
  // Lognormal sigma of the activity weights; the default spreads company
  // scout volumes over roughly two orders of magnitude.
  double segment_activity_skew = 0.9;
  // >= 1. Divides the reply probabilities of bottom-tercile-activity
  // companies; 1 disables the heterogeneous-sparsity variant.
  double low_activity_reply_thinning = 1.0;
  std::uint64_t rng_seed = 1;
};

void validate(const SynthConfig& config);

/// Latent per-pair probabilities known only to the generator. Directional
/// probabilities use independent factor pairs; the ground-truth match
/// probability is exactly their product.
struct MarketGroundTruth {
  CompanyId num_companies = 0;
  SeekerId num_seekers = 0;
  int latent_dim = 0;
  double scout_scale = 0.0;
  double reply_scale = 0.0;
  double funnel_strength = 0.0;
  std::vector<double> scout_company_factors;  // row-major num_companies x d
  std::vector<double> scout_seeker_factors;   // row-major num_seekers x d
  std::vector<double> reply_company_factors;
  std::vector<double> reply_seeker_factors;
  std::vector<double> company_bias;       // enters the scout direction
  std::vector<double> seeker_bias;        // enters the reply direction
  std::vector<double> seeker_popularity;  // enters the scout direction
  std::vector<double> activity_weights;   // per-company exposure propensity
  std::vector<double> reply_thinning;     // per-company multiplier in (0, 1]

  double p_scout(CompanyId c, SeekerId j) const;
  double p_reply(CompanyId c, SeekerId j) const;
  double match_probability(CompanyId c, SeekerId j) const {
    return p_scout(c, j) * p_reply(c, j);
  }
};

/// Deterministic given config.rng_seed. Factors are zero-mean with scale
/// 1/sqrt(d); activity weights are lognormal with sigma
/// segment_activity_skew.
MarketGroundTruth generate_ground_truth(const SynthConfig& config);

/// Exposure -> scout -> reply funnel. Each company is exposed to a set of
/// distinct seekers sized by its activity weight; scout_sent ~
/// Bernoulli(p_scout); replied ~ Bernoulli(p_reply) only when scouted.
/// Timestamps are 1..n over a seeded global shuffle of the exposures.
Dataset simulate_log(const MarketGroundTruth& truth, const SynthConfig& config);

/// Candidates sorted by descending true match probability, ties by
/// ascending seeker id.
std::vector<SeekerId> oracle_rank(const MarketGroundTruth& truth, CompanyId company,
                                  const std::vector<SeekerId>& candidates);

/// Sidecar `company_id,seeker_id,p_scout,p_reply` for the given pairs.
void save_truth_csv(const MarketGroundTruth& truth,
                    const std::vector<std::pair<CompanyId, SeekerId>>& pairs,
                    const std::string& path);

/// Loaded sidecar rows; enough to score and oracle-rank listed pairs.
struct TruthTable {
  CompanyId num_companies = 0;
  SeekerId num_seekers = 0;
  std::vector<std::pair<CompanyId, SeekerId>> pairs;
  std::vector<double> p_scout;
  std::vector<double> p_reply;
};
TruthTable load_truth_csv(const std::string& path);

}  // namespace reciprank

#endif
