#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "reciprank/common.hpp"
#include "reciprank/synth.hpp"

using namespace reciprank;

namespace {

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.num_companies = 40;
  cfg.num_seekers = 200;
  cfg.exposures_per_company = 50;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("ground truth generation is deterministic") {
  SynthConfig cfg = small_config(5);
  cfg.latent_dim = 1;
  const MarketGroundTruth a = generate_ground_truth(cfg);
  const MarketGroundTruth b = generate_ground_truth(cfg);
  CHECK(a.scout_company_factors == b.scout_company_factors);
  CHECK(a.reply_seeker_factors == b.reply_seeker_factors);
  CHECK(a.company_bias == b.company_bias);
  CHECK(a.activity_weights == b.activity_weights);
}

TEST_CASE("extreme scout_scale drives probabilities to the limit") {
  SynthConfig cfg = small_config(5);
  cfg.scout_scale = -60.0;
  const MarketGroundTruth t = generate_ground_truth(cfg);
  for (CompanyId c = 0; c < 5; ++c) {
    for (SeekerId j = 0; j < 5; ++j) CHECK(t.p_scout(c, j) < 1e-15);
  }
}

TEST_CASE("probabilities live in (0,1) and match probability is the exact product") {
  const SynthConfig cfg = small_config(11);
  const MarketGroundTruth t = generate_ground_truth(cfg);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const CompanyId c = static_cast<CompanyId>(rng.index(static_cast<std::size_t>(cfg.num_companies)));
    const SeekerId j = static_cast<SeekerId>(rng.index(static_cast<std::size_t>(cfg.num_seekers)));
    const double ps = t.p_scout(c, j);
    const double pr = t.p_reply(c, j);
    CHECK(ps > 0.0);
    CHECK(ps < 1.0);
    CHECK(pr > 0.0);
    CHECK(pr < 1.0);
    CHECK(t.match_probability(c, j) == ps * pr);
  }
}

TEST_CASE("simulated scout labels agree with the analytic mean") {
  // >= 1e5 exposures.
  SynthConfig cfg;
  cfg.num_companies = 500;
  cfg.num_seekers = 3000;
  cfg.exposures_per_company = 220;
  cfg.rng_seed = 17;
  const MarketGroundTruth t = generate_ground_truth(cfg);
  const Dataset d = simulate_log(t, cfg);
  REQUIRE(d.events.size() >= 100000);

  double p_sum = 0.0;
  double scouted = 0.0;
  for (const InteractionEvent& e : d.events) {
    p_sum += t.p_scout(e.company, e.seeker);
    if (e.scout_sent) scouted += 1.0;
  }
  const double analytic = p_sum / static_cast<double>(d.events.size());
  const double empirical = scouted / static_cast<double>(d.events.size());
  CHECK(empirical == doctest::Approx(analytic).epsilon(0.10));
}

TEST_CASE("reply fraction among scouted events tracks the exposure-weighted mean") {
  SynthConfig cfg;
  cfg.num_companies = 500;
  cfg.num_seekers = 3000;
  cfg.exposures_per_company = 220;
  cfg.rng_seed = 23;
  const MarketGroundTruth t = generate_ground_truth(cfg);
  const Dataset d = simulate_log(t, cfg);

  double p_sum = 0.0;
  double replies = 0.0;
  double scouted = 0.0;
  for (const InteractionEvent& e : d.events) {
    if (!e.scout_sent) continue;
    scouted += 1.0;
    p_sum += t.p_reply(e.company, e.seeker);
    if (e.replied) replies += 1.0;
  }
  REQUIRE(scouted > 1000.0);
  CHECK(std::abs(replies / scouted - p_sum / scouted) < 0.02);
}

TEST_CASE("degenerate probabilities produce degenerate logs") {
  SynthConfig cfg = small_config(2);
  cfg.scout_scale = 60.0;
  cfg.reply_scale = 60.0;
  {
    // Bias terms are bounded; +-60 swamps them.
    const MarketGroundTruth t = generate_ground_truth(cfg);
    const Dataset d = simulate_log(t, cfg);
    for (const InteractionEvent& e : d.events) {
      CHECK(e.scout_sent);
      CHECK(e.replied);
    }
  }
  cfg.scout_scale = -60.0;
  {
    const MarketGroundTruth t = generate_ground_truth(cfg);
    const Dataset d = simulate_log(t, cfg);
    for (const InteractionEvent& e : d.events) {
      CHECK_FALSE(e.scout_sent);
      CHECK_FALSE(e.replied);
    }
    CHECK(sparsity(d) == 0.0);
  }
}

TEST_CASE("same seed and config give byte-identical datasets") {
  const SynthConfig cfg = small_config(31);
  const MarketGroundTruth t1 = generate_ground_truth(cfg);
  const MarketGroundTruth t2 = generate_ground_truth(cfg);
  const Dataset a = simulate_log(t1, cfg);
  const Dataset b = simulate_log(t2, cfg);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].timestamp == b.events[i].timestamp);
    CHECK(a.events[i].company == b.events[i].company);
    CHECK(a.events[i].seeker == b.events[i].seeker);
    CHECK(a.events[i].scout_sent == b.events[i].scout_sent);
    CHECK(a.events[i].replied == b.events[i].replied);
  }
}

TEST_CASE("funnel invariant holds on every simulated event") {
  const SynthConfig cfg = small_config(41);
  const Dataset d = simulate_log(generate_ground_truth(cfg), cfg);
  for (const InteractionEvent& e : d.events) {
    if (e.replied) CHECK(e.scout_sent);
  }
  CHECK_NOTHROW(validate(d));
}

TEST_CASE("oracle_rank orders by true match probability") {
  const SynthConfig cfg = small_config(43);
  const MarketGroundTruth t = generate_ground_truth(cfg);

  SUBCASE("two candidates") {
    // Find a pair of seekers with clearly different probabilities.
    const std::vector<SeekerId> cands = {0, 1, 2, 3, 4};
    const auto ranked = oracle_rank(t, 0, cands);
    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
      CHECK(t.match_probability(0, ranked[i]) >= t.match_probability(0, ranked[i + 1]));
    }
  }

  SUBCASE("all-equal probabilities fall back to id order") {
    MarketGroundTruth flat;
    flat.num_companies = 1;
    flat.num_seekers = 10;
    flat.latent_dim = 1;
    flat.scout_scale = 0.0;
    flat.reply_scale = 0.0;
    flat.scout_company_factors = {0.0};
    flat.scout_seeker_factors.assign(10, 0.0);
    flat.reply_company_factors = {0.0};
    flat.reply_seeker_factors.assign(10, 0.0);
    flat.company_bias = {0.0};
    flat.seeker_bias.assign(10, 0.0);
    flat.seeker_popularity.assign(10, 0.0);
    flat.activity_weights = {1.0};
    flat.reply_thinning = {1.0};
    const auto ranked = oracle_rank(flat, 0, {7, 3, 9, 1, 5});
    CHECK(ranked == std::vector<SeekerId>{1, 3, 5, 7, 9});
  }

  SUBCASE("50 random candidates agree with a brute-force sort") {
    Rng rng(99);
    std::vector<SeekerId> cands;
    std::set<SeekerId> used;
    while (cands.size() < 50) {
      const SeekerId j = static_cast<SeekerId>(rng.index(static_cast<std::size_t>(cfg.num_seekers)));
      if (used.insert(j).second) cands.push_back(j);
    }
    std::vector<double> scores;
    scores.reserve(cands.size());
    for (SeekerId j : cands) scores.push_back(t.match_probability(3, j));
    CHECK(oracle_rank(t, 3, cands) == oracles::sort_by_score_desc(cands, scores));
  }
}

TEST_CASE("reply thinning hits the bottom activity tercile exactly") {
  SynthConfig cfg = small_config(51);
  cfg.low_activity_reply_thinning = 10.0;
  const MarketGroundTruth thinned = generate_ground_truth(cfg);
  cfg.low_activity_reply_thinning = 1.0;
  const MarketGroundTruth base = generate_ground_truth(cfg);

  // Same seed: factors identical, only the thinning vector differs.
  CHECK(base.reply_seeker_factors == thinned.reply_seeker_factors);
  int thinned_count = 0;
  for (CompanyId c = 0; c < cfg.num_companies; ++c) {
    const double ratio = thinned.p_reply(c, 0) / base.p_reply(c, 0);
    if (thinned.reply_thinning[static_cast<std::size_t>(c)] < 1.0) {
      ++thinned_count;
      CHECK(ratio == doctest::Approx(0.1).epsilon(1e-12));
    } else {
      CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // Bottom tercile of 40 companies.
  CHECK(thinned_count == 40 - (2 * 40) / 3);
}

TEST_CASE("truth csv round-trips scores bitwise") {
  const SynthConfig cfg = small_config(61);
  const MarketGroundTruth t = generate_ground_truth(cfg);
  std::vector<std::pair<CompanyId, SeekerId>> pairs = {{0, 1}, {3, 7}, {39, 199}};
  const auto path = std::filesystem::temp_directory_path() / "reciprank_truth_test.csv";
  save_truth_csv(t, pairs, path.string());
  const TruthTable loaded = load_truth_csv(path.string());
  REQUIRE(loaded.pairs.size() == 3);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(loaded.pairs[i] == pairs[i]);
    CHECK(loaded.p_scout[i] == t.p_scout(pairs[i].first, pairs[i].second));
    CHECK(loaded.p_reply[i] == t.p_reply(pairs[i].first, pairs[i].second));
  }
  std::filesystem::remove(path);
}
