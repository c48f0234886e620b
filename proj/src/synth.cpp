#include "reciprank/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "reciprank/common.hpp"

namespace reciprank {

namespace {

double dot(const std::vector<double>& a, std::size_t arow, const std::vector<double>& b,
           std::size_t brow, int d) {
  double s = 0.0;
  const std::size_t ao = arow * static_cast<std::size_t>(d);
  const std::size_t bo = brow * static_cast<std::size_t>(d);
  for (int k = 0; k < d; ++k) s += a[ao + k] * b[bo + k];
  return s;
}

}  // namespace

void validate(const SynthConfig& config) {
  if (config.num_companies <= 0 || config.num_seekers <= 0) {
    throw std::invalid_argument("synth: entity counts must be positive");
  }
  if (config.latent_dim < 1) throw std::invalid_argument("synth: latent_dim must be >= 1");
  if (config.exposures_per_company <= 0) {
    throw std::invalid_argument("synth: exposures_per_company must be positive");
  }
  if (config.company_bias_std < 0.0 || config.seeker_bias_std < 0.0 ||
      config.seeker_popularity_std < 0.0) {
    throw std::invalid_argument("synth: bias spreads must be >= 0");
  }
  if (config.segment_activity_skew < 0.0) {
    throw std::invalid_argument("synth: segment_activity_skew must be >= 0");
  }
  if (config.low_activity_reply_thinning < 1.0) {
    throw std::invalid_argument("synth: low_activity_reply_thinning must be >= 1");
  }
}

double MarketGroundTruth::p_scout(CompanyId c, SeekerId j) const {
  const double z = scout_scale + company_bias[static_cast<std::size_t>(c)] +
                   seeker_popularity[static_cast<std::size_t>(j)] +
                   dot(scout_company_factors, static_cast<std::size_t>(c),
                       scout_seeker_factors, static_cast<std::size_t>(j), latent_dim);
  return sigmoid(z);
}

double MarketGroundTruth::p_reply(CompanyId c, SeekerId j) const {
  const double z = reply_scale + seeker_bias[static_cast<std::size_t>(j)] +
                   dot(reply_company_factors, static_cast<std::size_t>(c),
                       reply_seeker_factors, static_cast<std::size_t>(j), latent_dim) +
                   funnel_strength *
                       dot(scout_company_factors, static_cast<std::size_t>(c),
                           scout_seeker_factors, static_cast<std::size_t>(j), latent_dim);
  return reply_thinning[static_cast<std::size_t>(c)] * sigmoid(z);
}

MarketGroundTruth generate_ground_truth(const SynthConfig& config) {
  validate(config);
  Rng rng(config.rng_seed);
  MarketGroundTruth t;
  t.num_companies = config.num_companies;
  t.num_seekers = config.num_seekers;
  t.latent_dim = config.latent_dim;
  t.scout_scale = config.scout_scale;
  t.reply_scale = config.reply_scale;
  t.funnel_strength = config.funnel_strength;

  const std::size_t nc = static_cast<std::size_t>(config.num_companies);
  const std::size_t nj = static_cast<std::size_t>(config.num_seekers);
  const std::size_t d = static_cast<std::size_t>(config.latent_dim);
  const double factor_scale = 1.0 / std::sqrt(static_cast<double>(d));

  auto draw_matrix = [&](std::vector<double>& m, std::size_t rows) {
    m.resize(rows * d);
    for (double& v : m) v = factor_scale * rng.normal();
  };
  draw_matrix(t.scout_company_factors, nc);
  draw_matrix(t.scout_seeker_factors, nj);
  draw_matrix(t.reply_company_factors, nc);
  draw_matrix(t.reply_seeker_factors, nj);

  t.company_bias.resize(nc);
  for (double& v : t.company_bias) v = config.company_bias_std * rng.normal();
  t.seeker_bias.resize(nj);
  for (double& v : t.seeker_bias) v = config.seeker_bias_std * rng.normal();
  t.seeker_popularity.resize(nj);
  for (double& v : t.seeker_popularity) v = config.seeker_popularity_std * rng.normal();

  t.activity_weights.resize(nc);
  for (double& v : t.activity_weights) v = std::exp(config.segment_activity_skew * rng.normal());

  // Bottom tercile by activity weight gets its reply probabilities divided by
  // the thinning factor (heterogeneous-sparsity benchmark).
  t.reply_thinning.assign(nc, 1.0);
  if (config.low_activity_reply_thinning > 1.0) {
    std::vector<CompanyId> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](CompanyId a, CompanyId b) {
      const double wa = t.activity_weights[static_cast<std::size_t>(a)];
      const double wb = t.activity_weights[static_cast<std::size_t>(b)];
      if (wa != wb) return wa > wb;
      return a < b;
    });
    const std::size_t cut2 = (2 * nc) / 3;
    for (std::size_t rank = cut2; rank < nc; ++rank) {
      t.reply_thinning[static_cast<std::size_t>(order[rank])] =
          1.0 / config.low_activity_reply_thinning;
    }
  }
  return t;
}

Dataset simulate_log(const MarketGroundTruth& truth, const SynthConfig& config) {
  validate(config);
  if (truth.num_companies != config.num_companies ||
      truth.num_seekers != config.num_seekers) {
    throw std::invalid_argument("simulate_log: truth dimensions do not match config");
  }
  Rng rng(derive_seed(config.rng_seed, 0x51));

  const std::size_t nc = static_cast<std::size_t>(config.num_companies);
  const std::size_t nj = static_cast<std::size_t>(config.num_seekers);
  const double mean_w =
      std::accumulate(truth.activity_weights.begin(), truth.activity_weights.end(), 0.0) /
      static_cast<double>(nc);

  struct Exposure {
    CompanyId company;
    SeekerId seeker;
  };
  std::vector<Exposure> exposures;
  exposures.reserve(nc * static_cast<std::size_t>(config.exposures_per_company));

  std::vector<SeekerId> pool(nj);
  for (std::size_t c = 0; c < nc; ++c) {
    const double scaled =
        config.exposures_per_company * truth.activity_weights[c] / mean_w;
    const std::size_t count = static_cast<std::size_t>(
        std::clamp<long long>(std::llround(scaled), 1, static_cast<long long>(nj)));
    // Partial Fisher-Yates: distinct seekers per company.
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t pick = i + rng.index(nj - i);
      std::swap(pool[i], pool[pick]);
      exposures.push_back({static_cast<CompanyId>(c), pool[i]});
    }
  }

  rng.shuffle(exposures);

  Dataset out;
  out.num_companies = config.num_companies;
  out.num_seekers = config.num_seekers;
  out.events.reserve(exposures.size());
  std::int64_t ts = 0;
  for (const Exposure& x : exposures) {
    InteractionEvent e;
    e.timestamp = ++ts;
    e.company = x.company;
    e.seeker = x.seeker;
    e.scout_sent = rng.uniform() < truth.p_scout(x.company, x.seeker);
    e.replied = e.scout_sent && rng.uniform() < truth.p_reply(x.company, x.seeker);
    out.events.push_back(e);
  }
  return out;
}

std::vector<SeekerId> oracle_rank(const MarketGroundTruth& truth, CompanyId company,
                                  const std::vector<SeekerId>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("oracle_rank: empty candidates");
  std::vector<SeekerId> out = candidates;
  std::vector<double> m(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    m[i] = truth.match_probability(company, out[i]);
  }
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (m[a] != m[b]) return m[a] > m[b];
    return out[a] < out[b];
  });
  std::vector<SeekerId> ranked(out.size());
  for (std::size_t i = 0; i < idx.size(); ++i) ranked[i] = out[idx[i]];
  return ranked;
}

void save_truth_csv(const MarketGroundTruth& truth,
                    const std::vector<std::pair<CompanyId, SeekerId>>& pairs,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "company_id,seeker_id,p_scout,p_reply\n";
  for (const auto& [c, j] : pairs) {
    out << c << ',' << j << ',' << format_double(truth.p_scout(c, j)) << ','
        << format_double(truth.p_reply(c, j)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

TruthTable load_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "company_id,seeker_id,p_scout,p_reply") {
    throw std::runtime_error(path + ": unexpected truth header");
  }
  TruthTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto fields = split_csv_line(s);
    if (fields.size() != 4) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 4 fields");
    }
    const CompanyId c = static_cast<CompanyId>(parse_int(fields[0], "company_id"));
    const SeekerId j = static_cast<SeekerId>(parse_int(fields[1], "seeker_id"));
    t.pairs.emplace_back(c, j);
    t.p_scout.push_back(parse_double(fields[2], "p_scout"));
    t.p_reply.push_back(parse_double(fields[3], "p_reply"));
    t.num_companies = std::max(t.num_companies, c + 1);
    t.num_seekers = std::max(t.num_seekers, j + 1);
  }
  return t;
}

}  // namespace reciprank
