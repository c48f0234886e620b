#include "reciprank/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "reciprank/common.hpp"

namespace reciprank {

namespace {

// Sub-stream tags for the per-model RNG. The negative-sampling stream comes
// first and is independent of init/shuffle so other modules can rebuild the
// same pair universe from the same seed.
constexpr std::uint64_t kNegativeStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

struct Example {
  CompanyId company;
  SeekerId seeker;
  float label;
};

double clamped_log(double p) { return std::log(std::max(p, 1e-12)); }

double mean_bce(const MfModel& model, const std::vector<Example>& examples) {
  double loss = 0.0;
  for (const Example& ex : examples) {
    const double p = model.score(ex.company, ex.seeker);
    loss -= ex.label * clamped_log(p) + (1.0 - ex.label) * clamped_log(1.0 - p);
  }
  return loss / static_cast<double>(examples.size());
}

MfModel train_mf(const Dataset& train, const TrainConfig& config,
                 std::vector<Example> examples, std::size_t num_negatives,
                 TrainStats* stats) {
  bool any_pos = false;
  bool any_neg = false;
  for (const Example& ex : examples) {
    (ex.label > 0.5f ? any_pos : any_neg) = true;
  }
  if (!any_pos || !any_neg) throw std::runtime_error("degenerate labels");

  MfModel model(train.num_companies, train.num_seekers, config.latent_dim);
  const int d = config.latent_dim;
  const double init_scale = 0.5 / std::sqrt(static_cast<double>(d));
  Rng init_rng(derive_seed(config.rng_seed, kInitStream));
  for (double& v : model.company_factors()) v = init_rng.uniform(-init_scale, init_scale);
  for (double& v : model.seeker_factors()) v = init_rng.uniform(-init_scale, init_scale);

  if (stats) {
    stats->num_examples = examples.size();
    stats->num_sampled_negatives = num_negatives;
    stats->epoch_losses.clear();
  }

  const double lr = config.learning_rate;
  const double l2 = config.l2_regularization;
  Rng shuffle_rng(derive_seed(config.rng_seed, kShuffleStream));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double>& u = model.company_factors();
  std::vector<double>& v = model.seeker_factors();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (const std::size_t i : order) {
      const Example& ex = examples[i];
      const std::size_t uo = static_cast<std::size_t>(ex.company) * d;
      const std::size_t vo = static_cast<std::size_t>(ex.seeker) * d;
      double z = model.global_bias() + model.company_bias()[ex.company] +
                 model.seeker_bias()[ex.seeker];
      for (int k = 0; k < d; ++k) z += u[uo + k] * v[vo + k];
      const double err = sigmoid(z) - ex.label;
      for (int k = 0; k < d; ++k) {
        const double uk = u[uo + k];
        const double vk = v[vo + k];
        u[uo + k] -= lr * (err * vk + l2 * uk);
        v[vo + k] -= lr * (err * uk + l2 * vk);
      }
      model.company_bias()[ex.company] -= lr * (err + l2 * model.company_bias()[ex.company]);
      model.seeker_bias()[ex.seeker] -= lr * (err + l2 * model.seeker_bias()[ex.seeker]);
      model.global_bias() -= lr * err;
    }
    if (stats) stats->epoch_losses.push_back(mean_bce(model, examples));
  }
  return model;
}

std::size_t count_positives(const std::vector<Example>& examples) {
  std::size_t n = 0;
  for (const Example& ex : examples) {
    if (ex.label > 0.5f) ++n;
  }
  return n;
}

void append_negatives(std::vector<Example>& examples, const Dataset& train,
                      std::size_t count, std::uint64_t rng_seed) {
  for (const auto& [c, j] : sample_unexposed_pairs(train, count, rng_seed)) {
    examples.push_back({c, j, 0.0f});
  }
}

}  // namespace

void validate(const TrainConfig& config) {
  if (config.latent_dim < 1) throw std::invalid_argument("learner: latent_dim must be >= 1");
  if (config.learning_rate <= 0.0) {
    throw std::invalid_argument("learner: learning_rate must be positive");
  }
  if (config.l2_regularization < 0.0) {
    throw std::invalid_argument("learner: l2_regularization must be >= 0");
  }
  if (config.epochs < 0) throw std::invalid_argument("learner: epochs must be >= 0");
  if (config.negatives_per_positive < 0) {
    throw std::invalid_argument("learner: negatives_per_positive must be >= 0");
  }
  if (config.loss != "binary-cross-entropy") {
    throw std::invalid_argument("learner: unsupported loss '" + config.loss + "'");
  }
}

MfModel::MfModel(CompanyId num_companies, SeekerId num_seekers, int latent_dim)
    : num_companies_(num_companies),
      num_seekers_(num_seekers),
      latent_dim_(latent_dim),
      company_bias_(static_cast<std::size_t>(num_companies), 0.0),
      seeker_bias_(static_cast<std::size_t>(num_seekers), 0.0),
      company_factors_(static_cast<std::size_t>(num_companies) * latent_dim, 0.0),
      seeker_factors_(static_cast<std::size_t>(num_seekers) * latent_dim, 0.0) {}

double MfModel::score(CompanyId company, SeekerId seeker) const {
  if (company < 0 || company >= num_companies_ || seeker < 0 || seeker >= num_seekers_) {
    throw std::out_of_range("unknown entity (" + std::to_string(company) + ", " +
                            std::to_string(seeker) + ")");
  }
  const std::size_t uo = static_cast<std::size_t>(company) * latent_dim_;
  const std::size_t vo = static_cast<std::size_t>(seeker) * latent_dim_;
  double z = global_bias_ + company_bias_[static_cast<std::size_t>(company)] +
             seeker_bias_[static_cast<std::size_t>(seeker)];
  for (int k = 0; k < latent_dim_; ++k) z += company_factors_[uo + k] * seeker_factors_[vo + k];
  return sigmoid(z);
}

std::string MfModel::serialize() const {
  std::ostringstream out;
  out << "reciprank-mf v1\n";
  out << num_companies_ << ' ' << num_seekers_ << ' ' << latent_dim_ << '\n';
  out << format_double(global_bias_) << '\n';
  auto write_all = [&out](const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      out << (i ? " " : "") << format_double(vals[i]);
    }
    out << '\n';
  };
  write_all(company_bias_);
  write_all(seeker_bias_);
  write_all(company_factors_);
  write_all(seeker_factors_);
  return out.str();
}

void MfModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize();
  if (!out) throw std::runtime_error("write failed for " + path);
}

MfModel MfModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string tag, version;
  in >> tag >> version;
  if (tag != "reciprank-mf" || version != "v1") {
    throw std::runtime_error(path + ": not a reciprank-mf v1 file");
  }
  CompanyId nc = 0;
  SeekerId nj = 0;
  int d = 0;
  in >> nc >> nj >> d;
  if (!in || nc < 0 || nj < 0 || d < 0) throw std::runtime_error(path + ": bad header");
  MfModel m(nc, nj, d);
  in >> m.global_bias_;
  auto read_all = [&](std::vector<double>& vals) {
    for (double& v : vals) in >> v;
  };
  read_all(m.company_bias_);
  read_all(m.seeker_bias_);
  read_all(m.company_factors_);
  read_all(m.seeker_factors_);
  if (!in) throw std::runtime_error(path + ": truncated parameter block");
  return m;
}

std::vector<std::pair<CompanyId, SeekerId>> sample_unexposed_pairs(const Dataset& dataset,
                                                                   std::size_t count,
                                                                   std::uint64_t rng_seed) {
  const std::uint64_t nj = static_cast<std::uint64_t>(dataset.num_seekers);
  std::unordered_set<std::uint64_t> exposed;
  exposed.reserve(dataset.events.size() * 2);
  for (const InteractionEvent& e : dataset.events) {
    exposed.insert(static_cast<std::uint64_t>(e.company) * nj +
                   static_cast<std::uint64_t>(e.seeker));
  }
  const std::uint64_t universe =
      static_cast<std::uint64_t>(dataset.num_companies) * nj;
  if (count > 0 && exposed.size() >= universe) {
    throw std::runtime_error("no unexposed pairs left to sample");
  }
  Rng rng(derive_seed(rng_seed, kNegativeStream));
  std::vector<std::pair<CompanyId, SeekerId>> out;
  out.reserve(count);
  while (out.size() < count) {
    const CompanyId c = static_cast<CompanyId>(rng.index(dataset.num_companies));
    const SeekerId j = static_cast<SeekerId>(rng.index(dataset.num_seekers));
    if (exposed.count(static_cast<std::uint64_t>(c) * nj + static_cast<std::uint64_t>(j))) {
      continue;
    }
    out.emplace_back(c, j);
  }
  return out;
}

MfModel train_scout_model(const Dataset& train, const TrainConfig& config,
                          TrainStats* stats) {
  validate(config);
  if (train.events.empty()) throw std::invalid_argument("scout model: empty train set");
  std::vector<Example> examples;
  examples.reserve(train.events.size());
  for (const InteractionEvent& e : train.events) {
    examples.push_back({e.company, e.seeker, e.scout_sent ? 1.0f : 0.0f});
  }
  const std::size_t negatives =
      count_positives(examples) * static_cast<std::size_t>(config.negatives_per_positive);
  append_negatives(examples, train, negatives, config.rng_seed);
  return train_mf(train, config, std::move(examples), negatives, stats);
}

MfModel train_reply_model(const Dataset& train, const TrainConfig& config,
                          TrainStats* stats) {
  validate(config);
  std::vector<Example> examples;
  for (const InteractionEvent& e : train.events) {
    if (e.scout_sent) examples.push_back({e.company, e.seeker, e.replied ? 1.0f : 0.0f});
  }
  if (examples.empty()) throw std::runtime_error("no reply observations");
  return train_mf(train, config, std::move(examples), 0, stats);
}

MfModel train_dmp_model(const Dataset& train, const TrainConfig& config,
                        TrainStats* stats) {
  validate(config);
  if (train.events.empty()) throw std::invalid_argument("dmp model: empty train set");
  std::vector<Example> examples;
  examples.reserve(train.events.size());
  for (const InteractionEvent& e : train.events) {
    examples.push_back({e.company, e.seeker, match_label(e) ? 1.0f : 0.0f});
  }
  const std::size_t negatives =
      count_positives(examples) * static_cast<std::size_t>(config.negatives_per_positive);
  append_negatives(examples, train, negatives, config.rng_seed);
  return train_mf(train, config, std::move(examples), negatives, stats);
}

std::vector<double> score_pairs(const PairScoreModel& model,
                                const std::vector<std::pair<CompanyId, SeekerId>>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [c, j] : pairs) out.push_back(model.score(c, j));
  return out;
}

}  // namespace reciprank
