#ifndef RECIPRANK_LEARNERS_HPP
#define RECIPRANK_LEARNERS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reciprank/domain.hpp"

namespace reciprank {

/// Common contract of anything that scores a (company, seeker) pair.
/// Scores are probabilities in [0, 1]; out-of-range ids raise
/// "unknown entity".
class PairScoreModel {
 public:
  virtual ~PairScoreModel() = default;
  virtual double score(CompanyId company, SeekerId seeker) const = 0;
};

struct TrainConfig {
  int latent_dim = 8;
  double learning_rate = 0.05;
  double l2_regularization = 0.03;
  int epochs = 15;
  int negatives_per_positive = 4;
  std::uint64_t rng_seed = 1;
  std::string loss = "binary-cross-entropy";  // the only supported loss
};

void validate(const TrainConfig& config);

/// Logistic matrix factorization:
/// score = sigmoid(global_bias + b_c + b_j + <u_c, v_j>).
class MfModel final : public PairScoreModel {
 public:
  MfModel() = default;
  MfModel(CompanyId num_companies, SeekerId num_seekers, int latent_dim);

  double score(CompanyId company, SeekerId seeker) const override;

  CompanyId num_companies() const { return num_companies_; }
  SeekerId num_seekers() const { return num_seekers_; }
  int latent_dim() const { return latent_dim_; }

  void save(const std::string& path) const;
  static MfModel load(const std::string& path);
  std::string serialize() const;

  // Parameters are public to the trainer and tests via these accessors.
  std::vector<double>& company_factors() { return company_factors_; }
  std::vector<double>& seeker_factors() { return seeker_factors_; }
  std::vector<double>& company_bias() { return company_bias_; }
  std::vector<double>& seeker_bias() { return seeker_bias_; }
  double& global_bias() { return global_bias_; }
  const std::vector<double>& company_factors() const { return company_factors_; }
  const std::vector<double>& seeker_factors() const { return seeker_factors_; }

 private:
  CompanyId num_companies_ = 0;
  SeekerId num_seekers_ = 0;
  int latent_dim_ = 0;
  double global_bias_ = 0.0;
  std::vector<double> company_bias_;
  std::vector<double> seeker_bias_;
  std::vector<double> company_factors_;  // row-major num_companies x d
  std::vector<double> seeker_factors_;   // row-major num_seekers x d
};

struct TrainStats {
  std::vector<double> epoch_losses;  // mean BCE over the training examples
  std::size_t num_examples = 0;
  std::size_t num_sampled_negatives = 0;
};

/// Directional company->seeker model: label = scout_sent over all exposure
/// events, plus negatives_per_positive sampled unexposed pairs per positive.
MfModel train_scout_model(const Dataset& train, const TrainConfig& config,
                          TrainStats* stats = nullptr);

/// Directional seeker->company model: label = replied, trained only on
/// scouted events (reply is undefined otherwise); no sampled negatives.
MfModel train_reply_model(const Dataset& train, const TrainConfig& config,
                          TrainStats* stats = nullptr);

/// Direct match prediction: label = match over all exposure events, plus
/// sampled unexposed negatives per match-positive.
MfModel train_dmp_model(const Dataset& train, const TrainConfig& config,
                        TrainStats* stats = nullptr);

/// Batch scoring; element i is model.score(pairs[i]).
std::vector<double> score_pairs(const PairScoreModel& model,
                                const std::vector<std::pair<CompanyId, SeekerId>>& pairs);

/// Uniform samples from the complement of the dataset's exposed pair set
/// (with replacement). Shared by DMP training and pseudo-label construction
/// so both can build the identical pair universe from the same seed.
std::vector<std::pair<CompanyId, SeekerId>> sample_unexposed_pairs(const Dataset& dataset,
                                                                   std::size_t count,
                                                                   std::uint64_t rng_seed);

}  // namespace reciprank

#endif
