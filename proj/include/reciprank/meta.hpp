#ifndef RECIPRANK_META_HPP
#define RECIPRANK_META_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reciprank/domain.hpp"
#include "reciprank/learners.hpp"
#include "reciprank/pseudo.hpp"

namespace reciprank {

struct GbdtConfig {
  int num_trees = 300;
  int max_depth = 4;
  int min_samples_leaf = 20;
  double shrinkage = 0.1;
  double subsample_fraction = 0.8;
  std::uint64_t rng_seed = 1;
  std::string loss = "squared-error";  // the only supported loss
};

void validate(const GbdtConfig& config);

inline constexpr int kNumMetaFeatures = 11;
const std::vector<std::string>& meta_feature_names();

/// Train-window statistics and directional models needed to featurize a
/// pair. Counts and rates for entities unseen in the train window are 0 and
/// the segment one-hot defaults to Low.
struct FeatureContext {
  const PairScoreModel* scout_model = nullptr;
  const PairScoreModel* reply_model = nullptr;
  SegmentAssignment segments;
  std::vector<double> company_scout_count;
  std::vector<double> company_reply_rate;    // replies received per scout sent
  std::vector<double> seeker_exposure_count;
  std::vector<double> seeker_reply_rate;     // replies per scout received
  CompanyId num_companies = 0;
  SeekerId num_seekers = 0;
};

FeatureContext build_feature_context(const Dataset& train,
                                     const PairScoreModel& scout_model,
                                     const PairScoreModel& reply_model,
                                     const SegmentAssignment& segments);

std::array<double, kNumMetaFeatures> featurize(const FeatureContext& ctx,
                                               CompanyId company, SeekerId seeker);

struct GbdtNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (raw; shrinkage applied by the model)
  bool is_leaf() const { return feature < 0; }
};

struct GbdtTree {
  std::vector<GbdtNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> features) const;
};

/// Gradient-boosted regression trees over a fixed feature vector.
/// prediction = clamp(base_score + shrinkage * sum of tree outputs, 0, 1).
struct GbdtModel {
  double base_score = 0.0;
  double shrinkage = 0.1;
  std::vector<std::string> feature_spec;
  std::vector<GbdtTree> trees;

  double predict(std::span<const double> features) const;

  void save(const std::string& path) const;
  static GbdtModel load(const std::string& path);
  std::string serialize() const;
};

struct GbdtTrainStats {
  // Mean squared error of the raw (unclamped) ensemble output against the
  // targets after each boosting round, over all training rows.
  std::vector<double> round_mse;
};

/// Core trainer on explicit columns; exposed for tests on hand-built data.
/// columns[f][i] is feature f of row i.
GbdtModel train_gbdt(const std::vector<std::vector<double>>& columns,
                     const std::vector<double>& targets,
                     const std::vector<std::string>& feature_names,
                     const GbdtConfig& config, GbdtTrainStats* stats = nullptr);

/// Meta-model fitted to the pseudo-match scores. All-identical targets yield
/// a zero-tree model returning base_score.
GbdtModel train_meta(const PseudoLabelSet& labels, const FeatureContext& ctx,
                     const GbdtConfig& config, GbdtTrainStats* stats = nullptr);

/// Candidates sorted by descending meta-model prediction, ties ascending id.
std::vector<SeekerId> bob_rank(const GbdtModel& model, const FeatureContext& ctx,
                               CompanyId company, const std::vector<SeekerId>& candidates);

/// PairScoreModel adapter: meta-model + featurization context.
class BobScorer final : public PairScoreModel {
 public:
  BobScorer(const GbdtModel& model, const FeatureContext& ctx)
      : model_(&model), ctx_(&ctx) {}
  double score(CompanyId company, SeekerId seeker) const override;

 private:
  const GbdtModel* model_;
  const FeatureContext* ctx_;
};

}  // namespace reciprank

#endif
