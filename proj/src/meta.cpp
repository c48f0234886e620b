#include "reciprank/meta.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "reciprank/aggregate.hpp"
#include "reciprank/common.hpp"

namespace reciprank {

void validate(const GbdtConfig& config) {
  if (config.num_trees < 0) throw std::invalid_argument("gbdt: num_trees must be >= 0");
  if (config.max_depth < 1) throw std::invalid_argument("gbdt: max_depth must be >= 1");
  if (config.min_samples_leaf < 1) {
    throw std::invalid_argument("gbdt: min_samples_leaf must be >= 1");
  }
  if (!(config.shrinkage > 0.0 && config.shrinkage <= 1.0)) {
    throw std::invalid_argument("gbdt: shrinkage must be in (0, 1]");
  }
  if (!(config.subsample_fraction > 0.0 && config.subsample_fraction <= 1.0)) {
    throw std::invalid_argument("gbdt: subsample_fraction must be in (0, 1]");
  }
  if (config.loss != "squared-error") {
    throw std::invalid_argument("gbdt: unsupported loss '" + config.loss + "'");
  }
}

const std::vector<std::string>& meta_feature_names() {
  static const std::vector<std::string> names = {
      "p_scout_hat",        "p_reply_hat",        "product",
      "harmonic_mean",      "company_scout_count", "company_reply_rate",
      "seeker_exposure_count", "seeker_reply_rate", "segment_high",
      "segment_middle",     "segment_low"};
  return names;
}

FeatureContext build_feature_context(const Dataset& train,
                                     const PairScoreModel& scout_model,
                                     const PairScoreModel& reply_model,
                                     const SegmentAssignment& segments) {
  FeatureContext ctx;
  ctx.scout_model = &scout_model;
  ctx.reply_model = &reply_model;
  ctx.segments = segments;
  ctx.num_companies = train.num_companies;
  ctx.num_seekers = train.num_seekers;

  const std::size_t nc = static_cast<std::size_t>(train.num_companies);
  const std::size_t nj = static_cast<std::size_t>(train.num_seekers);
  std::vector<double> scouts_sent(nc, 0.0), replies_got(nc, 0.0);
  std::vector<double> exposures(nj, 0.0), scouts_received(nj, 0.0), replies_sent(nj, 0.0);
  for (const InteractionEvent& e : train.events) {
    const auto c = static_cast<std::size_t>(e.company);
    const auto j = static_cast<std::size_t>(e.seeker);
    exposures[j] += 1.0;
    if (e.scout_sent) {
      scouts_sent[c] += 1.0;
      scouts_received[j] += 1.0;
      if (e.replied) {
        replies_got[c] += 1.0;
        replies_sent[j] += 1.0;
      }
    }
  }
  ctx.company_scout_count = scouts_sent;
  ctx.company_reply_rate.assign(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    if (scouts_sent[c] > 0.0) ctx.company_reply_rate[c] = replies_got[c] / scouts_sent[c];
  }
  ctx.seeker_exposure_count = exposures;
  ctx.seeker_reply_rate.assign(nj, 0.0);
  for (std::size_t j = 0; j < nj; ++j) {
    if (scouts_received[j] > 0.0) ctx.seeker_reply_rate[j] = replies_sent[j] / scouts_received[j];
  }
  return ctx;
}

std::array<double, kNumMetaFeatures> featurize(const FeatureContext& ctx,
                                               CompanyId company, SeekerId seeker) {
  if (company < 0 || company >= ctx.num_companies || seeker < 0 ||
      seeker >= ctx.num_seekers) {
    throw std::out_of_range("unknown entity (" + std::to_string(company) + ", " +
                            std::to_string(seeker) + ")");
  }
  const double p_scout_hat = ctx.scout_model->score(company, seeker);
  const double p_reply_hat = ctx.reply_model->score(company, seeker);
  const Segment seg = ctx.segments.find(company).value_or(Segment::Low);
  std::array<double, kNumMetaFeatures> f{};
  f[0] = p_scout_hat;
  f[1] = p_reply_hat;
  f[2] = p_scout_hat * p_reply_hat;
  f[3] = aggregate(Aggregator::HarmonicMean, p_scout_hat, p_reply_hat);
  f[4] = ctx.company_scout_count[static_cast<std::size_t>(company)];
  f[5] = ctx.company_reply_rate[static_cast<std::size_t>(company)];
  f[6] = ctx.seeker_exposure_count[static_cast<std::size_t>(seeker)];
  f[7] = ctx.seeker_reply_rate[static_cast<std::size_t>(seeker)];
  f[8] = seg == Segment::High ? 1.0 : 0.0;
  f[9] = seg == Segment::Middle ? 1.0 : 0.0;
  f[10] = seg == Segment::Low ? 1.0 : 0.0;
  return f;
}

double GbdtTree::predict(std::span<const double> features) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const GbdtNode& n = nodes[static_cast<std::size_t>(i)];
    i = features[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

double GbdtModel::predict(std::span<const double> features) const {
  double sum = 0.0;
  for (const GbdtTree& t : trees) sum += t.predict(features);
  return std::clamp(base_score + shrinkage * sum, 0.0, 1.0);
}

namespace {

// Exact greedy split search over presorted per-feature row orderings.
// Orderings are partitioned (stably) at each split, so they never need
// re-sorting below the root.
class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& columns,
             const std::vector<double>& residuals, const GbdtConfig& config)
      : columns_(columns), residuals_(residuals), config_(config) {}

  GbdtTree grow(std::vector<std::vector<std::uint32_t>> sorted_rows) {
    tree_.nodes.clear();
    build(std::move(sorted_rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int build(std::vector<std::vector<std::uint32_t>> sorted, int depth) {
    const std::vector<std::uint32_t>& rows = sorted[0];
    const auto n = static_cast<std::int64_t>(rows.size());
    double sum = 0.0;
    for (std::uint32_t r : rows) sum += residuals_[r];

    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    Split best;
    if (depth < config_.max_depth &&
        n >= 2 * static_cast<std::int64_t>(config_.min_samples_leaf)) {
      best = find_best_split(sorted, sum);
    }
    if (best.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(index)].value =
          sum / static_cast<double>(n);
      return index;
    }

    const std::size_t num_features = sorted.size();
    std::vector<std::vector<std::uint32_t>> left(num_features), right(num_features);
    const std::vector<double>& split_col = columns_[static_cast<std::size_t>(best.feature)];
    for (std::size_t f = 0; f < num_features; ++f) {
      for (std::uint32_t r : sorted[f]) {
        (split_col[r] < best.threshold ? left[f] : right[f]).push_back(r);
      }
    }
    sorted.clear();

    tree_.nodes[static_cast<std::size_t>(index)].feature = best.feature;
    tree_.nodes[static_cast<std::size_t>(index)].threshold = best.threshold;
    const int l = build(std::move(left), depth + 1);
    tree_.nodes[static_cast<std::size_t>(index)].left = l;
    const int r = build(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  Split find_best_split(const std::vector<std::vector<std::uint32_t>>& sorted,
                        double total_sum) const {
    Split best;
    const auto n = static_cast<std::int64_t>(sorted[0].size());
    const double parent_score = total_sum * total_sum / static_cast<double>(n);
    const auto min_leaf = static_cast<std::int64_t>(config_.min_samples_leaf);
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      const std::vector<double>& col = columns_[f];
      const std::vector<std::uint32_t>& ord = sorted[f];
      double left_sum = 0.0;
      for (std::int64_t i = 0; i + 1 < n; ++i) {
        left_sum += residuals_[ord[static_cast<std::size_t>(i)]];
        const double v = col[ord[static_cast<std::size_t>(i)]];
        const double v_next = col[ord[static_cast<std::size_t>(i + 1)]];
        if (v == v_next) continue;  // not a boundary between distinct values
        const std::int64_t left_n = i + 1;
        const std::int64_t right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double right_sum = total_sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                            right_sum * right_sum / static_cast<double>(right_n) -
                            parent_score;
        // Strict > keeps the first candidate in (feature asc, threshold asc)
        // order, so gain ties resolve to the lowest feature index.
        if (gain > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (v + v_next);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& columns_;
  const std::vector<double>& residuals_;
  const GbdtConfig& config_;
  GbdtTree tree_;
};

double tree_output_for_row(const GbdtTree& tree,
                           const std::vector<std::vector<double>>& columns,
                           std::uint32_t row) {
  int i = 0;
  while (!tree.nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const GbdtNode& n = tree.nodes[static_cast<std::size_t>(i)];
    i = columns[static_cast<std::size_t>(n.feature)][row] < n.threshold ? n.left
                                                                        : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(i)].value;
}

}  // namespace

GbdtModel train_gbdt(const std::vector<std::vector<double>>& columns,
                     const std::vector<double>& targets,
                     const std::vector<std::string>& feature_names,
                     const GbdtConfig& config, GbdtTrainStats* stats) {
  validate(config);
  if (columns.empty()) throw std::invalid_argument("gbdt: no feature columns");
  if (columns.size() != feature_names.size()) {
    throw std::invalid_argument("gbdt: feature_names do not match columns");
  }
  const std::size_t n = targets.size();
  if (n == 0) throw std::invalid_argument("gbdt: empty training set");
  for (const auto& col : columns) {
    if (col.size() != n) throw std::invalid_argument("gbdt: ragged columns");
  }

  GbdtModel model;
  model.shrinkage = config.shrinkage;
  model.feature_spec = feature_names;
  model.base_score = std::accumulate(targets.begin(), targets.end(), 0.0) /
                     static_cast<double>(n);
  if (stats) stats->round_mse.clear();

  const auto [tmin, tmax] = std::minmax_element(targets.begin(), targets.end());
  if (*tmin == *tmax) return model;  // constant targets: zero trees

  const std::size_t num_features = columns.size();
  std::vector<std::vector<std::uint32_t>> presorted(num_features);
  for (std::size_t f = 0; f < num_features; ++f) {
    presorted[f].resize(n);
    std::iota(presorted[f].begin(), presorted[f].end(), 0);
    const std::vector<double>& col = columns[f];
    std::stable_sort(presorted[f].begin(), presorted[f].end(),
                     [&col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }

  std::vector<double> ensemble(n, model.base_score);
  std::vector<double> residuals(n);
  Rng subsample_rng(derive_seed(config.rng_seed, 0x6b));
  const bool subsampled = config.subsample_fraction < 1.0;
  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<char> in_sample(n, 1);

  for (int round = 0; round < config.num_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = targets[i] - ensemble[i];

    std::vector<std::vector<std::uint32_t>> node_rows(num_features);
    if (subsampled) {
      const std::size_t take = std::max<std::size_t>(
          1, static_cast<std::size_t>(config.subsample_fraction * static_cast<double>(n)));
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t pick = i + subsample_rng.index(n - i);
        std::swap(all_rows[i], all_rows[pick]);
      }
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t i = 0; i < take; ++i) in_sample[all_rows[i]] = 1;
      for (std::size_t f = 0; f < num_features; ++f) {
        node_rows[f].reserve(take);
        for (std::uint32_t r : presorted[f]) {
          if (in_sample[r]) node_rows[f].push_back(r);
        }
      }
    } else {
      node_rows = presorted;
    }

    TreeGrower grower(columns, residuals, config);
    GbdtTree tree = grower.grow(std::move(node_rows));
    for (std::size_t i = 0; i < n; ++i) {
      ensemble[i] += config.shrinkage *
                     tree_output_for_row(tree, columns, static_cast<std::uint32_t>(i));
    }
    model.trees.push_back(std::move(tree));

    if (stats) {
      double mse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = targets[i] - ensemble[i];
        mse += d * d;
      }
      stats->round_mse.push_back(mse / static_cast<double>(n));
    }
  }
  return model;
}

GbdtModel train_meta(const PseudoLabelSet& labels, const FeatureContext& ctx,
                     const GbdtConfig& config, GbdtTrainStats* stats) {
  if (labels.rows.empty()) throw std::invalid_argument("empty pseudo-label set");
  const std::size_t n = labels.rows.size();
  std::vector<std::vector<double>> columns(kNumMetaFeatures,
                                           std::vector<double>(n, 0.0));
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PseudoRow& row = labels.rows[i];
    const auto f = featurize(ctx, row.company, row.seeker);
    for (int k = 0; k < kNumMetaFeatures; ++k) columns[static_cast<std::size_t>(k)][i] = f[static_cast<std::size_t>(k)];
    targets[i] = row.s_pseudo;
  }
  return train_gbdt(columns, targets, meta_feature_names(), config, stats);
}

std::vector<SeekerId> bob_rank(const GbdtModel& model, const FeatureContext& ctx,
                               CompanyId company, const std::vector<SeekerId>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("bob_rank: empty candidates");
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto f = featurize(ctx, company, candidates[i]);
    scores[i] = model.predict(f);
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

double BobScorer::score(CompanyId company, SeekerId seeker) const {
  const auto f = featurize(*ctx_, company, seeker);
  return model_->predict(f);
}

namespace {

void serialize_node(const GbdtTree& tree, int index, std::ostringstream& out) {
  const GbdtNode& n = tree.nodes[static_cast<std::size_t>(index)];
  if (n.is_leaf()) {
    out << "L " << format_double(n.value) << '\n';
  } else {
    out << "S " << n.feature << ' ' << format_double(n.threshold) << '\n';
    serialize_node(tree, n.left, out);
    serialize_node(tree, n.right, out);
  }
}

int deserialize_node(std::istream& in, GbdtTree& tree) {
  std::string kind;
  if (!(in >> kind)) throw std::runtime_error("gbdt file: truncated tree");
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (kind == "L") {
    double v = 0.0;
    if (!(in >> v)) throw std::runtime_error("gbdt file: bad leaf");
    tree.nodes[static_cast<std::size_t>(index)].value = v;
  } else if (kind == "S") {
    int feature = 0;
    double threshold = 0.0;
    if (!(in >> feature >> threshold)) throw std::runtime_error("gbdt file: bad split");
    tree.nodes[static_cast<std::size_t>(index)].feature = feature;
    tree.nodes[static_cast<std::size_t>(index)].threshold = threshold;
    const int l = deserialize_node(in, tree);
    tree.nodes[static_cast<std::size_t>(index)].left = l;
    const int r = deserialize_node(in, tree);
    tree.nodes[static_cast<std::size_t>(index)].right = r;
  } else {
    throw std::runtime_error("gbdt file: unknown node kind '" + kind + "'");
  }
  return index;
}

}  // namespace

std::string GbdtModel::serialize() const {
  std::ostringstream out;
  out << "reciprank-gbdt v1\n";
  out << "base_score " << format_double(base_score) << '\n';
  out << "shrinkage " << format_double(shrinkage) << '\n';
  out << "features " << feature_spec.size();
  for (const std::string& name : feature_spec) out << ' ' << name;
  out << '\n';
  out << "trees " << trees.size() << '\n';
  for (const GbdtTree& t : trees) {
    out << "tree " << t.nodes.size() << '\n';
    serialize_node(t, 0, out);
  }
  return out.str();
}

void GbdtModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize();
  if (!out) throw std::runtime_error("write failed for " + path);
}

GbdtModel GbdtModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string tag, version, word;
  in >> tag >> version;
  if (tag != "reciprank-gbdt" || version != "v1") {
    throw std::runtime_error(path + ": not a reciprank-gbdt v1 file");
  }
  GbdtModel m;
  std::size_t num_features = 0, num_trees = 0;
  in >> word >> m.base_score;
  if (word != "base_score") throw std::runtime_error(path + ": expected base_score");
  in >> word >> m.shrinkage;
  if (word != "shrinkage") throw std::runtime_error(path + ": expected shrinkage");
  in >> word >> num_features;
  if (word != "features") throw std::runtime_error(path + ": expected features");
  m.feature_spec.resize(num_features);
  for (std::string& name : m.feature_spec) in >> name;
  in >> word >> num_trees;
  if (word != "trees") throw std::runtime_error(path + ": expected trees");
  for (std::size_t t = 0; t < num_trees; ++t) {
    std::size_t num_nodes = 0;
    in >> word >> num_nodes;
    if (word != "tree") throw std::runtime_error(path + ": expected tree");
    GbdtTree tree;
    tree.nodes.reserve(num_nodes);
    deserialize_node(in, tree);
    if (tree.nodes.size() != num_nodes) {
      throw std::runtime_error(path + ": tree node count mismatch");
    }
    m.trees.push_back(std::move(tree));
  }
  if (!in) throw std::runtime_error(path + ": truncated model");
  return m;
}

}  // namespace reciprank
