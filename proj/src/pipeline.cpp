#include "reciprank/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "reciprank/aggregate.hpp"
#include "reciprank/common.hpp"

namespace fs = std::filesystem;

namespace reciprank {

namespace {

// Derivation streams for per-stage seeds.
constexpr std::uint64_t kScoutStream = 0x101;
constexpr std::uint64_t kReplyStream = 0x102;
constexpr std::uint64_t kDmpStream = 0x103;  // shared with pseudo labels
constexpr std::uint64_t kMetaStream = 0x104;
constexpr std::uint64_t kTuneStream = 0x105;

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string sec_synth(const SynthConfig& s) {
  std::ostringstream o;
  o << "num_companies=" << s.num_companies << ";num_seekers=" << s.num_seekers
    << ";latent_dim=" << s.latent_dim
    << ";exposures_per_company=" << s.exposures_per_company
    << ";scout_scale=" << format_double(s.scout_scale)
    << ";reply_scale=" << format_double(s.reply_scale)
    << ";company_bias_std=" << format_double(s.company_bias_std)
    << ";seeker_bias_std=" << format_double(s.seeker_bias_std)
    << ";seeker_popularity_std=" << format_double(s.seeker_popularity_std)
    << ";funnel_strength=" << format_double(s.funnel_strength)
    << ";segment_activity_skew=" << format_double(s.segment_activity_skew)
    << ";low_activity_reply_thinning=" << format_double(s.low_activity_reply_thinning);
  return o.str();
}

std::string sec_split(const SplitConfig& s) {
  return "train_fraction=" + format_double(s.train_fraction);
}

std::string sec_learner(const TrainConfig& c) {
  std::ostringstream o;
  o << "latent_dim=" << c.latent_dim
    << ";learning_rate=" << format_double(c.learning_rate)
    << ";l2_regularization=" << format_double(c.l2_regularization)
    << ";epochs=" << c.epochs << ";negatives_per_positive=" << c.negatives_per_positive
    << ";loss=" << c.loss;
  return o.str();
}

std::string sec_meta(const GbdtConfig& c) {
  std::ostringstream o;
  o << "num_trees=" << c.num_trees << ";max_depth=" << c.max_depth
    << ";min_samples_leaf=" << c.min_samples_leaf
    << ";shrinkage=" << format_double(c.shrinkage)
    << ";subsample_fraction=" << format_double(c.subsample_fraction)
    << ";loss=" << c.loss;
  return o.str();
}

std::string policy_text(const AlphaPolicy& policy) {
  if (policy.mode == AlphaPolicy::Mode::Global) {
    return "global " + format_double(policy.global_alpha);
  }
  return "per-segment " + format_double(policy.segment_alphas[0]) + ' ' +
         format_double(policy.segment_alphas[1]) + ' ' +
         format_double(policy.segment_alphas[2]);
}

AlphaPolicy parse_policy_text(const std::string& text) {
  std::istringstream in(text);
  std::string mode;
  in >> mode;
  if (mode == "global") {
    double a = 0.0;
    if (!(in >> a)) throw std::runtime_error("bad policy text: " + text);
    return AlphaPolicy::global(a);
  }
  if (mode == "per-segment") {
    double h = 0.0, m = 0.0, l = 0.0;
    if (!(in >> h >> m >> l)) throw std::runtime_error("bad policy text: " + text);
    return AlphaPolicy::per_segment(h, m, l);
  }
  throw std::runtime_error("bad policy text: " + text);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string hex_key(const std::string& key) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(key)));
  return buf;
}

std::size_t boundary_index(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

void validate(const ExperimentConfig& config) {
  validate(config.synth);
  validate(config.learner);
  validate(config.meta);
  if (!(config.split.train_fraction > 0.0 && config.split.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in (0, 1)");
  }
  if (config.eval.k < 1) throw std::invalid_argument("eval: k must be >= 1");
  if (config.eval.folds < 1) throw std::invalid_argument("eval: folds must be >= 1");
  if (config.eval.global_alpha_grid.empty() || config.eval.segment_alpha_grid.empty()) {
    throw std::invalid_argument("eval: alpha grids must be non-empty");
  }
  for (double a : config.eval.global_alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("eval: alpha outside [0, 1]");
  }
  for (double a : config.eval.segment_alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("eval: alpha outside [0, 1]");
  }
  if (config.eval.seeds.empty()) throw std::invalid_argument("eval: seeds must be non-empty");
  if (config.workdir.empty()) throw std::invalid_argument("paths: workdir must be set");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& message) {
    throw std::runtime_error("config line " + std::to_string(line_no) + ": " + message);
  };
  auto parse_double_list = [&](const std::string& value) {
    std::vector<double> out;
    for (const std::string& item : split_csv_line(value)) {
      out.push_back(parse_double(trim(item), "list item"));
    }
    return out;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      section = t.substr(1, t.size() - 2);
      if (section != "synth" && section != "split" && section != "learner" &&
          section != "meta" && section != "eval" && section != "paths") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) fail("key outside any section");

    if (section == "synth") {
      SynthConfig& s = config.synth;
      if (key == "num_companies") s.num_companies = static_cast<CompanyId>(parse_int(value, key));
      else if (key == "num_seekers") s.num_seekers = static_cast<SeekerId>(parse_int(value, key));
      else if (key == "latent_dim") s.latent_dim = static_cast<int>(parse_int(value, key));
      else if (key == "exposures_per_company") s.exposures_per_company = static_cast<int>(parse_int(value, key));
      else if (key == "scout_scale") s.scout_scale = parse_double(value, key);
      else if (key == "reply_scale") s.reply_scale = parse_double(value, key);
      else if (key == "company_bias_std") s.company_bias_std = parse_double(value, key);
      else if (key == "seeker_bias_std") s.seeker_bias_std = parse_double(value, key);
      else if (key == "seeker_popularity_std") s.seeker_popularity_std = parse_double(value, key);
      else if (key == "funnel_strength") s.funnel_strength = parse_double(value, key);
      else if (key == "segment_activity_skew") s.segment_activity_skew = parse_double(value, key);
      else if (key == "low_activity_reply_thinning") s.low_activity_reply_thinning = parse_double(value, key);
      else fail("unknown key '" + key + "' in [synth]");
    } else if (section == "split") {
      if (key == "train_fraction") config.split.train_fraction = parse_double(value, key);
      else fail("unknown key '" + key + "' in [split]");
    } else if (section == "learner") {
      TrainConfig& c = config.learner;
      if (key == "latent_dim") c.latent_dim = static_cast<int>(parse_int(value, key));
      else if (key == "learning_rate") c.learning_rate = parse_double(value, key);
      else if (key == "l2_regularization") c.l2_regularization = parse_double(value, key);
      else if (key == "epochs") c.epochs = static_cast<int>(parse_int(value, key));
      else if (key == "negatives_per_positive") c.negatives_per_positive = static_cast<int>(parse_int(value, key));
      else if (key == "loss") c.loss = value;
      else fail("unknown key '" + key + "' in [learner]");
    } else if (section == "meta") {
      GbdtConfig& c = config.meta;
      if (key == "num_trees") c.num_trees = static_cast<int>(parse_int(value, key));
      else if (key == "max_depth") c.max_depth = static_cast<int>(parse_int(value, key));
      else if (key == "min_samples_leaf") c.min_samples_leaf = static_cast<int>(parse_int(value, key));
      else if (key == "shrinkage") c.shrinkage = parse_double(value, key);
      else if (key == "subsample_fraction") c.subsample_fraction = parse_double(value, key);
      else if (key == "loss") c.loss = value;
      else fail("unknown key '" + key + "' in [meta]");
    } else if (section == "eval") {
      EvalSection& e = config.eval;
      if (key == "k") e.k = static_cast<int>(parse_int(value, key));
      else if (key == "folds") e.folds = static_cast<int>(parse_int(value, key));
      else if (key == "global_alpha_grid") e.global_alpha_grid = parse_double_list(value);
      else if (key == "segment_alpha_grid") e.segment_alpha_grid = parse_double_list(value);
      else if (key == "seeds") {
        e.seeds.clear();
        for (const std::string& item : split_csv_line(value)) {
          e.seeds.push_back(static_cast<std::uint64_t>(parse_int(trim(item), "seed")));
        }
      } else fail("unknown key '" + key + "' in [eval]");
    } else {  // paths
      if (key == "workdir") config.workdir = value;
      else fail("unknown key '" + key + "' in [paths]");
    }
  }
  validate(config);
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config_text(read_file(path));
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[synth]\n"
    << "num_companies = " << c.synth.num_companies << '\n'
    << "num_seekers = " << c.synth.num_seekers << '\n'
    << "latent_dim = " << c.synth.latent_dim << '\n'
    << "exposures_per_company = " << c.synth.exposures_per_company << '\n'
    << "scout_scale = " << format_double(c.synth.scout_scale) << '\n'
    << "reply_scale = " << format_double(c.synth.reply_scale) << '\n'
    << "company_bias_std = " << format_double(c.synth.company_bias_std) << '\n'
    << "seeker_bias_std = " << format_double(c.synth.seeker_bias_std) << '\n'
    << "seeker_popularity_std = " << format_double(c.synth.seeker_popularity_std) << '\n'
    << "funnel_strength = " << format_double(c.synth.funnel_strength) << '\n'
    << "segment_activity_skew = " << format_double(c.synth.segment_activity_skew) << '\n'
    << "low_activity_reply_thinning = "
    << format_double(c.synth.low_activity_reply_thinning) << '\n'
    << "\n[split]\n"
    << "train_fraction = " << format_double(c.split.train_fraction) << '\n'
    << "\n[learner]\n"
    << "latent_dim = " << c.learner.latent_dim << '\n'
    << "learning_rate = " << format_double(c.learner.learning_rate) << '\n'
    << "l2_regularization = " << format_double(c.learner.l2_regularization) << '\n'
    << "epochs = " << c.learner.epochs << '\n'
    << "negatives_per_positive = " << c.learner.negatives_per_positive << '\n'
    << "loss = " << c.learner.loss << '\n'
    << "\n[meta]\n"
    << "num_trees = " << c.meta.num_trees << '\n'
    << "max_depth = " << c.meta.max_depth << '\n'
    << "min_samples_leaf = " << c.meta.min_samples_leaf << '\n'
    << "shrinkage = " << format_double(c.meta.shrinkage) << '\n'
    << "subsample_fraction = " << format_double(c.meta.subsample_fraction) << '\n'
    << "loss = " << c.meta.loss << '\n'
    << "\n[eval]\n"
    << "k = " << c.eval.k << '\n'
    << "folds = " << c.eval.folds << '\n'
    << "global_alpha_grid = " << join_doubles(c.eval.global_alpha_grid) << '\n'
    << "segment_alpha_grid = " << join_doubles(c.eval.segment_alpha_grid) << '\n'
    << "seeds = " << join_seeds(c.eval.seeds) << '\n'
    << "\n[paths]\n"
    << "workdir = " << c.workdir << '\n';
  return o.str();
}

std::string bob_global_method_name(double alpha) {
  return "bob-global-" + format_double(alpha);
}

std::string SeedRunner::alpha_tag(double alpha) { return "g" + format_double(alpha); }

SeedRunner::SeedRunner(const ExperimentConfig& config, std::uint64_t seed,
                       const PipelineOptions& options)
    : config_(config), seed_(seed), options_(options) {
  dir_ = fs::path(config_.workdir) / ("seed_" + std::to_string(seed));
  fs::create_directories(dir_);
}

bool SeedRunner::stage_cached(const std::string& stage, const std::string& key,
                              const std::vector<std::string>& files) const {
  if (options_.force) return false;
  const fs::path stamp = dir_ / (stage + ".stamp");
  if (!fs::exists(stamp)) return false;
  for (const std::string& f : files) {
    if (!fs::exists(dir_ / f)) return false;
  }
  return trim(read_file(stamp)) == hex_key(key);
}

void SeedRunner::write_stamp(const std::string& stage, const std::string& key) const {
  write_file(dir_ / (stage + ".stamp"), hex_key(key) + "\n");
}

void SeedRunner::require_file(const std::string& file,
                              const std::string& prior_subcommand) const {
  if (!fs::exists(dir_ / file)) {
    throw std::runtime_error("missing " + (dir_ / file).string() + "; run `reciprank " +
                             prior_subcommand + "` first");
  }
}

std::string SeedRunner::key_synth() const {
  return "synth|" + sec_synth(config_.synth) + '|' + sec_split(config_.split) +
         "|full_truth=" + (options_.full_truth ? "1" : "0") +
         "|seed=" + std::to_string(seed_);
}

std::string SeedRunner::key_split() const {
  return "split|" + sec_synth(config_.synth) + '|' + sec_split(config_.split) +
         "|seed=" + std::to_string(seed_);
}

std::string SeedRunner::key_models() const {
  return "models|" + key_split() + '|' + sec_learner(config_.learner);
}

std::string SeedRunner::key_dmp() const {
  return "dmp|" + key_split() + '|' + sec_learner(config_.learner);
}

std::string SeedRunner::key_pseudo(const AlphaPolicy& policy) const {
  return "pseudo|" + key_models() + "|policy=" + policy_text(policy);
}

std::string SeedRunner::key_meta(const std::string& tag) const {
  const fs::path pseudo = dir_ / ("pseudo_" + tag + ".csv");
  const std::string content = fs::exists(pseudo) ? read_file(pseudo) : "";
  return "meta|" + hex_key(content) + '|' + sec_meta(config_.meta) + "|tag=" + tag;
}

std::string SeedRunner::key_tuning(AlphaPolicy::Mode mode) const {
  const bool global = mode == AlphaPolicy::Mode::Global;
  return std::string("tuning|") + (global ? "global" : "per-segment") + '|' +
         key_models() + '|' + sec_meta(config_.meta) +
         "|k=" + std::to_string(config_.eval.k) +
         "|folds=" + std::to_string(config_.eval.folds) + "|grid=" +
         join_doubles(global ? config_.eval.global_alpha_grid
                             : config_.eval.segment_alpha_grid);
}

Dataset SeedRunner::load_events() const {
  return load_events_csv((dir_ / "events.csv").string(), config_.synth.num_companies,
                         config_.synth.num_seekers);
}

Dataset SeedRunner::load_train() const {
  return load_events_csv((dir_ / "train.csv").string(), config_.synth.num_companies,
                         config_.synth.num_seekers);
}

Dataset SeedRunner::load_test() const {
  return load_events_csv((dir_ / "test.csv").string(), config_.synth.num_companies,
                         config_.synth.num_seekers);
}

SegmentAssignment SeedRunner::load_segments() const {
  const fs::path path = dir_ / "segments.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "company_id,segment") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  SegmentAssignment out;
  out.by_company.assign(static_cast<std::size_t>(config_.synth.num_companies),
                        Segment::Low);
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != 2) throw std::runtime_error(path.string() + ": bad row");
    const auto c = static_cast<std::size_t>(parse_int(fields[0], "company_id"));
    const auto seg = parse_segment(fields[1]);
    if (c >= out.by_company.size() || !seg) {
      throw std::runtime_error(path.string() + ": bad row '" + t + "'");
    }
    out.by_company[c] = *seg;
  }
  return out;
}

void SeedRunner::build_synth() {
  SynthConfig sc = config_.synth;
  sc.rng_seed = seed_;
  const MarketGroundTruth truth = generate_ground_truth(sc);
  const Dataset data = simulate_log(truth, sc);
  save_events_csv(data, (dir_ / "events.csv").string());

  std::vector<std::pair<CompanyId, SeekerId>> pairs;
  if (options_.full_truth) {
    pairs.reserve(static_cast<std::size_t>(sc.num_companies) *
                  static_cast<std::size_t>(sc.num_seekers));
    for (CompanyId c = 0; c < sc.num_companies; ++c) {
      for (SeekerId j = 0; j < sc.num_seekers; ++j) pairs.emplace_back(c, j);
    }
  } else {
    // Only pairs that can appear as test candidates, to bound file size.
    const std::size_t idx = boundary_index(data.events.size(), config_.split.train_fraction);
    if (idx >= data.events.size()) throw std::runtime_error("degenerate split");
    const std::int64_t boundary = data.events[idx].timestamp;
    std::set<std::pair<CompanyId, SeekerId>> dedup;
    for (const InteractionEvent& e : data.events) {
      if (e.timestamp >= boundary) dedup.emplace(e.company, e.seeker);
    }
    pairs.assign(dedup.begin(), dedup.end());
  }
  save_truth_csv(truth, pairs, (dir_ / "truth.csv").string());
  write_stamp("synth", key_synth());
}

void SeedRunner::build_split() {
  require_file("events.csv", "synth");
  const Dataset data = load_events();
  const std::size_t idx = boundary_index(data.events.size(), config_.split.train_fraction);
  if (idx >= data.events.size()) throw std::runtime_error("degenerate split");
  const TimeSplit split = split_by_time(data, data.events[idx].timestamp);
  save_events_csv(split.train, (dir_ / "train.csv").string());
  save_events_csv(split.test, (dir_ / "test.csv").string());
  write_file(dir_ / "boundary.txt", std::to_string(split.boundary_timestamp) + "\n");

  const SegmentAssignment segments = assign_segments(split.train);
  std::ostringstream seg;
  seg << "company_id,segment\n";
  for (std::size_t c = 0; c < segments.by_company.size(); ++c) {
    seg << c << ',' << segment_name(segments.by_company[c]) << '\n';
  }
  write_file(dir_ / "segments.csv", seg.str());
  write_stamp("split", key_split());
}

void SeedRunner::build_directional() {
  require_file("train.csv", "split");
  const Dataset train = load_train();
  TrainConfig scout_cfg = config_.learner;
  scout_cfg.rng_seed = derive_seed(seed_, kScoutStream);
  train_scout_model(train, scout_cfg).save((dir_ / "scout_model.txt").string());
  TrainConfig reply_cfg = config_.learner;
  reply_cfg.rng_seed = derive_seed(seed_, kReplyStream);
  train_reply_model(train, reply_cfg).save((dir_ / "reply_model.txt").string());
  write_stamp("models", key_models());
}

void SeedRunner::build_dmp() {
  require_file("train.csv", "split");
  const Dataset train = load_train();
  TrainConfig dmp_cfg = config_.learner;
  dmp_cfg.rng_seed = derive_seed(seed_, kDmpStream);
  train_dmp_model(train, dmp_cfg).save((dir_ / "dmp_model.txt").string());
  write_stamp("dmp", key_dmp());
}

void SeedRunner::build_pseudo(const AlphaPolicy& policy, const std::string& tag) {
  require_file("train.csv", "split");
  require_file("segments.csv", "split");
  require_file("scout_model.txt", "train-directional");
  require_file("reply_model.txt", "train-directional");
  const Dataset train = load_train();
  const SegmentAssignment segments = load_segments();
  const MfModel scout = MfModel::load((dir_ / "scout_model.txt").string());
  const MfModel reply = MfModel::load((dir_ / "reply_model.txt").string());
  const PseudoLabelSet labels =
      build_pseudo_labels(train, scout, reply, policy, segments,
                          config_.learner.negatives_per_positive,
                          derive_seed(seed_, kDmpStream));
  save_pseudo_csv(labels, (dir_ / ("pseudo_" + tag + ".csv")).string());
  write_stamp("pseudo_" + tag, key_pseudo(policy));
}

void SeedRunner::build_meta(const std::string& tag) {
  require_file("pseudo_" + tag + ".csv", "build-pseudo");
  require_file("train.csv", "split");
  require_file("segments.csv", "split");
  require_file("scout_model.txt", "train-directional");
  require_file("reply_model.txt", "train-directional");
  const Dataset train = load_train();
  const SegmentAssignment segments = load_segments();
  const MfModel scout = MfModel::load((dir_ / "scout_model.txt").string());
  const MfModel reply = MfModel::load((dir_ / "reply_model.txt").string());
  const PseudoLabelSet labels =
      load_pseudo_csv((dir_ / ("pseudo_" + tag + ".csv")).string());
  const FeatureContext ctx = build_feature_context(train, scout, reply, segments);
  GbdtConfig meta_cfg = config_.meta;
  meta_cfg.rng_seed = derive_seed(derive_seed(seed_, kMetaStream), fnv1a64(tag));
  train_meta(labels, ctx, meta_cfg).save((dir_ / ("meta_" + tag + ".txt")).string());
  write_stamp("meta_" + tag, key_meta(tag));
}

TuneConfig SeedRunner::tune_config(AlphaPolicy::Mode mode) const {
  TuneConfig tc;
  tc.mode = mode;
  tc.grid = mode == AlphaPolicy::Mode::Global ? config_.eval.global_alpha_grid
                                              : config_.eval.segment_alpha_grid;
  tc.folds = config_.eval.folds;
  tc.k = config_.eval.k;
  tc.learner = config_.learner;
  tc.meta = config_.meta;
  tc.negatives_per_positive = config_.learner.negatives_per_positive;
  tc.rng_seed = derive_seed(seed_, kTuneStream);
  return tc;
}

void SeedRunner::write_tuning_outputs(AlphaPolicy::Mode mode,
                                      const TuneResult& result) const {
  const bool global = mode == AlphaPolicy::Mode::Global;
  const std::string prefix = global ? "global" : "per_segment";
  write_trace_csv(result.trace, (dir_ / ("tune_" + prefix + "_trace.csv")).string());
  write_file(dir_ / ("tuned_" + prefix + ".txt"), policy_text(result.policy) + "\n");
}

TuneResult SeedRunner::build_tuning(AlphaPolicy::Mode mode) {
  require_file("train.csv", "split");
  const Dataset train = load_train();
  const TuneResult result = tune_alpha(train, tune_config(mode));
  write_tuning_outputs(mode, result);
  write_stamp(mode == AlphaPolicy::Mode::Global ? "tuning_global" : "tuning_per_segment",
              key_tuning(mode));
  return result;
}

void SeedRunner::build_tuning_both() {
  require_file("train.csv", "split");
  const Dataset train = load_train();

  // Union grid, one fold sweep; per-(fold, alpha) runs are seeded by the
  // alpha value so the projections match single-mode runs exactly.
  std::vector<double> union_grid = config_.eval.global_alpha_grid;
  for (double a : config_.eval.segment_alpha_grid) {
    if (std::find(union_grid.begin(), union_grid.end(), a) == union_grid.end()) {
      union_grid.push_back(a);
    }
  }
  TuneConfig tc = tune_config(AlphaPolicy::Mode::Global);
  tc.grid = union_grid;
  const auto outcomes = run_alpha_folds(train, union_grid, tc);

  auto project = [&](const std::vector<double>& grid) {
    std::vector<std::vector<FoldOutcome>> out;
    out.reserve(grid.size());
    for (double a : grid) {
      const auto it = std::find(union_grid.begin(), union_grid.end(), a);
      out.push_back(outcomes[static_cast<std::size_t>(it - union_grid.begin())]);
    }
    return out;
  };
  const TuneResult global_result =
      select_from_folds(project(config_.eval.global_alpha_grid),
                        config_.eval.global_alpha_grid, AlphaPolicy::Mode::Global,
                        config_.eval.folds);
  const TuneResult segment_result =
      select_from_folds(project(config_.eval.segment_alpha_grid),
                        config_.eval.segment_alpha_grid, AlphaPolicy::Mode::PerSegment,
                        config_.eval.folds);
  write_tuning_outputs(AlphaPolicy::Mode::Global, global_result);
  write_tuning_outputs(AlphaPolicy::Mode::PerSegment, segment_result);
  write_stamp("tuning_global", key_tuning(AlphaPolicy::Mode::Global));
  write_stamp("tuning_per_segment", key_tuning(AlphaPolicy::Mode::PerSegment));
}

bool SeedRunner::tuning_cached(AlphaPolicy::Mode mode) const {
  const bool global = mode == AlphaPolicy::Mode::Global;
  const std::string prefix = global ? "global" : "per_segment";
  return stage_cached(global ? "tuning_global" : "tuning_per_segment", key_tuning(mode),
                      {"tune_" + prefix + "_trace.csv", "tuned_" + prefix + ".txt"});
}

AlphaPolicy SeedRunner::load_tuned_policy(AlphaPolicy::Mode mode) const {
  const std::string file = mode == AlphaPolicy::Mode::Global ? "tuned_global.txt"
                                                             : "tuned_per_segment.txt";
  require_file(file, "tune-alpha");
  return parse_policy_text(read_file(dir_ / file));
}

void SeedRunner::ensure_synth() {
  if (!stage_cached("synth", key_synth(), {"events.csv", "truth.csv"})) build_synth();
}

void SeedRunner::ensure_split() {
  ensure_synth();
  if (!stage_cached("split", key_split(),
                    {"train.csv", "test.csv", "boundary.txt", "segments.csv"})) {
    build_split();
  }
}

void SeedRunner::ensure_directional() {
  ensure_split();
  if (!stage_cached("models", key_models(), {"scout_model.txt", "reply_model.txt"})) {
    build_directional();
  }
}

void SeedRunner::ensure_dmp() {
  ensure_split();
  if (!stage_cached("dmp", key_dmp(), {"dmp_model.txt"})) build_dmp();
}

void SeedRunner::ensure_pseudo(const AlphaPolicy& policy, const std::string& tag) {
  ensure_directional();
  if (!stage_cached("pseudo_" + tag, key_pseudo(policy), {"pseudo_" + tag + ".csv"})) {
    build_pseudo(policy, tag);
  }
}

void SeedRunner::ensure_meta(const AlphaPolicy& policy, const std::string& tag) {
  ensure_pseudo(policy, tag);
  if (!stage_cached("meta_" + tag, key_meta(tag), {"meta_" + tag + ".txt"})) {
    build_meta(tag);
  }
}

void SeedRunner::ensure_tuning_both() {
  ensure_split();
  if (!tuning_cached(AlphaPolicy::Mode::Global) ||
      !tuning_cached(AlphaPolicy::Mode::PerSegment)) {
    build_tuning_both();
  }
}

std::vector<MethodEvaluation> SeedRunner::evaluate_available() {
  require_file("train.csv", "split");
  require_file("test.csv", "split");
  require_file("segments.csv", "split");
  require_file("scout_model.txt", "train-directional");
  require_file("reply_model.txt", "train-directional");
  require_file("dmp_model.txt", "train-dmp");
  require_file("truth.csv", "synth");

  const Dataset train = load_train();
  const Dataset test = load_test();
  const SegmentAssignment segments = load_segments();
  const MfModel scout = MfModel::load((dir_ / "scout_model.txt").string());
  const MfModel reply = MfModel::load((dir_ / "reply_model.txt").string());
  const MfModel dmp = MfModel::load((dir_ / "dmp_model.txt").string());
  const CandidateSet candidates = build_candidates(test);
  const FeatureContext ctx = build_feature_context(train, scout, reply, segments);

  // Oracle scores come from the truth sidecar; it covers all test pairs.
  const TruthTable truth = load_truth_csv((dir_ / "truth.csv").string());
  std::unordered_map<std::uint64_t, double> oracle_scores;
  oracle_scores.reserve(truth.pairs.size() * 2);
  const auto key_of = [&](CompanyId c, SeekerId j) {
    return static_cast<std::uint64_t>(c) *
               static_cast<std::uint64_t>(config_.synth.num_seekers) +
           static_cast<std::uint64_t>(j);
  };
  for (std::size_t i = 0; i < truth.pairs.size(); ++i) {
    oracle_scores[key_of(truth.pairs[i].first, truth.pairs[i].second)] =
        truth.p_scout[i] * truth.p_reply[i];
  }

  auto sort_by_score = [](const std::vector<SeekerId>& cands,
                          const std::vector<double>& scores) {
    std::vector<std::size_t> idx(cands.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return cands[a] < cands[b];
    });
    std::vector<SeekerId> out(cands.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = cands[idx[i]];
    return out;
  };

  struct NamedRanker {
    std::string method;
    RankFn ranker;
  };
  std::vector<NamedRanker> rankers;
  rankers.push_back({"oracle", [&](CompanyId c, const std::vector<SeekerId>& cands) {
                       std::vector<double> scores(cands.size());
                       for (std::size_t i = 0; i < cands.size(); ++i) {
                         const auto it = oracle_scores.find(key_of(c, cands[i]));
                         if (it == oracle_scores.end()) {
                           throw std::runtime_error(
                               "truth.csv is missing a test pair; rerun `reciprank synth`");
                         }
                         scores[i] = it->second;
                       }
                       return sort_by_score(cands, scores);
                     }});
  for (Aggregator kind : kAllAggregators) {
    rankers.push_back({aggregator_name(kind),
                       [&, kind](CompanyId c, const std::vector<SeekerId>& cands) {
                         return pta_rank(scout, reply, kind, c, cands);
                       }});
  }
  rankers.push_back({"dmp", [&](CompanyId c, const std::vector<SeekerId>& cands) {
                       std::vector<double> scores(cands.size());
                       for (std::size_t i = 0; i < cands.size(); ++i) {
                         scores[i] = dmp.score(c, cands[i]);
                       }
                       return sort_by_score(cands, scores);
                     }});

  // One BoB method per trained meta-model: global tags ascending by alpha,
  // then the personalized model.
  struct BobEntry {
    double alpha;
    std::string tag;
    std::string method;
  };
  std::vector<BobEntry> bob_entries;
  bool has_personalized = false;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("meta_", 0) != 0 || entry.path().extension() != ".txt") continue;
    const std::string tag = name.substr(5, name.size() - 9);
    if (tag == kPersonalizedTag) {
      has_personalized = true;
    } else if (!tag.empty() && tag[0] == 'g') {
      bob_entries.push_back(
          {parse_double(tag.substr(1), "meta tag"), tag, bob_global_method_name(
                                                             parse_double(tag.substr(1), "meta tag"))});
    }
  }
  std::sort(bob_entries.begin(), bob_entries.end(),
            [](const BobEntry& a, const BobEntry& b) { return a.alpha < b.alpha; });
  if (has_personalized) {
    bob_entries.push_back({2.0, kPersonalizedTag, kBobPersonalizedMethod});
  }

  std::vector<GbdtModel> bob_models;
  bob_models.reserve(bob_entries.size());
  for (const BobEntry& e : bob_entries) {
    bob_models.push_back(GbdtModel::load((dir_ / ("meta_" + e.tag + ".txt")).string()));
  }
  for (std::size_t i = 0; i < bob_entries.size(); ++i) {
    const GbdtModel& model = bob_models[i];
    rankers.push_back({bob_entries[i].method,
                       [&ctx, &model](CompanyId c, const std::vector<SeekerId>& cands) {
                         return bob_rank(model, ctx, c, cands);
                       }});
  }

  fs::create_directories(dir_ / "eval");
  std::vector<MethodEvaluation> results;
  std::ostringstream manifest;
  for (const NamedRanker& nr : rankers) {
    MethodEvaluation eval = evaluate_method(nr.method, nr.ranker, candidates, segments,
                                            config_.eval.k, options_.threads);
    write_report_csv({eval}, (dir_ / "eval" / (nr.method + ".csv")).string());
    manifest << nr.method << '\n';
    results.push_back(std::move(eval));
  }
  write_file(dir_ / "eval" / "methods.txt", manifest.str());
  return results;
}

std::string SeedRunner::write_report() {
  require_file("eval/methods.txt", "evaluate");
  std::istringstream manifest(read_file(dir_ / "eval" / "methods.txt"));
  std::string method;
  std::ostringstream report;
  report << "method,segment,ndcg_at_k,num_companies\n";
  std::vector<MethodEvaluation> parsed;
  while (std::getline(manifest, method)) {
    method = trim(method);
    if (method.empty()) continue;
    const std::string fragment = read_file(dir_ / "eval" / (method + ".csv"));
    std::istringstream rows(fragment);
    std::string line;
    std::getline(rows, line);  // header
    MethodEvaluation eval;
    eval.method = method;
    while (std::getline(rows, line)) {
      const std::string t = trim(line);
      if (t.empty()) continue;
      report << t << '\n';
      const auto fields = split_csv_line(t);
      if (fields.size() != 4 || fields[0] != method) {
        throw std::runtime_error("bad fragment row for " + method + ": " + t);
      }
      SegmentScore score{parse_double(fields[2], "ndcg"),
                         static_cast<int>(parse_int(fields[3], "num_companies"))};
      if (fields[1] == "overall") {
        eval.overall = score;
      } else {
        const auto seg = parse_segment(fields[1]);
        if (!seg) throw std::runtime_error("bad segment in fragment: " + t);
        eval.per_segment[static_cast<std::size_t>(*seg)] = score;
      }
    }
    parsed.push_back(std::move(eval));
  }
  write_file(dir_ / "report.csv", report.str());
  return format_report_table(parsed, config_.eval.k);
}

PipelineReport run_pipeline(const ExperimentConfig& config, const PipelineOptions& options) {
  validate(config);
  std::vector<std::uint64_t> seeds =
      options.seed_override ? std::vector<std::uint64_t>{*options.seed_override}
                            : config.eval.seeds;
  fs::create_directories(config.workdir);

  PipelineReport report;
  report.k = config.eval.k;

  for (const std::uint64_t seed : seeds) {
    SeedRunner runner(config, seed, options);
    auto stage = [&](const char* name, auto&& fn) {
      try {
        fn();
      } catch (const std::exception& e) {
        throw std::runtime_error("stage " + std::string(name) + " (seed " +
                                 std::to_string(seed) + "): " + e.what());
      }
    };
    auto log = [&](const std::string& message) {
      if (options.progress) {
        *options.progress << "[seed " << seed << "] " << message << '\n';
        options.progress->flush();
      }
    };

    log("synth");
    stage("synth", [&] { runner.ensure_synth(); });
    log("split");
    stage("split", [&] { runner.ensure_split(); });
    log("train-directional");
    stage("train-directional", [&] { runner.ensure_directional(); });
    log("train-dmp");
    stage("train-dmp", [&] { runner.ensure_dmp(); });
    for (const double alpha : config.eval.global_alpha_grid) {
      const std::string tag = SeedRunner::alpha_tag(alpha);
      log("bob alpha=" + format_double(alpha));
      stage("build-pseudo", [&] { runner.ensure_pseudo(AlphaPolicy::global(alpha), tag); });
      stage("train-meta", [&] { runner.ensure_meta(AlphaPolicy::global(alpha), tag); });
    }
    log("tune-alpha");
    stage("tune-alpha", [&] { runner.ensure_tuning_both(); });

    SeedReport seed_report;
    seed_report.seed = seed;
    stage("tune-alpha", [&] {
      seed_report.tuned_global = runner.load_tuned_policy(AlphaPolicy::Mode::Global);
      seed_report.tuned_per_segment =
          runner.load_tuned_policy(AlphaPolicy::Mode::PerSegment);
    });
    log("bob personalized");
    stage("build-pseudo", [&] {
      runner.ensure_pseudo(seed_report.tuned_per_segment, SeedRunner::kPersonalizedTag);
    });
    stage("train-meta", [&] {
      runner.ensure_meta(seed_report.tuned_per_segment, SeedRunner::kPersonalizedTag);
    });
    log("evaluate");
    stage("evaluate", [&] { seed_report.methods = runner.evaluate_available(); });
    stage("report", [&] {
      const std::string table = runner.write_report();
      if (options.progress) *options.progress << table;
    });
    report.seeds.push_back(std::move(seed_report));
  }

  // Seed-level rows plus medians at the workdir root.
  std::ostringstream seeds_csv;
  seeds_csv << "seed,method,segment,ndcg_at_k,num_companies\n";
  for (const SeedReport& sr : report.seeds) {
    for (const MethodEvaluation& m : sr.methods) {
      seeds_csv << sr.seed << ',' << m.method << ",overall,"
                << format_double(m.overall.mean_ndcg) << ',' << m.overall.num_companies
                << '\n';
      for (int s = 0; s < kNumSegments; ++s) {
        seeds_csv << sr.seed << ',' << m.method << ','
                  << segment_name(static_cast<Segment>(s)) << ','
                  << format_double(m.per_segment[static_cast<std::size_t>(s)].mean_ndcg)
                  << ',' << m.per_segment[static_cast<std::size_t>(s)].num_companies
                  << '\n';
      }
    }
  }
  write_file(fs::path(config.workdir) / "report_seeds.csv", seeds_csv.str());

  const std::vector<MethodEvaluation>& first = report.seeds.front().methods;
  for (std::size_t mi = 0; mi < first.size(); ++mi) {
    MethodEvaluation med;
    med.method = first[mi].method;
    std::vector<double> overall;
    std::array<std::vector<double>, kNumSegments> per_segment;
    for (const SeedReport& sr : report.seeds) {
      if (sr.methods.size() != first.size() || sr.methods[mi].method != med.method) {
        throw std::runtime_error("method sets differ across seeds");
      }
      overall.push_back(sr.methods[mi].overall.mean_ndcg);
      for (int s = 0; s < kNumSegments; ++s) {
        per_segment[static_cast<std::size_t>(s)].push_back(
            sr.methods[mi].per_segment[static_cast<std::size_t>(s)].mean_ndcg);
      }
    }
    med.overall.mean_ndcg = median_of(overall);
    med.overall.num_companies = static_cast<int>(report.seeds.size());
    for (int s = 0; s < kNumSegments; ++s) {
      med.per_segment[static_cast<std::size_t>(s)].mean_ndcg =
          median_of(per_segment[static_cast<std::size_t>(s)]);
      med.per_segment[static_cast<std::size_t>(s)].num_companies =
          static_cast<int>(report.seeds.size());
    }
    report.median.push_back(std::move(med));
  }

  std::ostringstream median_csv;
  median_csv << "method,segment,ndcg_at_k,num_seeds\n";
  for (const MethodEvaluation& m : report.median) {
    median_csv << m.method << ",overall," << format_double(m.overall.mean_ndcg) << ','
               << report.seeds.size() << '\n';
    for (int s = 0; s < kNumSegments; ++s) {
      median_csv << m.method << ',' << segment_name(static_cast<Segment>(s)) << ','
                 << format_double(m.per_segment[static_cast<std::size_t>(s)].mean_ndcg)
                 << ',' << report.seeds.size() << '\n';
    }
  }
  write_file(fs::path(config.workdir) / "report_median.csv", median_csv.str());

  if (options.progress && report.seeds.size() > 1) {
    *options.progress << "\nMedians over " << report.seeds.size() << " seeds\n"
                      << format_report_table(report.median, report.k);
  }
  return report;
}

}  // namespace reciprank
