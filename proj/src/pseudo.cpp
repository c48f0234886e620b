#include "reciprank/pseudo.hpp"

#include <fstream>
#include <stdexcept>

#include "reciprank/common.hpp"

namespace reciprank {

AlphaPolicy AlphaPolicy::global(double alpha) {
  AlphaPolicy p;
  p.mode = Mode::Global;
  p.global_alpha = alpha;
  validate(p);
  return p;
}

AlphaPolicy AlphaPolicy::per_segment(double high, double middle, double low) {
  AlphaPolicy p;
  p.mode = Mode::PerSegment;
  p.segment_alphas = {high, middle, low};
  validate(p);
  return p;
}

void validate(const AlphaPolicy& policy) {
  auto check = [](double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("invalid weight");
  };
  if (policy.mode == AlphaPolicy::Mode::Global) {
    check(policy.global_alpha);
  } else {
    for (double a : policy.segment_alphas) check(a);
  }
}

double pseudo_score(bool true_match, double p_scout_hat, double p_reply_hat,
                    double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("invalid weight");
  if (!(p_scout_hat >= 0.0 && p_scout_hat <= 1.0) ||
      !(p_reply_hat >= 0.0 && p_reply_hat <= 1.0)) {
    throw std::invalid_argument("invalid probability");
  }
  const double m = true_match ? 1.0 : 0.0;
  return alpha * m + (1.0 - alpha) * (p_scout_hat * p_reply_hat);
}

double resolve_alpha(const AlphaPolicy& policy, const SegmentAssignment& segments,
                     CompanyId company) {
  validate(policy);
  if (policy.mode == AlphaPolicy::Mode::Global) return policy.global_alpha;
  return policy.segment_alphas[static_cast<int>(segments.at(company))];
}

PseudoLabelSet build_pseudo_labels(const Dataset& train, const PairScoreModel& scout_model,
                                   const PairScoreModel& reply_model,
                                   const AlphaPolicy& policy,
                                   const SegmentAssignment& segments,
                                   int negatives_per_positive, std::uint64_t rng_seed) {
  validate(policy);
  if (negatives_per_positive < 0) {
    throw std::invalid_argument("negatives_per_positive must be >= 0");
  }
  PseudoLabelSet out;
  std::size_t num_matches = 0;
  auto emit = [&](CompanyId c, SeekerId j, bool m) {
    PseudoRow row;
    row.company = c;
    row.seeker = j;
    row.segment = segments.at(c);
    row.true_match = m;
    const double p_scout_hat = scout_model.score(c, j);
    const double p_reply_hat = reply_model.score(c, j);
    row.prediction = p_scout_hat * p_reply_hat;
    row.s_pseudo =
        pseudo_score(m, p_scout_hat, p_reply_hat, policy.alpha_for(row.segment));
    out.rows.push_back(row);
  };
  for (const InteractionEvent& e : train.events) {
    const bool m = match_label(e);
    if (m) ++num_matches;
    emit(e.company, e.seeker, m);
  }
  const std::size_t negatives =
      num_matches * static_cast<std::size_t>(negatives_per_positive);
  for (const auto& [c, j] : sample_unexposed_pairs(train, negatives, rng_seed)) {
    emit(c, j, false);
  }
  return out;
}

void save_pseudo_csv(const PseudoLabelSet& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "company_id,seeker_id,segment,true_match,prediction,s_pseudo\n";
  for (const PseudoRow& r : labels.rows) {
    out << r.company << ',' << r.seeker << ',' << segment_name(r.segment) << ','
        << (r.true_match ? 1 : 0) << ',' << format_double(r.prediction) << ','
        << format_double(r.s_pseudo) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

PseudoLabelSet load_pseudo_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      trim(line) != "company_id,seeker_id,segment,true_match,prediction,s_pseudo") {
    throw std::runtime_error(path + ": unexpected pseudo-label header");
  }
  PseudoLabelSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto fields = split_csv_line(s);
    if (fields.size() != 6) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 6 fields");
    }
    PseudoRow r;
    r.company = static_cast<CompanyId>(parse_int(fields[0], "company_id"));
    r.seeker = static_cast<SeekerId>(parse_int(fields[1], "seeker_id"));
    const auto seg = parse_segment(fields[2]);
    if (!seg) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unknown segment '" + fields[2] + "'");
    }
    r.segment = *seg;
    r.true_match = parse_int(fields[3], "true_match") != 0;
    r.prediction = parse_double(fields[4], "prediction");
    r.s_pseudo = parse_double(fields[5], "s_pseudo");
    out.rows.push_back(r);
  }
  return out;
}

}  // namespace reciprank
