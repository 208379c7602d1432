#include "taps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "taps/util.hpp"

namespace taps {

namespace {

using nlohmann::json;

std::map<std::string, std::size_t> triplet_counts(const std::vector<SlotTriplet>& triplets,
                                                  bool set_mode) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : triplets) {
    auto& c = counts[normalized_key(t)];
    c = set_mode ? 1 : c + 1;
  }
  return counts;
}

double harmonic_f1(double p, double r) {
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

Aggregate mean_of(const std::vector<InstanceScore>& scores) {
  Aggregate agg;
  agg.count = scores.size();
  if (scores.empty()) return agg;
  for (const auto& s : scores) {
    agg.exact_match += s.exact_match;
    agg.f1 += s.f1;
    agg.precision += s.precision;
    agg.recall += s.recall;
  }
  double n = static_cast<double>(scores.size());
  agg.exact_match = 100.0 * agg.exact_match / n;
  agg.f1 = 100.0 * agg.f1 / n;
  agg.precision = 100.0 * agg.precision / n;
  agg.recall = 100.0 * agg.recall / n;
  return agg;
}

json aggregate_to_json(const Aggregate& a) {
  return json{{"em", a.exact_match},
              {"f1", a.f1},
              {"precision", a.precision},
              {"recall", a.recall},
              {"count", a.count}};
}

Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  a.exact_match = j.at("em").get<double>();
  a.f1 = j.at("f1").get<double>();
  a.precision = j.at("precision").get<double>();
  a.recall = j.at("recall").get<double>();
  a.count = j.at("count").get<std::size_t>();
  return a;
}

}  // namespace

const std::vector<std::string> kReasoningTypes = {
    "Plain", "Conflict", "MultiDomain", "MultiPreference", "NoInstructions"};

InstanceScore score_triplets(const std::vector<SlotTriplet>& pred,
                             const std::vector<SlotTriplet>& gold,
                             const ScoreOptions& options) {
  auto pred_counts = triplet_counts(pred, options.set_mode);
  auto gold_counts = triplet_counts(gold, options.set_mode);

  std::size_t pred_total = 0;
  std::size_t gold_total = 0;
  for (const auto& [_, c] : pred_counts) pred_total += c;
  for (const auto& [_, c] : gold_counts) gold_total += c;

  InstanceScore score;
  score.pred_size = pred_total;
  score.gold_size = gold_total;
  if (pred_total == 0 && gold_total == 0) {
    score.exact_match = score.precision = score.recall = score.f1 = 1.0;
    return score;
  }
  if (pred_total == 0 || gold_total == 0) {
    return score;  // all zero
  }

  std::size_t inter = 0;
  for (const auto& [key, c] : pred_counts) {
    auto it = gold_counts.find(key);
    if (it != gold_counts.end()) inter += std::min(c, it->second);
  }
  score.matched = inter;
  score.precision = static_cast<double>(inter) / static_cast<double>(pred_total);
  score.recall = static_cast<double>(inter) / static_cast<double>(gold_total);
  score.f1 = harmonic_f1(score.precision, score.recall);
  score.exact_match = (pred_counts == gold_counts) ? 1.0 : 0.0;
  return score;
}

InstanceScore score_instance(const std::vector<ApiCall>& pred,
                             const std::vector<ApiCall>& gold,
                             const ScoreOptions& options) {
  return score_triplets(to_triplets(pred), to_triplets(gold), options);
}

Report aggregate(const std::vector<InstanceScore>& scores,
                 const std::vector<std::string>& types,
                 const AggregateOptions& options) {
  if (!types.empty() && types.size() != scores.size()) {
    throw Error("aggregate: types length does not match scores length");
  }
  Report report;
  if (options.micro) {
    // Micro mode pools triplet counts across the dataset; EM stays a
    // per-instance mean since it has no corpus-level reading.
    Aggregate agg = mean_of(scores);
    std::size_t matched = 0;
    std::size_t pred_total = 0;
    std::size_t gold_total = 0;
    for (const auto& s : scores) {
      matched += s.matched;
      pred_total += s.pred_size;
      gold_total += s.gold_size;
    }
    double p = pred_total ? static_cast<double>(matched) / static_cast<double>(pred_total) : 1.0;
    double r = gold_total ? static_cast<double>(matched) / static_cast<double>(gold_total) : 1.0;
    agg.precision = 100.0 * p;
    agg.recall = 100.0 * r;
    agg.f1 = 100.0 * harmonic_f1(p, r);
    report.overall = agg;
  } else {
    report.overall = mean_of(scores);
  }
  if (!types.empty()) {
    std::map<std::string, std::vector<InstanceScore>> buckets;
    for (std::size_t i = 0; i < scores.size(); ++i) buckets[types[i]].push_back(scores[i]);
    for (const auto& [label, bucket] : buckets) report.by_type[label] = mean_of(bucket);
  }
  return report;
}

WinSameLoss win_same_loss(const std::vector<double>& base_f1,
                          const std::vector<double>& new_f1,
                          double tolerance) {
  if (base_f1.size() != new_f1.size()) {
    throw Error("win_same_loss: length mismatch");
  }
  if (tolerance < 0.0) throw Error("win_same_loss: negative tolerance");
  if (base_f1.empty()) return {};
  std::size_t win = 0;
  std::size_t loss = 0;
  for (std::size_t i = 0; i < base_f1.size(); ++i) {
    if (new_f1[i] - base_f1[i] > tolerance) {
      ++win;
    } else if (base_f1[i] - new_f1[i] > tolerance) {
      ++loss;
    }
  }
  double n = static_cast<double>(base_f1.size());
  WinSameLoss out;
  out.win = 100.0 * static_cast<double>(win) / n;
  out.loss = 100.0 * static_cast<double>(loss) / n;
  out.same = 100.0 - out.win - out.loss;
  return out;
}

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 3) throw Error("pearson: need at least 3 points");

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: zero variance");

  PearsonResult result;
  result.r = sxy / std::sqrt(sxx * syy);
  result.r = std::clamp(result.r, -1.0, 1.0);

  double dof = static_cast<double>(n - 2);
  double denom = 1.0 - result.r * result.r;
  if (denom <= 0.0) {
    result.p = 0.0;
  } else {
    double t = result.r * std::sqrt(dof / denom);
    boost::math::students_t dist(dof);
    result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  }
  return result;
}

std::string report_to_json(const Report& report) {
  json j;
  j["overall"] = aggregate_to_json(report.overall);
  if (!report.by_type.empty()) {
    json types = json::object();
    for (const auto& [label, agg] : report.by_type) types[label] = aggregate_to_json(agg);
    j["by_type"] = types;
  }
  if (report.tool_invocation_rate) j["tool_invocation_rate"] = *report.tool_invocation_rate;
  j["failures"] = report.failures;
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  json j = json::parse(text);
  Report report;
  report.overall = aggregate_from_json(j.at("overall"));
  if (j.contains("by_type")) {
    for (const auto& [label, agg] : j.at("by_type").items()) {
      report.by_type[label] = aggregate_from_json(agg);
    }
  }
  if (j.contains("tool_invocation_rate") && !j.at("tool_invocation_rate").is_null()) {
    report.tool_invocation_rate = j.at("tool_invocation_rate").get<double>();
  }
  report.failures = j.value("failures", std::size_t{0});
  return report;
}

namespace {

std::string fmt2(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << v;
  return ss.str();
}

void append_row(std::string& out, const std::string& label, const Aggregate& a) {
  std::ostringstream ss;
  ss << std::left << std::setw(18) << label << std::right << std::setw(8) << fmt2(a.exact_match)
     << std::setw(8) << fmt2(a.f1) << std::setw(8) << fmt2(a.precision) << std::setw(8)
     << fmt2(a.recall) << std::setw(8) << a.count << "\n";
  out += ss.str();
}

}  // namespace

std::string format_report_table(const Report& report) {
  std::string out;
  std::ostringstream head;
  head << std::left << std::setw(18) << "Group" << std::right << std::setw(8) << "EM"
       << std::setw(8) << "F1" << std::setw(8) << "Prec." << std::setw(8) << "Rec."
       << std::setw(8) << "N" << "\n";
  out += head.str();
  append_row(out, "Overall", report.overall);
  for (const auto& label : kReasoningTypes) {
    auto it = report.by_type.find(label);
    if (it != report.by_type.end()) append_row(out, it->first, it->second);
  }
  for (const auto& [label, agg] : report.by_type) {
    if (std::find(kReasoningTypes.begin(), kReasoningTypes.end(), label) ==
        kReasoningTypes.end()) {
      append_row(out, label, agg);
    }
  }
  if (report.tool_invocation_rate) {
    out += "Tool invocation rate: " + fmt2(*report.tool_invocation_rate) + "%\n";
  }
  if (report.failures > 0) {
    out += "Failures: " + std::to_string(report.failures) + "\n";
  }
  return out;
}

std::string report_to_tsv(const Report& report) {
  std::ostringstream ss;
  ss << "group\tcount\tem\tf1\tprecision\trecall\n";
  auto row = [&](const std::string& label, const Aggregate& a) {
    ss << label << '\t' << a.count << '\t' << a.exact_match << '\t' << a.f1 << '\t'
       << a.precision << '\t' << a.recall << '\n';
  };
  row("overall", report.overall);
  for (const auto& [label, agg] : report.by_type) row(label, agg);
  return ss.str();
}

}  // namespace taps
