#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "taps/calls.hpp"

namespace taps {

struct InstanceScore {
  double exact_match = 0.0;  // 0 or 1
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Raw triplet counts, kept so micro-averaged aggregation can pool them.
  std::size_t matched = 0;
  std::size_t pred_size = 0;
  std::size_t gold_size = 0;
};

struct ScoreOptions {
  // Duplicate triplets count with multiplicity by default; set semantics
  // are available for comparison with scorers that deduplicate.
  bool set_mode = false;
};

InstanceScore score_instance(const std::vector<ApiCall>& pred,
                             const std::vector<ApiCall>& gold,
                             const ScoreOptions& options = {});

InstanceScore score_triplets(const std::vector<SlotTriplet>& pred,
                             const std::vector<SlotTriplet>& gold,
                             const ScoreOptions& options = {});

// Aggregate metrics over a dataset, in percent.
struct Aggregate {
  double exact_match = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t count = 0;
};

struct Report {
  Aggregate overall;
  // Reasoning-type breakdown, keyed by label, present only when labels were
  // supplied.
  std::map<std::string, Aggregate> by_type;
  std::optional<double> tool_invocation_rate;  // percent
  std::size_t failures = 0;
};

extern const std::vector<std::string> kReasoningTypes;

struct AggregateOptions {
  // Macro averaging (per-instance scores, then mean) is the default; micro
  // pools triplet counts across the dataset before computing P/R/F1.
  bool micro = false;
};

Report aggregate(const std::vector<InstanceScore>& scores,
                 const std::vector<std::string>& types = {},
                 const AggregateOptions& options = {});

struct WinSameLoss {
  double win = 0.0;   // percent of instances where new beats base
  double same = 0.0;
  double loss = 0.0;
};

WinSameLoss win_same_loss(const std::vector<double>& base_f1,
                          const std::vector<double>& new_f1,
                          double tolerance = 0.0);

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, from the t statistic with n-2 dof
};

PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);

// Aligned human-readable table and a flat tab-separated export for plotting.
std::string format_report_table(const Report& report);
std::string report_to_tsv(const Report& report);

}  // namespace taps
