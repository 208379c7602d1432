#include "taps/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "taps/util.hpp"

namespace taps {

namespace {

double top1_logprob(const TraceStep& step) {
  if (step.topk.empty()) throw Error("trace step has an empty top-k list");
  return step.topk.front().logprob;
}

double top_gap(const TraceStep& step) {
  if (step.topk.size() < 2) throw Error("margin estimators need top-k of at least 2");
  return std::exp(step.topk[0].logprob) - std::exp(step.topk[1].logprob);
}

}  // namespace

double least_confidence(const GenerationTrace& trace, ConfidenceAggregation agg) {
  if (trace.steps.empty()) throw Error("least_confidence on an empty trace");
  if (agg == ConfidenceAggregation::ArithmeticMean) {
    double sum = 0.0;
    for (const auto& step : trace.steps) sum += std::exp(top1_logprob(step));
    return 1.0 - sum / static_cast<double>(trace.steps.size());
  }
  double sum_log = 0.0;
  for (const auto& step : trace.steps) sum_log += top1_logprob(step);
  return 1.0 - std::exp(sum_log / static_cast<double>(trace.steps.size()));
}

double margin_at_t(const GenerationTrace& trace, std::size_t t) {
  if (t == 0) throw Error("margin_at_t needs T >= 1");
  if (trace.steps.empty()) throw Error("margin_at_t on an empty trace");
  std::vector<double> gaps;
  gaps.reserve(trace.steps.size());
  for (const auto& step : trace.steps) gaps.push_back(top_gap(step));
  std::sort(gaps.begin(), gaps.end());
  std::size_t take = std::min(t, gaps.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += gaps[i];
  return sum / static_cast<double>(take);
}

double sequence_margin(const GenerationTrace& trace) {
  if (trace.candidates.size() < 2) {
    throw Error("sequence margin needs at least two decoded candidates");
  }
  return std::exp(trace.candidates[0].sequence_logprob) -
         std::exp(trace.candidates[1].sequence_logprob);
}

std::vector<EstimatorRow> correlate_estimators(const std::vector<GenerationTrace>& traces,
                                               const std::vector<double>& f1s,
                                               const CorrelationOptions& options) {
  if (traces.size() != f1s.size()) throw Error("correlate_estimators: length mismatch");

  std::vector<EstimatorRow> rows;
  auto correlate = [&](const std::string& name, auto extract) {
    EstimatorRow row;
    row.name = name;
    try {
      std::vector<double> values;
      values.reserve(traces.size());
      for (const auto& trace : traces) values.push_back(extract(trace));
      PearsonResult result = pearson(values, f1s);
      row.r = result.r;
      row.p = result.p;
    } catch (const Error& e) {
      row.note = e.what();
    }
    rows.push_back(std::move(row));
  };

  correlate("Least Confidence",
            [](const GenerationTrace& t) { return least_confidence(t); });
  for (std::size_t t = 1; t <= options.max_margin_t; ++t) {
    correlate("Margin@" + std::to_string(t),
              [t](const GenerationTrace& tr) { return margin_at_t(tr, t); });
  }
  if (options.include_sequence_margin) {
    correlate("Sequence Margin",
              [](const GenerationTrace& t) { return sequence_margin(t); });
  }
  return rows;
}

std::string format_correlation_table(const std::vector<EstimatorRow>& rows) {
  std::ostringstream ss;
  ss << std::left << std::setw(18) << "Method" << std::right << std::setw(10) << "Statistic"
     << "\n";
  for (const auto& row : rows) {
    ss << std::left << std::setw(18) << row.name;
    if (row.r) {
      std::ostringstream stat;
      stat << std::fixed << std::setprecision(3) << *row.r;
      ss << std::right << std::setw(10) << stat.str();
      if (row.p && *row.p < 0.001) ss << " *";
    } else {
      ss << std::right << std::setw(10) << "n/a";
      if (!row.note.empty()) ss << "  (" << row.note << ")";
    }
    ss << "\n";
  }
  ss << "* p < 0.001\n";
  return ss.str();
}

std::string correlation_to_tsv(const std::vector<EstimatorRow>& rows) {
  std::ostringstream ss;
  ss << "method\tr\tp\tnote\n";
  for (const auto& row : rows) {
    ss << row.name << '\t';
    if (row.r) {
      ss << *row.r << '\t' << *row.p << '\t';
    } else {
      ss << "\t\t";
    }
    ss << row.note << '\n';
  }
  return ss.str();
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  grid.reserve(201);
  for (int i = 0; i <= 200; ++i) grid.push_back(static_cast<double>(i) * 0.005);
  return grid;
}

ThresholdChoice select_threshold(const std::vector<double>& scores,
                                 const std::vector<double>& base_f1,
                                 const std::vector<double>& regen_f1,
                                 const std::vector<double>& grid) {
  if (scores.empty()) throw Error("select_threshold: empty inputs");
  if (scores.size() != base_f1.size() || scores.size() != regen_f1.size()) {
    throw Error("select_threshold: length mismatch");
  }
  if (grid.empty()) throw Error("select_threshold: empty grid");

  ThresholdChoice choice;
  choice.sweep.reserve(grid.size());
  double best = -1.0;
  double best_tau = grid.front();
  for (double tau : grid) {
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      sum += (scores[i] > tau) ? regen_f1[i] : base_f1[i];
    }
    double objective = sum / static_cast<double>(scores.size());
    choice.sweep.push_back({tau, objective});
    if (objective > best || (objective == best && tau < best_tau)) {
      best = objective;
      best_tau = tau;
    }
  }
  choice.threshold.value = best_tau;
  choice.threshold.estimator = EstimatorKind::LeastConfidence;
  choice.objective = best;
  return choice;
}

const std::vector<ThresholdPreset>& threshold_presets() {
  static const std::vector<ThresholdPreset> presets = {
      {"llama-3-instruct", 0.02},
      {"mistral-3-instruct", 0.01},
      {"gpt-4o", 0.04},
  };
  return presets;
}

}  // namespace taps
