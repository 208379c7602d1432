#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taps/metrics.hpp"
#include "taps/trace.hpp"

namespace taps {

// One minus the geometric mean of per-step top-1 probabilities. Lower means
// more confident. An arithmetic-mean aggregation is available for
// sensitivity checks.
enum class ConfidenceAggregation { GeometricMean, ArithmeticMean };

double least_confidence(const GenerationTrace& trace,
                        ConfidenceAggregation agg = ConfidenceAggregation::GeometricMean);

// Mean top-1/top-2 probability gap over the T least-confident steps
// (T capped at the step count). Higher means more confident.
double margin_at_t(const GenerationTrace& trace, std::size_t t);

// Probability gap between the two best whole-sequence candidates. Throws if
// fewer than two candidates were decoded.
double sequence_margin(const GenerationTrace& trace);

struct EstimatorRow {
  std::string name;
  std::optional<double> r;
  std::optional<double> p;
  std::string note;  // set when the estimator was unavailable
};

struct CorrelationOptions {
  std::size_t max_margin_t = 10;
  bool include_sequence_margin = true;
};

// One row per estimator configuration (least confidence, margin@1..T,
// sequence margin), correlating estimator values with per-instance F1.
std::vector<EstimatorRow> correlate_estimators(const std::vector<GenerationTrace>& traces,
                                               const std::vector<double>& f1s,
                                               const CorrelationOptions& options = {});

// Significance-marked table in the shape of the published correlation
// listing (marker at p < 0.001).
std::string format_correlation_table(const std::vector<EstimatorRow>& rows);
std::string correlation_to_tsv(const std::vector<EstimatorRow>& rows);

enum class EstimatorKind { LeastConfidence, MarginAtT, SequenceMargin };

struct Threshold {
  double value = 0.0;
  EstimatorKind estimator = EstimatorKind::LeastConfidence;
  std::size_t margin_t = 1;  // meaningful for MarginAtT only
};

std::vector<double> default_threshold_grid();  // 0.0 .. 1.0 step 0.005

struct ThresholdSweepPoint {
  double tau = 0.0;
  double objective = 0.0;  // mean F1 when regenerating for score > tau
};

struct ThresholdChoice {
  Threshold threshold;
  double objective = 0.0;
  std::vector<ThresholdSweepPoint> sweep;
};

// Grid value maximizing the mean of (regen F1 if score > tau else base F1),
// ties broken toward the smallest tau.
ThresholdChoice select_threshold(const std::vector<double>& scores,
                                 const std::vector<double>& base_f1,
                                 const std::vector<double>& regen_f1,
                                 const std::vector<double>& grid = default_threshold_grid());

// Published operating points for the models evaluated live.
struct ThresholdPreset {
  std::string model;
  double value;
};
const std::vector<ThresholdPreset>& threshold_presets();

}  // namespace taps
