#pragma once

#include <span>
#include <string>
#include <vector>

#include "tmn/data.hpp"
#include "tmn/model.hpp"

namespace tmn {

/// Scores of every sample against every candidate pair.
struct ScoreMatrix {
  std::vector<std::string> sample_ids;
  std::vector<ConceptPair> pairs;
  Tensor scores;                       ///< samples × pairs
  std::vector<unsigned char> unseen;   ///< per candidate
  std::vector<std::size_t> labels;     ///< candidate column of each sample's true pair

  std::size_t samples() const { return scores.rows(); }
  /// Throws ContractError on inconsistent sizes or labels.
  void validate() const;
};

/// Scores `samples` against `candidates`; every label must be a candidate.
ScoreMatrix build_score_matrix(const ModelParams& params, const SampleSet& samples,
                               const CandidateSet& candidates);

/// The k best candidates of one row after adding `bias` to unseen scores.
///
/// Candidates compare by s + bias·unseen in exact arithmetic, then by lowest
/// index. At bias ±∞ unseen candidates are still ordered by their own scores.
std::vector<std::size_t> predict_topk(std::span<const double> scores, double bias,
                                      std::span<const unsigned char> unseen, std::size_t k);

/// Seen and unseen top-k accuracy at one bias value.
struct OperatingPoint {
  double seen = 0.0;
  double unseen = 0.0;
};
OperatingPoint accuracy_at(const ScoreMatrix& matrix, double bias, std::size_t k);

struct CurvePoint {
  double bias = 0.0;
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
};

/// Accuracy pairs over the bias sweep, in increasing bias.
struct CalibrationCurve {
  std::size_t k = 1;
  std::vector<CurvePoint> points;
};

/// Exact sweep over the critical biases at which some sample's top-k
/// correctness flips, plus −∞ and +∞. Each point reports the accuracies on
/// the open interval up to the next bias, so exact score ties at a critical
/// bias do not add isolated points. Throws ProtocolError when seen-labelled or
/// unseen-labelled samples are missing.
CalibrationCurve calibration_sweep(const ScoreMatrix& matrix, std::size_t k);

/// Trapezoid area under the (unseen_acc, seen_acc) curve, with the end points
/// (0, max seen) and (max unseen, 0) added.
double auc(const CalibrationCurve& curve);
double auc_of_points(std::vector<OperatingPoint> points_by_bias);

struct BestMetrics {
  double best_seen = 0.0;
  double best_unseen = 0.0;
  double best_hm = 0.0;
};
BestMetrics best_metrics(const CalibrationCurve& curve);

/// Top-k accuracy of unseen-labelled samples ranked among unseen candidates only.
double closed_world_accuracy(const ScoreMatrix& matrix, std::size_t k = 1);

struct EvalSummary {
  double auc1 = 0.0, auc2 = 0.0, auc3 = 0.0;
  BestMetrics best;  ///< from the top-1 curve
  double closed_world = 0.0;
};
EvalSummary summarize(const ScoreMatrix& matrix);

/// `bias<TAB>seen_acc<TAB>unseen_acc` with a header row.
std::string format_curve(const CalibrationCurve& curve);
/// Header row of metric names and one row of values.
std::string format_summary(const EvalSummary& summary);

}  // namespace tmn
