#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "tmn/error.hpp"
#include "tmn/evaluation.hpp"
#include "tmn/text.hpp"

namespace tmn {

void ScoreMatrix::validate() const {
  if (pairs.empty()) throw ContractError("score matrix has no candidates");
  if (scores.cols() != pairs.size() || unseen.size() != pairs.size()) {
    throw ContractError("score matrix: " + std::to_string(pairs.size()) + " candidates, scores " +
                        scores.shape_string() + ", mask length " + std::to_string(unseen.size()));
  }
  if (labels.size() != scores.rows() || sample_ids.size() != scores.rows()) {
    throw ContractError("score matrix: label or id count differs from row count");
  }
  for (std::size_t l : labels) {
    if (l >= pairs.size()) throw ContractError("score matrix: label outside the candidate set");
  }
}

ScoreMatrix build_score_matrix(const ModelParams& params, const SampleSet& samples,
                               const CandidateSet& candidates) {
  if (samples.size() == 0) throw ContractError("no samples to score");
  std::map<ConceptPair, std::size_t> column;
  for (std::size_t c = 0; c < candidates.pairs.size(); ++c) column.emplace(candidates.pairs[c], c);
  ScoreMatrix m;
  m.sample_ids = samples.ids;
  m.pairs = candidates.pairs;
  m.unseen = candidates.unseen;
  for (ConceptPair label : samples.labels) {
    auto it = column.find(label);
    if (it == column.end()) {
      throw ContractError("true pair '" + params.vocab.describe(label) + "' is not a candidate");
    }
    m.labels.push_back(it->second);
  }
  m.scores = score_matrix(params, samples.features, candidates.pairs);
  m.validate();
  return m;
}

namespace {

// Sign of (u + bias) - s in exact arithmetic.
int biased_cmp(double u, double bias, double s) {
  const double r = u + bias;
  if (r != s || !std::isfinite(r)) return r > s ? 1 : (r < s ? -1 : 0);
  const double bb = r - u;
  const double err = (u - (r - bb)) + (bias - bb);
  return err > 0 ? 1 : (err < 0 ? -1 : 0);
}

// Whether candidate i ranks above candidate j: higher s + bias·unseen, then
// lower index.
bool above(std::span<const double> s, std::span<const unsigned char> unseen, double bias,
           std::size_t i, std::size_t j) {
  int c;
  if ((unseen[i] != 0) == (unseen[j] != 0)) {
    c = s[i] > s[j] ? 1 : (s[i] < s[j] ? -1 : 0);
  } else if (unseen[i]) {
    c = biased_cmp(s[i], bias, s[j]);
  } else {
    c = -biased_cmp(s[j], bias, s[i]);
  }
  return c > 0 || (c == 0 && i < j);
}

// Position of `target` in the ranking (0 = best).
std::size_t rank_of(std::span<const double> s, std::span<const unsigned char> unseen,
                    double bias, std::size_t target) {
  std::size_t r = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != target && above(s, unseen, bias, i, target)) ++r;
  }
  return r;
}

// Smallest double bias from which unseen candidate u ranks above seen
// candidate c for every slightly larger bias.
double crossing(std::span<const double> s, std::size_t u, std::size_t c) {
  const double inf = std::numeric_limits<double>::infinity();
  double b = s[c] - s[u];
  if (biased_cmp(s[u], b, s[c]) >= 0) {
    while (biased_cmp(s[u], std::nextafter(b, -inf), s[c]) >= 0) b = std::nextafter(b, -inf);
  } else {
    do b = std::nextafter(b, inf); while (biased_cmp(s[u], b, s[c]) < 0);
  }
  return b;
}

enum class Kind { always, never, threshold };

// How a sample's correctness just above the bias b depends on b.
// Unseen-labelled samples are correct iff b >= theta, seen-labelled ones iff
// b < theta.
struct Flip {
  Kind kind;
  double theta = 0.0;
};

Flip flip_of(std::span<const double> s, std::span<const unsigned char> unseen, std::size_t t,
             std::size_t k) {
  const bool target_unseen = unseen[t] != 0;
  // Same-status candidates above t do not depend on the bias.
  std::size_t same_above = 0;
  std::vector<std::size_t> other;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == t) continue;
    if ((unseen[i] != 0) == target_unseen) {
      if (above(s, unseen, 0.0, i, t)) ++same_above;
    } else {
      other.push_back(i);
    }
  }
  if (same_above >= k) return {Kind::never};
  const std::size_t m = k - same_above;
  if (other.size() < m) return {Kind::always};
  // The m-th best candidate of the other status decides.
  std::nth_element(other.begin(), other.begin() + static_cast<long>(m - 1), other.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
  const std::size_t c = other[m - 1];
  return {Kind::threshold, target_unseen ? crossing(s, t, c) : crossing(s, c, t)};
}

bool correct_at(const Flip& f, bool target_unseen, double bias) {
  switch (f.kind) {
    case Kind::always: return true;
    case Kind::never: return false;
    case Kind::threshold: return target_unseen ? bias >= f.theta : bias < f.theta;
  }
  return false;
}

}  // namespace

std::vector<std::size_t> predict_topk(std::span<const double> scores, double bias,
                                      std::span<const unsigned char> unseen, std::size_t k) {
  if (unseen.size() != scores.size()) throw ContractError("predict_topk: mask length differs");
  if (std::isnan(bias)) throw ContractError("predict_topk: bias is NaN");
  if (k == 0) throw ContractError("predict_topk: k must be at least 1");
  if (k > scores.size()) {
    throw ContractError("predict_topk: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(scores.size()) + " candidates");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return above(scores, unseen, bias, a, b); });
  order.resize(k);
  return order;
}

OperatingPoint accuracy_at(const ScoreMatrix& m, double bias, std::size_t k) {
  double seen_ok = 0, seen_n = 0, unseen_ok = 0, unseen_n = 0;
  for (std::size_t r = 0; r < m.samples(); ++r) {
    const std::size_t t = m.labels[r];
    const bool ok = rank_of(m.scores.row_span(r), m.unseen, bias, t) < k;
    if (m.unseen[t]) {
      unseen_n += 1;
      unseen_ok += ok;
    } else {
      seen_n += 1;
      seen_ok += ok;
    }
  }
  return {seen_n > 0 ? seen_ok / seen_n : 0.0, unseen_n > 0 ? unseen_ok / unseen_n : 0.0};
}

CalibrationCurve calibration_sweep(const ScoreMatrix& m, std::size_t k) {
  m.validate();
  if (k == 0) throw ContractError("calibration_sweep: k must be at least 1");
  std::vector<Flip> flips;
  std::vector<double> thresholds;
  std::size_t seen_n = 0, unseen_n = 0;
  for (std::size_t r = 0; r < m.samples(); ++r) {
    const std::size_t t = m.labels[r];
    (m.unseen[t] ? unseen_n : seen_n) += 1;
    flips.push_back(flip_of(m.scores.row_span(r), m.unseen, t, k));
    if (flips.back().kind == Kind::threshold) thresholds.push_back(flips.back().theta);
  }
  if (seen_n == 0 || unseen_n == 0) {
    throw ProtocolError("calibration sweep needs both seen-labelled and unseen-labelled samples");
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<double> biases{-std::numeric_limits<double>::infinity()};
  biases.insert(biases.end(), thresholds.begin(), thresholds.end());
  biases.push_back(std::numeric_limits<double>::infinity());

  CalibrationCurve curve;
  curve.k = k;
  for (double b : biases) {
    double seen_ok = 0, unseen_ok = 0;
    for (std::size_t r = 0; r < m.samples(); ++r) {
      const bool u = m.unseen[m.labels[r]] != 0;
      if (correct_at(flips[r], u, b)) (u ? unseen_ok : seen_ok) += 1;
    }
    curve.points.push_back({b, seen_ok / static_cast<double>(seen_n),
                            unseen_ok / static_cast<double>(unseen_n)});
  }
  return curve;
}

double auc_of_points(std::vector<OperatingPoint> pts) {
  if (pts.empty()) return 0.0;
  double max_seen = 0, max_unseen = 0;
  for (const auto& p : pts) {
    max_seen = std::max(max_seen, p.seen);
    max_unseen = std::max(max_unseen, p.unseen);
  }
  pts.insert(pts.begin(), OperatingPoint{max_seen, 0.0});
  pts.push_back(OperatingPoint{0.0, max_unseen});
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    area += (pts[i + 1].unseen - pts[i].unseen) * (pts[i].seen + pts[i + 1].seen) / 2.0;
  }
  return area;
}

double auc(const CalibrationCurve& curve) {
  std::vector<OperatingPoint> pts;
  for (const auto& p : curve.points) pts.push_back({p.seen_acc, p.unseen_acc});
  return auc_of_points(std::move(pts));
}

BestMetrics best_metrics(const CalibrationCurve& curve) {
  BestMetrics b;
  for (const auto& p : curve.points) {
    b.best_seen = std::max(b.best_seen, p.seen_acc);
    b.best_unseen = std::max(b.best_unseen, p.unseen_acc);
    const double s = p.seen_acc + p.unseen_acc;
    if (s > 0) b.best_hm = std::max(b.best_hm, 2.0 * p.seen_acc * p.unseen_acc / s);
  }
  return b;
}

double closed_world_accuracy(const ScoreMatrix& m, std::size_t k) {
  m.validate();
  double ok = 0, n = 0;
  for (std::size_t r = 0; r < m.samples(); ++r) {
    const std::size_t t = m.labels[r];
    if (!m.unseen[t]) continue;
    const auto s = m.scores.row_span(r);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != t && m.unseen[i] && (s[i] > s[t] || (s[i] == s[t] && i < t))) ++rank;
    }
    n += 1;
    ok += rank < k;
  }
  if (n == 0) throw ProtocolError("closed-world accuracy needs unseen-labelled samples");
  return ok / n;
}

EvalSummary summarize(const ScoreMatrix& m) {
  EvalSummary s;
  const CalibrationCurve c1 = calibration_sweep(m, 1);
  s.auc1 = auc(c1);
  s.auc2 = auc(calibration_sweep(m, 2));
  s.auc3 = auc(calibration_sweep(m, 3));
  s.best = best_metrics(c1);
  s.closed_world = closed_world_accuracy(m, 1);
  return s;
}

std::string format_curve(const CalibrationCurve& curve) {
  std::string out = "bias\tseen_acc\tunseen_acc\n";
  for (const auto& p : curve.points) {
    out += format_double(p.bias) + '\t' + format_double(p.seen_acc) + '\t' +
           format_double(p.unseen_acc) + '\n';
  }
  return out;
}

std::string format_summary(const EvalSummary& s) {
  return "auc1\tauc2\tauc3\tbest_seen\tbest_unseen\tbest_hm\tclosed_world\n" +
         format_double(s.auc1) + '\t' + format_double(s.auc2) + '\t' + format_double(s.auc3) +
         '\t' + format_double(s.best.best_seen) + '\t' + format_double(s.best.best_unseen) + '\t' +
         format_double(s.best.best_hm) + '\t' + format_double(s.closed_world) + '\n';
}

}  // namespace tmn
