#include "exq/learner.hpp"

#include <algorithm>
#include <cmath>

namespace exq {

SparseVector to_sparse(const CompressedVector& cv) {
  const DecodedVector d = decompress(cv);
  return SparseVector(d.begin(), d.end());
}

TrainReport train_report(std::span<const SparseVector> positives,
                         std::span<const SparseVector> negatives, std::uint32_t dim,
                         const TrainOptions& options) {
  if (positives.empty() || negatives.empty()) throw Error("need both classes");
  if (!(options.c > 0.0)) throw Error("C must be positive");

  struct Example {
    const SparseVector* x;
    double y;
    double q;  // diagonal of the dual Hessian
  };
  const double bias_sq = options.bias_feature * options.bias_feature;
  std::vector<Example> examples;
  examples.reserve(positives.size() + negatives.size());
  auto add = [&](const SparseVector& x, double y) {
    double q = bias_sq;
    for (const auto& e : x) {
      if (e.id >= dim) throw Error("id out of range");
      q += e.value * e.value;
    }
    examples.push_back({&x, y, q});
  };
  for (const auto& x : positives) add(x, 1.0);
  for (const auto& x : negatives) add(x, -1.0);

  TrainReport report;
  std::vector<double> w(dim, 0.0);
  double w_bias = 0.0;
  std::vector<double>& alpha = report.alpha;
  alpha.assign(examples.size(), 0.0);
  const double c = options.c;

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    double max_violation = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const Example& ex = examples[i];
      if (ex.q <= 0.0) continue;
      double margin = w_bias * options.bias_feature;
      for (const auto& e : *ex.x) margin += w[e.id] * e.value;
      const double g = ex.y * margin - 1.0;

      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == c) {
        pg = std::max(g, 0.0);
      }
      max_violation = std::max(max_violation, std::abs(pg));
      if (std::abs(pg) <= 1e-12) continue;

      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / ex.q, 0.0, c);
      const double step = (alpha[i] - old) * ex.y;
      if (step == 0.0) continue;
      for (const auto& e : *ex.x) w[e.id] += step * e.value;
      w_bias += step * options.bias_feature;
    }
    report.epochs = epoch + 1;
    report.max_violation = max_violation;
    if (max_violation < options.tolerance) break;
  }

  double norm_sq = w_bias * w_bias;
  for (double v : w) norm_sq += v * v;
  double alpha_sum = 0.0;
  for (double a : alpha) alpha_sum += a;
  report.dual_objective = 0.5 * norm_sq - alpha_sum;

  report.model.weights = std::move(w);
  report.model.bias = w_bias * options.bias_feature;
  report.model.c = c;
  return report;
}

LinearModel train(std::span<const CompressedVector> positives,
                  std::span<const CompressedVector> negatives, std::uint32_t dim,
                  const TrainOptions& options) {
  std::vector<SparseVector> pos;
  std::vector<SparseVector> neg;
  pos.reserve(positives.size());
  neg.reserve(negatives.size());
  for (const auto& cv : positives) pos.push_back(to_sparse(cv));
  for (const auto& cv : negatives) neg.push_back(to_sparse(cv));
  return train_report(pos, neg, dim, options).model;
}

}  // namespace exq
