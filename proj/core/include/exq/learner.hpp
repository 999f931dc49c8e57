#pragma once

// Linear SVM trained by dual coordinate descent on the decoded top-6 features.

#include <cstdint>
#include <span>
#include <vector>

#include "exq/features.hpp"

namespace exq {

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double c = 1.0;

  std::size_t dim() const { return weights.size(); }
  double score(const CompressedVector& item) const { return dot(item, weights) + bias; }
  double score(const DecodedVector& item) const { return dot(item, weights) + bias; }

  bool operator==(const LinearModel&) const = default;
};

struct TrainOptions {
  double c = 1.0;
  // Value of the constant feature appended to every example; its weight times
  // this value is the bias.
  double bias_feature = 1.0;
  double tolerance = 1e-4;
  int max_epochs = 1000;
};

using SparseVector = std::vector<SparseEntry>;

struct TrainReport {
  LinearModel model;
  std::vector<double> alpha;  // positives first, then negatives
  double dual_objective = 0.0;
  double max_violation = 0.0;
  int epochs = 0;
};

// Soft-margin hinge-loss SVM. Examples are visited in the given order every
// epoch (positives, then negatives); the result is fully deterministic.
TrainReport train_report(std::span<const SparseVector> positives,
                         std::span<const SparseVector> negatives, std::uint32_t dim,
                         const TrainOptions& options = {});

LinearModel train(std::span<const CompressedVector> positives,
                  std::span<const CompressedVector> negatives, std::uint32_t dim,
                  const TrainOptions& options = {});

SparseVector to_sparse(const CompressedVector& cv);

inline double score(const LinearModel& model, const CompressedVector& item) {
  return model.score(item);
}

}  // namespace exq
