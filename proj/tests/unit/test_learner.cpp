#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "exq/learner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exq;

namespace {

SparseVector dense_to_sparse(const std::vector<double>& x) {
  SparseVector s;
  for (std::uint32_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) s.push_back({i, x[i]});
  }
  return s;
}

struct Problem {
  std::vector<std::vector<double>> pos;
  std::vector<std::vector<double>> neg;
};

// Ten 3-D points, two overlapping clouds, with the last positive repeated as
// a negative.
Problem ten_points() {
  Rng rng(99);
  Problem p;
  for (int i = 0; i < 5; ++i) p.pos.push_back({rng.uniform(0.2, 1.0), rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.3)});
  for (int i = 0; i < 4; ++i) p.neg.push_back({rng.uniform(0.0, 0.5), rng.uniform(0.3, 1.0), rng.uniform(0.0, 0.3)});
  p.neg.push_back(p.pos.back());
  return p;
}

TrainReport solve(const Problem& p, const TrainOptions& opt) {
  std::vector<SparseVector> pos, neg;
  for (const auto& x : p.pos) pos.push_back(dense_to_sparse(x));
  for (const auto& x : p.neg) neg.push_back(dense_to_sparse(x));
  return train_report(pos, neg, 3, opt);
}

CompressedVector planted(std::uint32_t dim, const std::vector<std::uint32_t>& ids, Rng& rng) {
  FeatureStats s;
  s.n = 10;
  s.mu.assign(dim, 0.0);
  s.sigma.assign(dim, 0.0);
  s.strong_count.assign(dim, 0);
  std::vector<float> v(dim, 0.0F);
  for (auto id : ids) v[id] = static_cast<float>(rng.uniform(0.3, 1.0));
  return compress(v, s);
}

}  // namespace

TEST_CASE("learner: symmetric 1-D separable case") {
  const std::vector<SparseVector> pos{{{0, 1.0}}};
  const std::vector<SparseVector> neg{{{0, -1.0}}};
  const auto r = train_report(pos, neg, 1);
  CHECK(r.model.score(DecodedVector{}) == doctest::Approx(0.0).epsilon(1e-9));
  const double m_pos = r.model.weights[0] * 1.0 + r.model.bias;
  const double m_neg = -(r.model.weights[0] * -1.0 + r.model.bias);
  CHECK(m_pos >= 1.0 - 1e-6);
  CHECK(m_neg >= 1.0 - 1e-6);
  CHECK(r.model.weights[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("learner: dual objective matches a reference QP solver") {
  const auto p = ten_points();
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& v : p.pos) {
    x.push_back(v);
    y.push_back(1.0);
  }
  for (const auto& v : p.neg) {
    x.push_back(v);
    y.push_back(-1.0);
  }
  for (double c : {0.5, 1.0, 4.0}) {
    TrainOptions opt;
    opt.c = c;
    const auto r = solve(p, opt);
    CHECK(r.max_violation < opt.tolerance);
    const auto ref = oracle::reference_dual(x, y, c, 1.0);
    CHECK(std::abs(r.dual_objective - ref.objective) <= 1e-3);
    // The conflicting pair pulls in opposite directions; both sit at the bound.
    CHECK(r.alpha[4] == doctest::Approx(c));
    CHECK(r.alpha[9] == doctest::Approx(c));
  }
}

TEST_CASE("learner: scaling inputs with matching C keeps every decision") {
  const auto p = ten_points();
  Problem scaled = p;
  for (auto* set : {&scaled.pos, &scaled.neg}) {
    for (auto& v : *set) {
      for (auto& x : v) x *= 2.0;
    }
  }
  TrainOptions base;
  base.tolerance = 1e-9;
  base.max_epochs = 200000;
  TrainOptions twice = base;
  twice.c = base.c / 4.0;
  twice.bias_feature = 2.0;
  const auto a = solve(p, base).model;
  const auto b = solve(scaled, twice).model;
  int compared = 0;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const double x0 = i / 20.0;
      const double x1 = j / 20.0;
      const double sa = a.weights[0] * x0 + a.weights[1] * x1 + a.bias;
      const double sb = b.weights[0] * 2 * x0 + b.weights[1] * 2 * x1 + b.bias;
      if (std::abs(sa) < 1e-6) continue;
      CHECK((sa > 0) == (sb > 0));
      ++compared;
    }
  }
  CHECK(compared > 400);
}

TEST_CASE("learner: separable compressed fixture reaches full training accuracy") {
  Rng rng(5);
  const std::uint32_t dim = 40;
  std::vector<CompressedVector> pos, neg;
  for (int i = 0; i < 60; ++i) pos.push_back(planted(dim, {1, 3, static_cast<std::uint32_t>(10 + rng.below(10))}, rng));
  for (int i = 0; i < 120; ++i) neg.push_back(planted(dim, {20, 25, static_cast<std::uint32_t>(10 + rng.below(10))}, rng));
  const auto m = train(pos, neg, dim);
  double worst_pos = 1e300;
  double best_neg = -1e300;
  for (const auto& v : pos) {
    CHECK(m.score(v) > 0.0);
    worst_pos = std::min(worst_pos, m.score(v));
  }
  for (const auto& v : neg) {
    CHECK(m.score(v) < 0.0);
    best_neg = std::max(best_neg, m.score(v));
  }
  CHECK(worst_pos >= best_neg);

  // Compressed-domain score agrees with the dense oracle.
  for (const auto& v : pos) {
    const double dense = oracle::dense_dot(oracle::densify(v, dim), m.weights) + m.bias;
    CHECK(m.score(v) == doctest::Approx(dense).epsilon(1e-12));
  }

  // Same inputs in the same order give the same model to the last bit.
  CHECK(train(pos, neg, dim) == m);
}

TEST_CASE("learner: zero model, bias shift and errors") {
  LinearModel zero;
  zero.weights.assign(10, 0.0);
  zero.bias = 0.25;
  const auto items = fixture::compress_all(fixture::random_dense(30, 10, 4, 0.5));
  for (const auto& v : items.vectors) CHECK(score(zero, v) == 0.25);

  LinearModel m;
  Rng rng(8);
  m.weights.resize(10);
  for (auto& w : m.weights) w = rng.uniform(-1, 1);
  LinearModel shifted = m;
  shifted.bias += 3.5;
  std::vector<std::size_t> a(items.size()), b(items.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] = i;
  std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return m.score(items.vectors[x]) > m.score(items.vectors[y]); });
  std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return shifted.score(items.vectors[x]) > shifted.score(items.vectors[y]); });
  CHECK(a == b);

  const std::vector<SparseVector> one{{{0, 1.0}}};
  const std::vector<SparseVector> none;
  CHECK_THROWS_WITH_AS(train_report(one, none, 1), "need both classes", Error);
  CHECK_THROWS_WITH_AS(train_report(none, one, 1), "need both classes", Error);
  TrainOptions bad;
  bad.c = 0.0;
  CHECK_THROWS_WITH_AS(train_report(one, one, 1, bad), "C must be positive", Error);
  CHECK_THROWS_WITH_AS(train_report(one, std::vector<SparseVector>{{{3, 1.0}}}, 2), "id out of range", Error);
}
