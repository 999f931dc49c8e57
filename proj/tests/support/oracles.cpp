#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace exq::oracle {

NaiveStats naive_stats(const std::vector<std::vector<float>>& rows) {
  const std::size_t d = rows.front().size();
  const double n = static_cast<double>(rows.size());
  NaiveStats s;
  s.mu.assign(d, 0.0);
  s.sigma.assign(d, 0.0);
  s.strong.assign(d, 0);
  for (std::size_t f = 0; f < d; ++f) {
    long double sum = 0;
    for (const auto& r : rows) sum += r[f];
    s.mu[f] = static_cast<double>(sum / n);
    long double sq = 0;
    for (const auto& r : rows) sq += (r[f] - s.mu[f]) * (r[f] - s.mu[f]);
    s.sigma[f] = std::sqrt(static_cast<double>(sq / n));
    for (const auto& r : rows) s.strong[f] += r[f] > s.mu[f] + s.sigma[f];
  }
  return s;
}

std::vector<double> densify(const CompressedVector& cv, std::uint32_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto& e : decompress(cv)) out.at(e.id) = e.value;
  return out;
}

double dense_dot(const std::vector<double>& x, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  return s;
}

double dense_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::uint32_t greedy_assign(const CompressedVector& item, const ClusterIndex& index) {
  const std::uint32_t dim = kMaxDimension + 1;
  const auto q = densify(item, dim);
  const std::size_t depth = index.level_count() - 1;

  auto has_children = [&](std::size_t l, std::uint32_t node) {
    for (std::uint32_t p : index.level(l + 1).parent) {
      if (p == node) return true;
    }
    return false;
  };
  auto pick = [&](std::size_t l, const std::vector<std::uint32_t>& nodes) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t j : nodes) {
      if (l < depth && !has_children(l, j)) continue;
      const double d = dense_distance(q, densify(index.level(l).vectors[j], dim));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return best;
  };

  std::vector<std::uint32_t> nodes(index.level(0).size());
  for (std::uint32_t j = 0; j < nodes.size(); ++j) nodes[j] = j;
  std::uint32_t pos = pick(0, nodes);
  for (std::size_t l = 1; l <= depth; ++l) {
    nodes.clear();
    const auto& parent = index.level(l).parent;
    for (std::uint32_t j = 0; j < parent.size(); ++j) {
      if (parent[j] == pos) nodes.push_back(j);
    }
    pos = pick(l, nodes);
  }
  return pos;
}

std::vector<ScoredItem> sorted_scores(const ClusterIndex& index,
                                      const std::vector<std::uint32_t>& clusters,
                                      const LinearModel& model, const ItemFilter& excluded,
                                      const std::vector<ItemId>& also_excluded) {
  const std::set<ItemId> also(also_excluded.begin(), also_excluded.end());
  std::vector<ScoredItem> all;
  for (std::uint32_t c : clusters) {
    const auto view = index.cluster(c);
    for (std::size_t i = 0; i < view.size(); ++i) {
      const ItemId id = view.items[i];
      if (excluded.contains(id) || also.contains(id)) continue;
      all.push_back({id, model.score(view.vectors[i])});
    }
  }
  std::sort(all.begin(), all.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return all;
}

std::vector<Candidate> rank_fusion(const std::vector<Candidate>& pool, std::size_t k) {
  std::vector<Candidate> out = pool;
  for (auto& c : out) {
    std::uint32_t rv = 1;
    std::uint32_t rt = 1;
    for (const auto& o : pool) {
      if (o.score_visual > c.score_visual || (o.score_visual == c.score_visual && o.id < c.id)) ++rv;
      if (o.score_text > c.score_text || (o.score_text == c.score_text && o.id < c.id)) ++rt;
    }
    c.rank_visual = rv;
    c.rank_text = rt;
    c.avg_rank = (rv + rt) / 2.0;
  }
  std::vector<Candidate> result;
  std::vector<bool> used(out.size(), false);
  while (result.size() < std::min(k, out.size())) {
    std::size_t best = out.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (used[i]) continue;
      if (best == out.size() || out[i].avg_rank < out[best].avg_rank ||
          (out[i].avg_rank == out[best].avg_rank && out[i].id < out[best].id)) {
        best = i;
      }
    }
    used[best] = true;
    result.push_back(out[best]);
  }
  return result;
}

std::vector<ItemId> full_scan(const ModelPair& models, const Corpus& corpus, std::size_t r,
                              std::size_t k, const ItemFilter& excluded) {
  const std::size_t n = corpus.size();
  auto score_all = [&](const ClusterIndex& index, const LinearModel& model) {
    std::vector<double> s(n);
    for (ItemId i = 0; i < n; ++i) s[i] = model.score(index.vector_of(i));
    return s;
  };
  const auto sv = score_all(corpus.visual, models.visual);
  const auto st = score_all(corpus.text, models.text);

  auto top = [&](const std::vector<double>& s, const std::set<ItemId>& skip) {
    std::vector<ItemId> ids;
    for (ItemId i = 0; i < n; ++i) {
      if (!excluded.contains(i) && !skip.contains(i)) ids.push_back(i);
    }
    std::sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
    if (ids.size() > r) ids.resize(r);
    return ids;
  };
  const auto vis = top(sv, {});
  const auto txt = top(st, std::set<ItemId>(vis.begin(), vis.end()));

  std::vector<Candidate> pool;
  for (ItemId id : vis) pool.push_back({.id = id, .score_visual = sv[id], .score_text = st[id]});
  for (ItemId id : txt) pool.push_back({.id = id, .score_visual = sv[id], .score_text = st[id]});
  std::vector<ItemId> out;
  for (const auto& c : rank_fusion(pool, k)) out.push_back(c.id);
  return out;
}

QpResult reference_dual(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                        double c, double bias_feature, int iterations) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> q(n, std::vector<double>(n));
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      q[i][j] = y[i] * y[j] * (dense_dot(x[i], x[j]) + bias_feature * bias_feature);
    }
    trace += q[i][i];
  }
  // The trace bounds the largest eigenvalue of the PSD matrix Q.
  const double step = 1.0 / std::max(trace, 1e-12);
  std::vector<double> a(n, 0.0);
  std::vector<double> grad(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double g = -1.0;
      for (std::size_t j = 0; j < n; ++j) g += q[i][j] * a[j];
      grad[i] = g;
    }
    for (std::size_t i = 0; i < n; ++i) a[i] = std::clamp(a[i] - step * grad[i], 0.0, c);
  }
  QpResult r;
  r.alpha = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) r.objective += 0.5 * a[i] * q[i][j] * a[j];
    r.objective -= a[i];
  }
  return r;
}

}  // namespace exq::oracle
