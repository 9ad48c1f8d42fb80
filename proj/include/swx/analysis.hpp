// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "swx/oracle.hpp"
#include "swx/search.hpp"

namespace swx {

// ---------------------------------------------------------------------------
// Distance matrices and diversity
// ---------------------------------------------------------------------------

enum class DistanceMethod { Cswx, Rcswx };

inline const char* to_string(DistanceMethod m) {
  return m == DistanceMethod::Cswx ? "cswx" : "rcswx";
}

inline DistanceMethod distance_method_by_name(const std::string& s) {
  if (s == "cswx") return DistanceMethod::Cswx;
  if (s == "rcswx") return DistanceMethod::Rcswx;
  throw DomainError("unknown distance method: " + s);
}

inline double tree_distance(const DerivationTree& a, const DerivationTree& b,
                            DistanceMethod method, const ScoringMatrix& m) {
  return method == DistanceMethod::Cswx ? cswx_distance(a, b, m) : rcswx_distance(a, b, m);
}

struct DistanceMatrix {
  std::vector<std::string> labels;
  std::vector<double> values;  // n x n, symmetric, zero diagonal
  DistanceMethod method = DistanceMethod::Rcswx;
  ScoringPreset scoring = ScoringPreset::SM0;

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }

  void write_csv(std::ostream& out, const std::string& header_comment = "") const {
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "# method=" << to_string(method) << " scoring=" << to_string(scoring) << "\n";
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << labels[j];
    out << "\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << at(i, j);
      out << "\n";
    }
  }
};

// Each unordered pair is computed once; with threads > 1 the pair list is
// partitioned statically and workers write disjoint slots, so the result is
// bit-identical to the sequential run.
inline DistanceMatrix pairwise_distance_matrix(const std::vector<DerivationTree>& trees,
                                               DistanceMethod method, const ScoringMatrix& m,
                                               int threads = 1) {
  DistanceMatrix out;
  out.method = method;
  out.scoring = m.preset;
  const std::size_t n = trees.size();
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.labels.push_back(trees[i].tree_id.empty() ? "t" + std::to_string(i)
                                                  : trees[i].tree_id);
  out.values.assign(n * n, 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j});

  std::exception_ptr first_error = nullptr;
  std::mutex error_mutex;
  auto work = [&](std::size_t begin, std::size_t end) {
    try {
      for (std::size_t k = begin; k < end; ++k) {
        auto [i, j] = pairs[k];
        double d = tree_distance(trees[i], trees[j], method, m);
        out.at(i, j) = d;
        out.at(j, i) = d;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (threads <= 1 || pairs.size() < 2) {
    work(0, pairs.size());
  } else {
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(threads), pairs.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (pairs.size() + nw - 1) / nw;
    for (std::size_t w = 0; w < nw; ++w) {
      std::size_t b = w * chunk;
      std::size_t e = std::min(pairs.size(), b + chunk);
      if (b >= e) break;
      pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

// Mean pairwise distance (upper triangle).
inline double population_diversity(const std::vector<DerivationTree>& trees,
                                   DistanceMethod method, const ScoringMatrix& m) {
  if (trees.size() < 2)
    throw DomainError("population diversity needs at least two trees");
  double sum = 0;
  int count = 0;
  for (std::size_t i = 0; i < trees.size(); ++i)
    for (std::size_t j = i + 1; j < trees.size(); ++j) {
      sum += tree_distance(trees[i], trees[j], method, m);
      ++count;
    }
  return sum / count;
}

// ---------------------------------------------------------------------------
// Semivariogram
// ---------------------------------------------------------------------------

struct VariogramBin {
  double h = 0;      // bin midpoint
  double gamma = 0;  // (1 / 2N) sum of squared fitness differences
  int count = 0;     // pairs in the bin
};

inline std::vector<VariogramBin> empirical_semivariogram(const DistanceMatrix& dist,
                                                         const std::vector<double>& fitness,
                                                         int bins) {
  if (bins < 2) throw DomainError("semivariogram needs at least 2 bins");
  if (fitness.size() != dist.size())
    throw DomainError("fitness vector length must match the distance matrix");
  const std::size_t n = dist.size();
  double hmax = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) hmax = std::max(hmax, dist.at(i, j));
  if (hmax <= 0) hmax = 1;
  const double width = hmax / bins;

  std::vector<double> acc(static_cast<std::size_t>(bins), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double h = dist.at(i, j);
      int b = std::min(bins - 1, static_cast<int>(h / width));
      double df = fitness[i] - fitness[j];
      acc[static_cast<std::size_t>(b)] += df * df;
      cnt[static_cast<std::size_t>(b)] += 1;
    }

  std::vector<VariogramBin> out;
  for (int b = 0; b < bins; ++b) {
    if (cnt[static_cast<std::size_t>(b)] == 0) continue;  // empty bins omitted
    VariogramBin vb;
    vb.h = (b + 0.5) * width;
    vb.gamma = acc[static_cast<std::size_t>(b)] / (2.0 * cnt[static_cast<std::size_t>(b)]);
    vb.count = cnt[static_cast<std::size_t>(b)];
    out.push_back(vb);
  }
  return out;
}

struct SemivariogramModel {
  double nugget = 0;
  double sill = 0;
  double range = 1;
  double residual = 0;  // weighted least-squares residual of the fit
  bool degenerate = false;

  double operator()(double h) const {
    if (h <= 0) return nugget;
    if (h >= range) return sill;
    double r = h / range;
    return nugget + (sill - nugget) * (1.5 * r - 0.5 * r * r * r);
  }
};

namespace detail {

inline double variogram_loss(const std::vector<VariogramBin>& pts, double nugget,
                             double partial, double range) {
  SemivariogramModel mdl;
  mdl.nugget = nugget;
  mdl.sill = nugget + partial;
  mdl.range = range;
  double loss = 0;
  for (const auto& p : pts) {
    double d = p.gamma - mdl(p.h);
    loss += p.count * d * d;
  }
  return loss;
}

// Nelder-Mead on (nugget, partial, range) with projection onto the bounds.
inline std::array<double, 3> nelder_mead_variogram(const std::vector<VariogramBin>& pts,
                                                   std::array<double, 3> start,
                                                   double scale, double range_floor) {
  auto clamp = [&](std::array<double, 3> x) {
    x[0] = std::max(0.0, x[0]);
    x[1] = std::max(0.0, x[1]);
    x[2] = std::max(range_floor, x[2]);
    return x;
  };
  auto f = [&](const std::array<double, 3>& x) {
    return variogram_loss(pts, x[0], x[1], x[2]);
  };

  std::array<std::array<double, 3>, 4> simplex;
  simplex[0] = clamp(start);
  for (int k = 0; k < 3; ++k) {
    auto v = start;
    v[static_cast<std::size_t>(k)] += std::max(scale, 0.25 * std::abs(v[static_cast<std::size_t>(k)]) + 1e-6);
    simplex[static_cast<std::size_t>(k) + 1] = clamp(v);
  }
  std::array<double, 4> fv;
  for (int k = 0; k < 4; ++k) fv[static_cast<std::size_t>(k)] = f(simplex[static_cast<std::size_t>(k)]);

  for (int iter = 0; iter < 400; ++iter) {
    std::array<int, 4> ord = {0, 1, 2, 3};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) {
      return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)];
    });
    std::array<std::array<double, 3>, 4> s2;
    std::array<double, 4> f2;
    for (int k = 0; k < 4; ++k) {
      s2[static_cast<std::size_t>(k)] = simplex[static_cast<std::size_t>(ord[static_cast<std::size_t>(k)])];
      f2[static_cast<std::size_t>(k)] = fv[static_cast<std::size_t>(ord[static_cast<std::size_t>(k)])];
    }
    simplex = s2;
    fv = f2;
    if (std::abs(fv[3] - fv[0]) < 1e-14 * (1 + std::abs(fv[0]))) break;

    std::array<double, 3> centroid = {0, 0, 0};
    for (int k = 0; k < 3; ++k)
      for (int d = 0; d < 3; ++d)
        centroid[static_cast<std::size_t>(d)] +=
            simplex[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] / 3.0;

    auto blend = [&](double t) {
      std::array<double, 3> x;
      for (int d = 0; d < 3; ++d)
        x[static_cast<std::size_t>(d)] = centroid[static_cast<std::size_t>(d)] +
                                         t * (simplex[3][static_cast<std::size_t>(d)] -
                                              centroid[static_cast<std::size_t>(d)]);
      return clamp(x);
    };

    auto reflected = blend(-1.0);
    double fr = f(reflected);
    if (fr < fv[0]) {
      auto expanded = blend(-2.0);
      double fe = f(expanded);
      if (fe < fr) {
        simplex[3] = expanded;
        fv[3] = fe;
      } else {
        simplex[3] = reflected;
        fv[3] = fr;
      }
    } else if (fr < fv[2]) {
      simplex[3] = reflected;
      fv[3] = fr;
    } else {
      auto contracted = blend(0.5);
      double fc = f(contracted);
      if (fc < fv[3]) {
        simplex[3] = contracted;
        fv[3] = fc;
      } else {
        for (int k = 1; k < 4; ++k) {
          for (int d = 0; d < 3; ++d)
            simplex[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] =
                0.5 * (simplex[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] +
                       simplex[0][static_cast<std::size_t>(d)]);
          simplex[static_cast<std::size_t>(k)] = clamp(simplex[static_cast<std::size_t>(k)]);
          fv[static_cast<std::size_t>(k)] = f(simplex[static_cast<std::size_t>(k)]);
        }
      }
    }
  }
  int best = 0;
  for (int k = 1; k < 4; ++k)
    if (fv[static_cast<std::size_t>(k)] < fv[static_cast<std::size_t>(best)]) best = k;
  return simplex[static_cast<std::size_t>(best)];
}

}  // namespace detail

// Weighted least squares over the spherical form, bounded multistart local
// optimisation (8 starts). Flat inputs are flagged degenerate: the sill
// collapses onto the nugget and the range is unidentifiable.
inline SemivariogramModel fit_spherical(const std::vector<VariogramBin>& points) {
  if (points.size() < 4)
    throw DomainError("spherical fit needs at least 4 populated bins");
  double hmax = 0, gmax = 0, gmin = kInf;
  for (const auto& p : points) {
    hmax = std::max(hmax, p.h);
    gmax = std::max(gmax, p.gamma);
    gmin = std::min(gmin, p.gamma);
  }
  const double range_floor = 1e-6 * std::max(1.0, hmax);

  double best_loss = kInf;
  std::array<double, 3> best = {0, std::max(gmax, 1e-12), std::max(hmax, range_floor)};
  const double nugget_starts[2] = {0.0, std::max(0.0, gmin)};
  const double range_starts[4] = {0.25 * hmax, 0.5 * hmax, 0.75 * hmax, hmax};
  for (double n0 : nugget_starts) {
    for (double a0 : range_starts) {
      std::array<double, 3> start = {n0, std::max(gmax - n0, 1e-12), std::max(a0, range_floor)};
      auto x = detail::nelder_mead_variogram(points, start, 0.1 * std::max(gmax, 1e-12),
                                             range_floor);
      double loss = detail::variogram_loss(points, x[0], x[1], x[2]);
      if (loss < best_loss) {
        best_loss = loss;
        best = x;
      }
    }
  }
  if (!std::isfinite(best_loss))
    throw DomainError("spherical fit failed to converge from any start");

  SemivariogramModel mdl;
  mdl.nugget = best[0];
  mdl.sill = best[0] + best[1];
  mdl.range = best[2];
  mdl.residual = best_loss;
  // flat landscape: no structure to identify
  if (best[1] <= 1e-9 * std::max(1.0, mdl.sill) || gmax - gmin <= 1e-12)
    mdl.degenerate = true;
  return mdl;
}

// ---------------------------------------------------------------------------
// Metric axiom verification
// ---------------------------------------------------------------------------

struct MetricAxiomReport {
  int pairs_checked = 0;
  int triples_checked = 0;
  int violations = 0;
  double worst_symmetry_gap = 0;
  double worst_triangle_slack = 0;  // most negative d(ac) - d(ab) - d(bc) ... clamped at 0
  double worst_identity_residual = 0;
  double worst_permutation_residual = 0;  // RCSWX only

  bool passed() const { return violations == 0; }
};

// Over n sampled pairs/triples: nonnegativity, d(x,x)=0, exact symmetry,
// triangle inequality with slack >= -1e-9; for RCSWX also d(x, pi(x)) = 0
// under random branch permutations.
inline MetricAxiomReport metric_axiom_check(
    const std::function<DerivationTree(Rng&)>& sampler, int n, DistanceMethod method,
    const ScoringMatrix& m, Rng& rng, int permutation_checks = 0) {
  MetricAxiomReport rep;
  for (int k = 0; k < n; ++k) {
    DerivationTree a = sampler(rng);
    DerivationTree b = sampler(rng);
    double dab = tree_distance(a, b, method, m);
    double dba = tree_distance(b, a, method, m);
    double daa = tree_distance(a, a, method, m);
    ++rep.pairs_checked;
    if (dab < 0 || dba < 0) ++rep.violations;
    double sym = std::abs(dab - dba);
    rep.worst_symmetry_gap = std::max(rep.worst_symmetry_gap, sym);
    if (sym != 0) ++rep.violations;
    rep.worst_identity_residual = std::max(rep.worst_identity_residual, std::abs(daa));
    if (daa != 0) ++rep.violations;
  }
  for (int k = 0; k < n; ++k) {
    DerivationTree a = sampler(rng);
    DerivationTree b = sampler(rng);
    DerivationTree c = sampler(rng);
    double dab = tree_distance(a, b, method, m);
    double dbc = tree_distance(b, c, method, m);
    double dac = tree_distance(a, c, method, m);
    ++rep.triples_checked;
    double slack = dab + dbc - dac;
    rep.worst_triangle_slack = std::min(rep.worst_triangle_slack, slack);
    if (slack < -1e-9) ++rep.violations;
  }
  if (method == DistanceMethod::Rcswx) {
    for (int k = 0; k < permutation_checks; ++k) {
      DerivationTree a = sampler(rng);
      int b2 = branch2_count(a);
      std::vector<bool> bits(static_cast<std::size_t>(b2));
      for (int s = 0; s < b2; ++s) bits[static_cast<std::size_t>(s)] = rng.bernoulli(0.5);
      DerivationTree p = permute_branches(a, bits);
      double d = tree_distance(a, p, method, m);
      rep.worst_permutation_residual = std::max(rep.worst_permutation_residual, std::abs(d));
      if (d != 0) ++rep.violations;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Scoring-matrix sensitivity
// ---------------------------------------------------------------------------

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return sxx == syy ? 1.0 : 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Ordinary least squares y = a + b x; returns R^2.
inline double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 1.0;
  double b = sxy / sxx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = my + b * (x[i] - mx);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  return 1.0 - ss_res / syy;
}

struct SensitivityEntry {
  ScoringPreset preset;
  double pearson_r = 0;
  double r_squared = 0;
  std::vector<double> distances;
};

struct SensitivityReport {
  std::vector<double> baseline;  // SM0 distances
  std::vector<SensitivityEntry> entries;
};

// Distances under each preset for the given pairs, correlated against SM0.
inline SensitivityReport scoring_sensitivity(
    const std::vector<std::pair<DerivationTree, DerivationTree>>& pairs,
    const std::vector<ScoringMatrix>& presets) {
  if (pairs.size() < 20)
    throw DomainError("scoring sensitivity needs at least 20 pairs");
  SensitivityReport rep;
  for (const auto& [a, b] : pairs)
    rep.baseline.push_back(rcswx_distance(a, b, ScoringMatrix::sm0()));
  for (const auto& m : presets) {
    SensitivityEntry e;
    e.preset = m.preset;
    for (const auto& [a, b] : pairs) e.distances.push_back(rcswx_distance(a, b, m));
    e.pearson_r = pearson(rep.baseline, e.distances);
    e.r_squared = linear_fit_r2(rep.baseline, e.distances);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace swx
