#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scitech/common.hpp"
#include "scitech/embed.hpp"

namespace scitech {

struct Neighbor {
  std::uint32_t index = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Exact k-nearest-neighbor lists under cosine distance.
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::vector<Neighbor>> neighbors;  // per point, ascending distance

  std::size_t size() const { return neighbors.size(); }
};

enum class ReductionMethod { pca, neighbor_embedding };

inline std::string to_string(ReductionMethod m) {
  return m == ReductionMethod::pca ? "pca" : "neighbor_embedding";
}

struct ReducedVectors {
  std::size_t dim_out = 0;
  Matrix vectors;  // n x dim_out, input row order
  ReductionMethod provenance = ReductionMethod::pca;
  nlohmann::ordered_json params;
};

/// Brute-force kNN over unit vectors with d(a, b) = 1 - a.b. Ties are broken by
/// ascending index. k >= n is clamped to n - 1.
inline NeighborGraph knn_graph(std::span<const DocVector> vectors, std::size_t k,
                               Warnings* warnings = nullptr,
                               std::size_t threads = default_threads()) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error("knn_graph: need at least 2 points");
  if (k == 0) throw Error("knn_graph: k must be positive");
  if (k >= n) {
    warn(warnings, "knn_graph: k=" + std::to_string(k) + " clamped to " + std::to_string(n - 1));
    k = n - 1;
  }
  NeighborGraph g;
  g.k = k;
  g.neighbors.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<Neighbor> all;
    all.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      all.push_back({static_cast<std::uint32_t>(j),
                     cosine_distance<float, float>(vectors[i].view(), vectors[j].view())});
    }
    auto cmp = [](const Neighbor& a, const Neighbor& b) {
      return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), cmp);
    all.resize(k);
    g.neighbors[i] = std::move(all);
  });
  return g;
}

inline Matrix to_matrix(std::span<const DocVector> vectors) {
  if (vectors.empty()) return {};
  Matrix m(vectors.size(), vectors.front().vector.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    std::copy(vectors[i].vector.begin(), vectors[i].vector.end(), m.row(i).begin());
  }
  return m;
}

/// Projects mean-centered rows onto the top dim_out principal components.
/// Components are ordered by descending eigenvalue and signed so that their
/// largest-magnitude loading is positive.
inline ReducedVectors reduce_pca(const Matrix& data, std::size_t dim_out, Warnings* warnings = nullptr) {
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;
  if (dim_out == 0 || dim_out > d) throw Error("reduce_pca: dim_out must be in [1, input dim]");
  if (n < dim_out) throw Error("reduce_pca: need at least dim_out points");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      data.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(std::max<std::size_t>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("reduce_pca: eigen decomposition failed");
  const auto& evals = solver.eigenvalues();   // ascending
  const auto& evecs = solver.eigenvectors();
  const double top = std::max(0.0, evals(static_cast<Eigen::Index>(d) - 1));
  const double tol = std::max(top, 1.0) * 1e-12 * static_cast<double>(d);

  Eigen::MatrixXd components = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                     static_cast<Eigen::Index>(dim_out));
  std::size_t rank = 0;
  for (std::size_t c = 0; c < dim_out; ++c) {
    const auto col = static_cast<Eigen::Index>(d - 1 - c);
    if (evals(col) <= tol) continue;
    Eigen::VectorXd v = evecs.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    components.col(static_cast<Eigen::Index>(c)) = v;
    ++rank;
  }
  if (rank < dim_out) {
    warn(warnings, "reduce_pca: covariance rank " + std::to_string(rank) + " < dim_out " +
                       std::to_string(dim_out) + "; remaining dimensions are zero");
  }
  const Eigen::MatrixXd projected = centered * components;

  ReducedVectors out;
  out.dim_out = dim_out;
  out.provenance = ReductionMethod::pca;
  out.vectors = Matrix(n, dim_out);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim_out; ++c) {
      out.vectors(i, c) = projected(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
  }
  out.params = {{"method", "pca"}, {"dim_out", dim_out}};
  return out;
}

// ---------------------------------------------------------------------------
// Neighbor embedding (UMAP-style)

struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};

/// Fits 1 / (1 + a x^(2b)) to the target membership curve: 1 below min_dist,
/// exp(-(x - min_dist) / spread) above it, sampled on [0, 3 spread].
inline CurveParams fit_ab(double min_dist, double spread = 1.0) {
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * static_cast<double>(i) / (kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto loss = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double f = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b));
      s += (f - ys[i]) * (f - ys[i]);
    }
    return s;
  };
  // Levenberg-Marquardt on (a, b).
  double a = 1.0, b = 1.0, mu = 1e-3;
  double current = loss(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      if (x <= 0.0) continue;  // f(0) = 1 for every (a, b)
      const double p = std::pow(x, 2.0 * b);
      const double den = 1.0 + a * p;
      const double f = 1.0 / den;
      const double r = f - ys[i];
      const double da = -p / (den * den);
      const double db = -a * p * 2.0 * std::log(x) / (den * den);
      jtj00 += da * da; jtj01 += da * db; jtj11 += db * db;
      jtr0 += da * r; jtr1 += db * r;
    }
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      const double m00 = jtj00 * (1 + mu), m11 = jtj11 * (1 + mu), m01 = jtj01;
      const double det = m00 * m11 - m01 * m01;
      if (std::abs(det) < 1e-300) { mu *= 10; continue; }
      const double step_a = -(m11 * jtr0 - m01 * jtr1) / det;
      const double step_b = -(-m01 * jtr0 + m00 * jtr1) / det;
      const double na = a + step_a, nb = b + step_b;
      if (na > 0 && nb > 0) {
        const double l = loss(na, nb);
        if (l < current) {
          const double gain = current - l;
          a = na; b = nb; current = l;
          mu = std::max(mu / 10, 1e-12);
          improved = true;
          if (gain < 1e-15) return {a, b};
          break;
        }
      }
      mu *= 10;
    }
    if (!improved) break;
  }
  return {a, b};
}

struct FuzzyEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double weight = 0.0;
};

/// Symmetrized fuzzy neighbor graph: per-point kernel exp(-max(0, d - rho)/sigma)
/// with sigma calibrated so the kernel mass equals log2(k), combined by fuzzy
/// union w_ab + w_ba - w_ab w_ba. Edges are returned with a < b, sorted.
inline std::vector<FuzzyEdge> fuzzy_union_graph(const NeighborGraph& graph) {
  const std::size_t n = graph.size();
  const double target = std::log2(static_cast<double>(std::max<std::size_t>(graph.k, 2)));
  std::vector<std::vector<std::pair<std::uint32_t, double>>> directed(n);
  double mean_all = 0.0;
  std::size_t count_all = 0;
  for (const auto& nb : graph.neighbors) {
    for (const auto& e : nb) { mean_all += e.distance; ++count_all; }
  }
  mean_all = count_all ? mean_all / static_cast<double>(count_all) : 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = graph.neighbors[i];
    if (nb.empty()) continue;
    double rho = 0.0;
    for (const auto& e : nb) {
      if (e.distance > 0.0) { rho = e.distance; break; }
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), sigma = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
      double mass = 0.0;
      for (const auto& e : nb) {
        const double d = e.distance - rho;
        mass += d > 0.0 ? std::exp(-d / sigma) : 1.0;
      }
      if (std::abs(mass - target) < 1e-5) break;
      if (mass > target) {
        hi = sigma;
        sigma = (lo + hi) / 2.0;
      } else {
        lo = sigma;
        sigma = std::isinf(hi) ? sigma * 2.0 : (lo + hi) / 2.0;
      }
    }
    double mean_i = 0.0;
    for (const auto& e : nb) mean_i += e.distance;
    mean_i /= static_cast<double>(nb.size());
    const double floor = 1e-3 * (rho > 0.0 ? mean_i : mean_all);
    sigma = std::max(sigma, floor > 0.0 ? floor : 1e-12);
    for (const auto& e : nb) {
      const double d = e.distance - rho;
      directed[i].emplace_back(e.index, d > 0.0 ? std::exp(-d / sigma) : 1.0);
    }
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto [j, w] : directed[i]) {
      const auto a = static_cast<std::uint32_t>(std::min<std::size_t>(i, j));
      const auto b = static_cast<std::uint32_t>(std::max<std::size_t>(i, j));
      auto& slot = pairs[{a, b}];
      (i == a ? slot.first : slot.second) = w;
    }
  }
  std::vector<FuzzyEdge> edges;
  edges.reserve(pairs.size());
  for (const auto& [key, w] : pairs) {
    const double u = w.first + w.second - w.first * w.second;
    if (u > 0.0) edges.push_back({key.first, key.second, u});
  }
  return edges;
}

struct NeighborEmbeddingParams {
  std::size_t dim_out = 5;
  std::size_t n_epochs = 200;
  double min_dist = 0.1;
  double spread = 1.0;
  std::size_t negative_sample_rate = 5;
  std::uint64_t seed = 1;
  /// Spectral initialization uses a dense eigensolver; above this many points
  /// the layout starts from uniform random coordinates instead.
  std::size_t spectral_init_max_points = 4000;
};

namespace detail {

inline Matrix spectral_init(std::size_t n, const std::vector<FuzzyEdge>& edges, std::size_t dim,
                            Rng& rng) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& e : edges) {
    W(e.a, e.b) = e.weight;
    W(e.b, e.a) = e.weight;
  }
  Eigen::VectorXd deg = W.rowwise().sum();
  Eigen::VectorXd inv_sqrt(deg.size());
  for (Eigen::Index i = 0; i < deg.size(); ++i) inv_sqrt(i) = deg(i) > 0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  // Normalized Laplacian I - D^-1/2 W D^-1/2.
  Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * W * inv_sqrt.asDiagonal());
  L.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
  Matrix out(n, dim);
  if (solver.info() != Eigen::Success || static_cast<std::size_t>(solver.eigenvectors().cols()) < dim + 1) {
    for (auto& x : out.data) x = uniform01(rng) * 20.0 - 10.0;
    return out;
  }
  const auto& vecs = solver.eigenvectors();
  double max_abs = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    Eigen::VectorXd v = vecs.col(static_cast<Eigen::Index>(c + 1));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t i = 0; i < n; ++i) {
      out(i, c) = v(static_cast<Eigen::Index>(i));
      max_abs = std::max(max_abs, std::abs(out(i, c)));
    }
  }
  const double scale = max_abs > 0 ? 10.0 / max_abs : 1.0;
  for (auto& x : out.data) x = x * scale + normal01(rng) * 1e-4;
  return out;
}

inline double clip4(double g) { return std::clamp(g, -4.0, 4.0); }

}  // namespace detail

/// Low-dimensional layout of a neighbor graph.
///
/// Edges are sampled in proportion to their fuzzy membership; each sample
/// pulls the endpoints together under the kernel 1 / (1 + a r^(2b)) and pushes
/// the head away from negative_sample_rate uniformly drawn points that are not
/// its graph neighbors. Single-threaded and fully determined by seed.
inline ReducedVectors reduce_neighbor_embedding(const NeighborGraph& graph,
                                                const NeighborEmbeddingParams& params) {
  const std::size_t n = graph.size();
  if (n < 2) throw Error("reduce_neighbor_embedding: need at least 2 points");
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : graph.neighbors[i]) {
      if (e.index >= n || e.index == i || !(e.distance >= 0.0)) {
        throw Error("reduce_neighbor_embedding: invalid neighbor graph");
      }
    }
  }
  const std::size_t dim = params.dim_out;
  if (dim == 0) throw Error("reduce_neighbor_embedding: dim_out must be positive");
  const auto [a, b] = fit_ab(params.min_dist, params.spread);
  Rng rng(derive_seed(params.seed, 0xAB));

  auto edges = fuzzy_union_graph(graph);
  std::vector<std::vector<std::uint32_t>> adjacency(n);
  for (const auto& e : edges) {
    adjacency[e.a].push_back(e.b);
    adjacency[e.b].push_back(e.a);
  }
  for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());

  Matrix Y;
  if (n <= params.spectral_init_max_points && n > dim + 1) {
    Y = detail::spectral_init(n, edges, dim, rng);
  } else {
    Y = Matrix(n, dim);
    for (auto& x : Y.data) x = uniform01(rng) * 20.0 - 10.0;
  }

  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.weight);
  const double n_epochs = static_cast<double>(params.n_epochs);
  std::vector<FuzzyEdge> active;
  std::vector<double> eps, next_sample, eps_neg, next_neg;
  for (const auto& e : edges) {
    const double samples = n_epochs * e.weight / max_w;
    if (samples < 1.0) continue;
    active.push_back(e);
    eps.push_back(n_epochs / samples);
  }
  next_sample = eps;
  for (double x : eps) eps_neg.push_back(x / static_cast<double>(params.negative_sample_rate));
  next_neg = eps_neg;

  std::vector<double> delta(dim);
  for (std::size_t epoch = 0; epoch < params.n_epochs; ++epoch) {
    const double alpha = 1.0 - static_cast<double>(epoch) / n_epochs;
    const double ep = static_cast<double>(epoch);
    for (std::size_t ei = 0; ei < active.size(); ++ei) {
      if (next_sample[ei] > ep) continue;
      const auto head = active[ei].a;
      const auto tail = active[ei].b;
      auto yh = Y.row(head);
      auto yt = Y.row(tail);
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        delta[d] = yh[d] - yt[d];
        d2 += delta[d] * delta[d];
      }
      if (d2 > 0.0) {
        const double coef = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        for (std::size_t d = 0; d < dim; ++d) {
          const double g = detail::clip4(coef * delta[d]) * alpha;
          yh[d] += g;
          yt[d] -= g;
        }
      }
      next_sample[ei] += eps[ei];

      const auto n_neg = static_cast<std::size_t>((ep - next_neg[ei]) / eps_neg[ei]);
      for (std::size_t s = 0; s < n_neg; ++s) {
        const auto other = static_cast<std::uint32_t>(uniform_index(rng, n));
        if (other == head || std::binary_search(adjacency[head].begin(), adjacency[head].end(), other)) {
          continue;
        }
        auto yo = Y.row(other);
        double dn = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          delta[d] = yh[d] - yo[d];
          dn += delta[d] * delta[d];
        }
        if (dn <= 0.0) continue;
        const double coef = 2.0 * b / ((0.001 + dn) * (a * std::pow(dn, b) + 1.0));
        for (std::size_t d = 0; d < dim; ++d) yh[d] += detail::clip4(coef * delta[d]) * alpha;
      }
      next_neg[ei] += static_cast<double>(n_neg) * eps_neg[ei];
    }
  }
  for (double x : Y.data) {
    if (!std::isfinite(x)) throw Error("reduce_neighbor_embedding: layout diverged");
  }

  ReducedVectors out;
  out.dim_out = dim;
  out.vectors = std::move(Y);
  out.provenance = ReductionMethod::neighbor_embedding;
  out.params = {{"method", "neighbor_embedding"},
                {"k", graph.k},
                {"dim_out", dim},
                {"n_epochs", params.n_epochs},
                {"min_dist", params.min_dist},
                {"spread", params.spread},
                {"negative_sample_rate", params.negative_sample_rate},
                {"a", a},
                {"b", b},
                {"seed", params.seed}};
  return out;
}

/// Mean fraction of each point's k nearest input neighbors that are also among
/// its k nearest output neighbors (Euclidean in the output space).
inline double neighborhood_preservation(const NeighborGraph& input_graph, const Matrix& output, std::size_t k) {
  const std::size_t n = output.rows;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.emplace_back(squared_euclidean(output.row(i), output.row(j)), static_cast<std::uint32_t>(j));
    }
    const std::size_t kk = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    std::vector<std::uint32_t> out_nb;
    for (std::size_t r = 0; r < kk; ++r) out_nb.push_back(d[r].second);
    std::sort(out_nb.begin(), out_nb.end());
    std::size_t hit = 0;
    const auto& in_nb = input_graph.neighbors[i];
    for (std::size_t r = 0; r < std::min(kk, in_nb.size()); ++r) {
      if (std::binary_search(out_nb.begin(), out_nb.end(), in_nb[r].index)) ++hit;
    }
    total += static_cast<double>(hit) / static_cast<double>(kk);
  }
  return total / static_cast<double>(n);
}

}  // namespace scitech
