#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "fwal/mdp.hpp"

namespace fwal {

/// Vertices closer than this are merged.
inline constexpr double kVertexDedupTolerance = 1e-9;
/// Largest number of deterministic policies enumerate_polytope will visit.
inline constexpr double kEnumerationLimit = 1e6;

struct PolytopeVertex {
  FeatureVector phi;
  /// Every deterministic policy whose feature expectations land on this vertex.
  std::vector<DeterministicPolicy> policies;
};

/**
 * Feature-expectations polytope of a small MDP, held as the deduplicated list
 * of Phi(pi) over all deterministic policies. Not every listed point needs to
 * be extreme.
 */
struct PolytopeModel {
  std::vector<PolytopeVertex> vertices;
  std::size_t k = 0;
  double discount = 0.0;
  double diameter = 0.0;
  std::optional<double> facial_distance;

  std::size_t size() const noexcept { return vertices.size(); }

  /// Vertices as columns of a k x n matrix.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = vertices[i].phi;
    return m;
  }
};

inline double diameter_of(const std::vector<FeatureVector>& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::max(best, (points[i] - points[j]).norm());
  return best;
}

/// Builds a model from explicit points, merging points within kVertexDedupTolerance.
inline PolytopeModel polytope_from_points(const std::vector<FeatureVector>& points, double discount = 0.0) {
  if (points.empty()) detail::fail("polytope needs at least one point");
  PolytopeModel model;
  model.k = static_cast<std::size_t>(points.front().size());
  model.discount = discount;
  std::vector<FeatureVector> unique;
  for (const auto& p : points) {
    if (static_cast<std::size_t>(p.size()) != model.k) detail::fail("points must share a dimension");
    const bool seen = std::any_of(unique.begin(), unique.end(),
                                  [&](const FeatureVector& u) { return (u - p).norm() <= kVertexDedupTolerance; });
    if (!seen) unique.push_back(p);
  }
  for (auto& u : unique) model.vertices.push_back({std::move(u), {}});
  std::vector<FeatureVector> phis;
  for (const auto& v : model.vertices) phis.push_back(v.phi);
  model.diameter = diameter_of(phis);
  return model;
}

/**
 * Enumerates all |A|^|S| deterministic policies and collects their distinct
 * feature expectations. Refuses instances with more than 10^6 policies.
 */
inline PolytopeModel enumerate_polytope(const MdpSpec& mdp) {
  const double count = std::pow(static_cast<double>(mdp.n_actions()), static_cast<double>(mdp.n_states()));
  if (count > kEnumerationLimit)
    detail::fail("enumeration of ", count, " policies exceeds the limit of ", kEnumerationLimit);

  PolytopeModel model;
  model.k = mdp.feature_dim();
  model.discount = mdp.discount();
  DeterministicPolicy pi = DeterministicPolicy::constant(mdp.n_states());
  for (;;) {
    FeatureVector phi = feature_expectations_exact(mdp, pi);
    auto it = std::find_if(model.vertices.begin(), model.vertices.end(), [&](const PolytopeVertex& v) {
      return (v.phi - phi).norm() <= kVertexDedupTolerance;
    });
    if (it == model.vertices.end())
      model.vertices.push_back({std::move(phi), {pi}});
    else
      it->policies.push_back(pi);

    std::size_t s = 0;
    while (s < pi.size() && ++pi.action[s] == mdp.n_actions()) pi.action[s++] = 0;
    if (s == pi.size()) break;
  }
  std::vector<FeatureVector> phis;
  for (const auto& v : model.vertices) phis.push_back(v.phi);
  model.diameter = diameter_of(phis);
  return model;
}

struct MinNormResult {
  FeatureVector point;
  /// Convex weights over the input columns.
  Eigen::VectorXd weights;
  std::size_t iterations = 0;
};

/**
 * Wolfe's minimum-norm-point method: the point of conv(columns of P) closest
 * to the origin, together with convex weights that reproduce it.
 */
inline MinNormResult min_norm_point(const Eigen::MatrixXd& points, std::size_t max_iterations = 10000) {
  const auto n = points.cols();
  if (n == 0) detail::fail("min-norm point of an empty set");
  const double scale = std::max(1.0, points.colwise().squaredNorm().maxCoeff());
  const double tol = 1e-12 * scale;

  Eigen::Index first = 0;
  points.colwise().squaredNorm().minCoeff(&first);
  std::vector<Eigen::Index> active{first};
  std::vector<double> lambda{1.0};
  FeatureVector x = points.col(first);

  auto affine_minimizer = [&]() {
    const auto m = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j)
        sys(i, j) = points.col(active[static_cast<std::size_t>(i)]).dot(points.col(active[static_cast<std::size_t>(j)]));
      sys(i, m) = 1.0;
      sys(m, i) = 1.0;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs[m] = 1.0;
    Eigen::VectorXd sol = sys.completeOrthogonalDecomposition().solve(rhs);
    return Eigen::VectorXd(sol.head(m));
  };
  auto combine = [&]() {
    FeatureVector y = FeatureVector::Zero(points.rows());
    for (std::size_t i = 0; i < active.size(); ++i) y += lambda[i] * points.col(active[i]);
    return y;
  };

  std::size_t iter = 0;
  for (; iter < max_iterations; ++iter) {
    Eigen::Index j = 0;
    (points.transpose() * x).minCoeff(&j);
    if (x.dot(points.col(j)) >= x.squaredNorm() - tol) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    for (;;) {
      const Eigen::VectorXd mu = affine_minimizer();
      if ((mu.array() > 0.0).all()) {
        lambda.assign(mu.data(), mu.data() + mu.size());
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < active.size(); ++i)
        if (mu[static_cast<Eigen::Index>(i)] <= 0.0)
          theta = std::min(theta, lambda[i] / (lambda[i] - mu[static_cast<Eigen::Index>(i)]));
      for (std::size_t i = 0; i < active.size(); ++i)
        lambda[i] += theta * (mu[static_cast<Eigen::Index>(i)] - lambda[i]);
      std::vector<Eigen::Index> keep_idx;
      std::vector<double> keep_lambda;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (lambda[i] > 1e-15) {
          keep_idx.push_back(active[i]);
          keep_lambda.push_back(lambda[i]);
        }
      }
      if (keep_idx.empty()) {
        // Cannot happen in exact arithmetic; fall back to the new point alone.
        keep_idx.push_back(active.back());
        keep_lambda.push_back(1.0);
      }
      active.swap(keep_idx);
      lambda.swap(keep_lambda);
    }
    double total = 0.0;
    for (double l : lambda) total += l;
    for (double& l : lambda) l /= total;
    x = combine();
  }

  MinNormResult out{x, Eigen::VectorXd::Zero(n), iter};
  for (std::size_t i = 0; i < active.size(); ++i) out.weights[active[i]] = lambda[i];
  return out;
}

struct Projection {
  FeatureVector point;
  /// Convex weights over the model's vertices.
  Eigen::VectorXd coefficients;
  double distance = 0.0;
};

/// Euclidean projection onto the convex hull of the model's vertices.
inline Projection project_onto_hull(const PolytopeModel& model, const FeatureVector& point) {
  if (model.vertices.empty()) detail::fail("cannot project onto an empty polytope");
  if (static_cast<std::size_t>(point.size()) != model.k) detail::fail("point has the wrong dimension");
  const Eigen::MatrixXd shifted = model.matrix().colwise() - point;
  const MinNormResult mnp = min_norm_point(shifted);
  Projection out;
  out.coefficients = mnp.weights;
  out.point = model.matrix() * mnp.weights;
  out.distance = (out.point - point).norm();
  return out;
}

struct Membership {
  bool member = false;
  double distance = 0.0;
};

inline Membership hull_membership(const PolytopeModel& model, const FeatureVector& point, double tol) {
  const double d = project_onto_hull(model, point).distance;
  return {d <= tol, d};
}

/// Distance between conv(a) and conv(b), both given as column sets.
inline double hull_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd diff(a.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) diff.col(i * b.cols() + j) = a.col(i) - b.col(j);
  return min_norm_point(diff).point.norm();
}

namespace detail {

inline double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Indices of the extreme points of a planar set in counter-clockwise order (monotone chain).
inline std::vector<std::size_t> convex_hull_2d(const std::vector<Eigen::Vector2d>& pts, double eps) {
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x() < pts[b].x() || (pts[a].x() == pts[b].x() && pts[a].y() < pts[b].y());
  });
  if (order.size() < 3) return order;
  std::vector<std::size_t> hull(2 * order.size());
  std::size_t h = 0;
  for (std::size_t i : order) {
    while (h >= 2 && cross2(pts[hull[h - 2]], pts[hull[h - 1]], pts[i]) <= eps) --h;
    hull[h++] = i;
  }
  for (std::size_t i = order.size() - 1, lower = h + 1; i-- > 0;) {
    const std::size_t p = order[i];
    while (h >= lower && cross2(pts[hull[h - 2]], pts[hull[h - 1]], pts[p]) <= eps) --h;
    hull[h++] = p;
  }
  hull.resize(h - 1);
  return hull;
}

inline Eigen::MatrixXd columns(const std::vector<Eigen::Vector2d>& pts, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd m(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[idx[i]];
  return m;
}

}  // namespace detail

/**
 * Facial distance of a planar polytope: the smallest distance between a
 * proper face F (an extreme vertex or an edge) and the hull of the extreme
 * points not on F. Only k = 2 is supported.
 */
inline double facial_distance_2d(const PolytopeModel& model) {
  if (model.k != 2) detail::fail("facial distance is only implemented for k = 2, got k = ", model.k);
  if (model.vertices.size() < 2) detail::fail("facial distance needs at least two distinct points");

  std::vector<Eigen::Vector2d> pts;
  for (const auto& v : model.vertices) pts.emplace_back(v.phi[0], v.phi[1]);
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, p.cwiseAbs().maxCoeff());
  const double eps = 1e-12 * std::max(1.0, extent * extent);

  const auto hull = detail::convex_hull_2d(pts, eps);
  if (hull.size() == 2) return (pts[hull[0]] - pts[hull[1]]).norm();

  std::vector<std::vector<std::size_t>> faces;
  for (std::size_t e = 0; e < hull.size(); ++e) {
    faces.push_back({hull[e]});
    faces.push_back({hull[e], hull[(e + 1) % hull.size()]});
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& face : faces) {
    std::vector<std::size_t> rest;
    for (std::size_t h : hull)
      if (std::find(face.begin(), face.end(), h) == face.end()) rest.push_back(h);
    best = std::min(best, hull_distance(detail::columns(pts, face), detail::columns(pts, rest)));
  }
  return best;
}

inline nlohmann::json to_json(const PolytopeModel& model) {
  nlohmann::json j;
  j["k"] = model.k;
  j["gamma"] = model.discount;
  j["n_vertices"] = model.vertices.size();
  j["diameter"] = model.diameter;
  j["diameter_bound"] = std::sqrt(static_cast<double>(model.k)) / (1.0 - model.discount);
  j["facial_distance"] = model.facial_distance ? nlohmann::json(*model.facial_distance) : nlohmann::json(nullptr);
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (const auto& v : model.vertices) {
    nlohmann::json vj;
    vj["phi"] = std::vector<double>(v.phi.begin(), v.phi.end());
    auto& pols = vj["policies"] = nlohmann::json::array();
    for (const auto& p : v.policies) pols.push_back(p.action);
    verts.push_back(std::move(vj));
  }
  return j;
}

}  // namespace fwal
