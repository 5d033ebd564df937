#include "koopman/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace koopman
{

namespace
{

struct Planar
{
  double a;
  double b;
  std::size_t index;
};

double cross(const Planar& o, const Planar& p, const Planar& q)
{
  return (p.a - o.a) * (q.b - o.b) - (p.b - o.b) * (q.a - o.a);
}

// Andrew's monotone chain; collinear boundary points are dropped.
std::vector<std::size_t> planar_hull(std::vector<Planar> pts, double scale)
{
  std::stable_sort(pts.begin(), pts.end(), [](const Planar& p, const Planar& q) {
    return p.a < q.a || (p.a == q.a && p.b < q.b);
  });
  const double same = 1e-12 * scale;
  std::vector<Planar> uniq;
  for (const auto& p : pts)
    if (uniq.empty() || std::abs(p.a - uniq.back().a) > same || std::abs(p.b - uniq.back().b) > same)
      uniq.push_back(p);
  if (uniq.size() < 3)
  {
    std::vector<std::size_t> out;
    for (const auto& p : uniq)
      out.push_back(p.index);
    return out;
  }
  const double eps = 1e-12 * scale * scale;
  std::vector<Planar> h(2 * uniq.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < uniq.size(); ++i)
  {
    while (k >= 2 && cross(h[k - 2], h[k - 1], uniq[i]) <= eps)
      --k;
    h[k++] = uniq[i];
  }
  for (std::size_t i = uniq.size() - 1, lower = k + 1; i-- > 0;)
  {
    while (k >= lower && cross(h[k - 2], h[k - 1], uniq[i]) <= eps)
      --k;
    h[k++] = uniq[i];
  }
  h.resize(k - 1);
  std::vector<std::size_t> out;
  for (const auto& p : h)
    out.push_back(p.index);
  return out;
}

} // namespace

std::vector<std::size_t> hull_vertices(const std::vector<Vector>& points, int* affine_dim)
{
  if (points.empty())
  {
    if (affine_dim)
      *affine_dim = 0;
    return {};
  }
  const auto d = points.front().size();
  Vector centroid = Vector::Zero(d);
  for (const auto& p : points)
    centroid += p;
  centroid /= static_cast<double>(points.size());
  Matrix cov = Matrix::Zero(d, d);
  double scale = 0.0;
  for (const auto& p : points)
  {
    const Vector c = p - centroid;
    cov.noalias() += c * c.transpose();
    scale = std::max(scale, c.cwiseAbs().maxCoeff());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector lam = es.eigenvalues().reverse();
  const Matrix dirs = es.eigenvectors().rowwise().reverse();
  int rank = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(0) > 0.0 && std::sqrt(std::max(lam(i), 0.0)) > 1e-9 * std::sqrt(lam(0)))
      ++rank;
  if (affine_dim)
    *affine_dim = rank;

  if (rank == 0)
    return {0};
  if (rank > 2)
    throw Error("affine dimension " + std::to_string(rank) + " is not supported");

  std::vector<Planar> planar;
  planar.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
  {
    const Vector c = points[i] - centroid;
    planar.push_back({dirs.col(0).dot(c), rank == 2 ? dirs.col(1).dot(c) : 0.0, i});
  }
  if (rank == 1)
  {
    auto [lo, hi] = std::minmax_element(planar.begin(), planar.end(),
                                        [](const Planar& p, const Planar& q) { return p.a < q.a; });
    return {lo->index, hi->index};
  }
  return planar_hull(std::move(planar), std::max(scale, 1e-300));
}

} // namespace koopman
