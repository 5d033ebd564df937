#include "koopman/grid.hpp"

#include "koopman/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace koopman
{

int AxisSpec::count() const
{
  if (!(step > 0.0) || !std::isfinite(step))
    throw DimensionError("grid axis step must be positive");
  if (!(max >= min))
    throw DimensionError("grid axis has an empty range");
  return static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1;
}

GridSpec example_grid_spec()
{
  return GridSpec{{{-2.5, 2.5, 0.05}, {-10.0, 2.7, 0.25}}, {{-1.6, 2.1, 0.2}}};
}

namespace
{

void check_axes(const std::vector<AxisSpec>& axes, const Box& box, const char* what)
{
  if (static_cast<int>(axes.size()) != box.dim())
    throw DimensionError(std::string("grid: wrong number of ") + what + " axes");
  for (int i = 0; i < box.dim(); ++i)
  {
    const auto& a = axes[i];
    a.count();
    if (a.min < box.lower[i] - 1e-12 || a.max > box.upper[i] + 1e-12)
      throw DimensionError(std::string("grid: ") + what + " axis " + std::to_string(i + 1) +
                           " leaves the system domain");
  }
}

kernels::InputMatrixFn b_fn(const KoopmanLpvModel& model)
{
  return [&model](const Vector& x, const Vector& u) {
    return input_matrix(model.dict(), model.sys(), x, u, model.quad_nodes());
  };
}

} // namespace

SchedulingGrid make_grid(const KoopmanLpvModel& model, const GridSpec& spec, bool parallel)
{
  check_axes(spec.x_axes, model.sys().x_domain(), "state");
  check_axes(spec.u_axes, model.sys().u_domain(), "input");

  std::vector<AxisSpec> axes = spec.x_axes;
  axes.insert(axes.end(), spec.u_axes.begin(), spec.u_axes.end());
  std::vector<int> counts;
  std::size_t total = 1;
  for (const auto& a : axes)
  {
    counts.push_back(a.count());
    total *= static_cast<std::size_t>(counts.back());
  }

  const int n_x = model.n_x();
  SchedulingGrid grid;
  grid.spec = spec;
  grid.xs.reserve(total);
  grid.us.reserve(total);
  std::vector<int> idx(axes.size(), 0);
  for (std::size_t p = 0; p < total; ++p)
  {
    Vector x(n_x), u(model.n_u());
    for (std::size_t a = 0; a < axes.size(); ++a)
    {
      // clamp guards against the last lattice value overshooting by rounding
      const double v = std::min(axes[a].value(idx[a]), axes[a].max);
      if (static_cast<int>(a) < n_x)
        x[a] = v;
      else
        u[a - n_x] = v;
    }
    grid.xs.push_back(std::move(x));
    grid.us.push_back(std::move(u));
    for (std::size_t a = axes.size(); a-- > 0;)
    {
      if (++idx[a] < counts[a])
        break;
      idx[a] = 0;
    }
  }
  const auto fn = b_fn(model);
  grid.b_values = parallel ? kernels::parallel::input_matrices(fn, grid.xs, grid.us)
                           : kernels::serial::input_matrices(fn, grid.xs, grid.us);
  return grid;
}

SchedulingGrid grid_from_points(const KoopmanLpvModel& model, std::vector<Vector> xs,
                                std::vector<Vector> us)
{
  if (xs.size() != us.size())
    throw DimensionError("grid_from_points: state and input lists differ in length");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!model.sys().x_domain().contains(xs[i]) || !model.sys().u_domain().contains(us[i]))
      throw DimensionError("grid_from_points: point " + std::to_string(i) +
                           " lies outside the system domain");
  SchedulingGrid grid;
  grid.xs = std::move(xs);
  grid.us = std::move(us);
  grid.b_values = kernels::parallel::input_matrices(b_fn(model), grid.xs, grid.us);
  return grid;
}

namespace
{

SchedulingGrid select(const SchedulingGrid& grid, const std::vector<std::size_t>& keep)
{
  SchedulingGrid out;
  out.spec = grid.spec;
  out.xs.reserve(keep.size());
  out.us.reserve(keep.size());
  out.b_values.reserve(keep.size());
  for (auto i : keep)
  {
    out.xs.push_back(grid.xs[i]);
    out.us.push_back(grid.us[i]);
    out.b_values.push_back(grid.b_values[i]);
  }
  return out;
}

} // namespace

SchedulingGrid subsample(const SchedulingGrid& grid, std::size_t n, std::uint64_t seed)
{
  if (n > grid.size())
    throw DimensionError("subsample: requested " + std::to_string(n) + " of " +
                         std::to_string(grid.size()) + " points");
  if (n == grid.size())
    return grid;
  // partial Fisher-Yates with explicit index draws so the result is portable
  std::vector<std::size_t> perm(grid.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i)
  {
    const std::size_t span = perm.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(rng() % span);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return select(grid, perm);
}

SchedulingGrid reduce_constraints(const SchedulingGrid& grid, ReductionReport* report)
{
  ReductionReport rep;
  rep.before = grid.size();
  std::vector<Vector> pts;
  pts.reserve(grid.size());
  for (const auto& B : grid.b_values)
    pts.push_back(Eigen::Map<const Vector>(B.data(), B.size()));

  std::vector<std::size_t> keep;
  try
  {
    keep = hull_vertices(pts, &rep.affine_dimension);
  }
  catch (const Error& e)
  {
    rep.fallback = true;
    rep.warning = std::string("convex hull unavailable (") + e.what() +
                  "); only duplicate B_z values removed";
    // exact duplicates are still redundant
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(pts[a].data(), pts[a].data() + pts[a].size(),
                                          pts[b].data(), pts[b].data() + pts[b].size());
    });
    for (std::size_t k = 0; k < order.size(); ++k)
      if (k == 0 || pts[order[k]] != pts[order[k - 1]])
        keep.push_back(order[k]);
  }
  std::sort(keep.begin(), keep.end());
  auto out = select(grid, keep);
  rep.after = out.size();
  if (report)
    *report = rep;
  return out;
}

} // namespace koopman
