#pragma once

#include "koopman/lifting.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace koopman
{

/// Samples min, min + step, ... up to max. The upper end is included when it lies on
/// the lattice; no off-lattice endpoint is appended.
struct AxisSpec
{
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  int count() const;
  double value(int i) const { return min + i * step; }
};

struct GridSpec
{
  std::vector<AxisSpec> x_axes;
  std::vector<AxisSpec> u_axes;
};

/// x1 in [-2.5, 2.5] step 0.05, x2 in [-10, 2.7] step 0.25, u in [-1.6, 2.1] step 0.2.
GridSpec example_grid_spec();

/// Scheduling points (x, u) with cached B_z values.
struct SchedulingGrid
{
  std::vector<Vector> xs;
  std::vector<Vector> us;
  std::vector<Matrix> b_values;
  GridSpec spec; // empty axes when built from explicit points

  std::size_t size() const { return xs.size(); }
};

/// Cartesian product of the axes, B_z evaluated in parallel. Throws DimensionError on a
/// non-positive step, an empty range or a range outside the system domain.
SchedulingGrid make_grid(const KoopmanLpvModel& model, const GridSpec& spec, bool parallel = true);

SchedulingGrid grid_from_points(const KoopmanLpvModel& model, std::vector<Vector> xs,
                                std::vector<Vector> us);

/// Uniform sample without replacement; the chosen points keep their original order.
SchedulingGrid subsample(const SchedulingGrid& grid, std::size_t n, std::uint64_t seed);

struct ReductionReport
{
  std::size_t before = 0;
  std::size_t after = 0;
  int affine_dimension = 0;
  bool fallback = false;
  std::string warning;
};

/// Keeps the points whose vectorized B_z lies on the convex hull of all B_z values.
/// The LMIs are affine in B_k, so the feasible set is unchanged. Hulls of affine
/// dimension above two fall back to removing duplicates only, with a warning.
SchedulingGrid reduce_constraints(const SchedulingGrid& grid, ReductionReport* report = nullptr);

/// Indices of the extreme points of a point set (duplicates collapse onto the first).
/// Throws Error when the affine dimension exceeds two.
std::vector<std::size_t> hull_vertices(const std::vector<Vector>& points, int* affine_dim = nullptr);

} // namespace koopman
