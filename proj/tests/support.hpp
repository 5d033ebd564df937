#pragma once

// Shared fixtures for the test binaries.

#include "koopman/dynamics.hpp"
#include "koopman/error_analysis.hpp"
#include "koopman/grid.hpp"
#include "koopman/lifting.hpp"
#include "koopman/synthesis.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace koopman::testing
{

inline const KoopmanLpvModel& example_model()
{
  static const KoopmanLpvModel model = lpv_model(example_dictionary(), builtin_example());
  return model;
}

inline const SchedulingGrid& example_full_grid()
{
  static const SchedulingGrid grid = make_grid(example_model(), example_grid_spec());
  return grid;
}

inline const SchedulingGrid& example_reduced_grid()
{
  static const SchedulingGrid grid = reduce_constraints(example_full_grid());
  return grid;
}

inline double example_margin() { return default_margin(example_model().A()); }

inline const SynthesisResult& example_synthesis(Criterion c)
{
  auto run = [](Criterion crit) {
    const auto& m = example_model();
    return synthesize(assemble(crit, m.A(), m.C(), example_reduced_grid(), example_margin()), crit);
  };
  static const SynthesisResult l2 = run(Criterion::l2);
  static const SynthesisResult h2 = run(Criterion::h2);
  return c == Criterion::l2 ? l2 : h2;
}

inline Matrix column(std::initializer_list<double> v)
{
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v)
    m(i++, 0) = x;
  return m;
}

// Reference values of the example's input matrices.
inline Matrix reference_bhat_l2() { return column({1.0, 3.3700, -1.0600}); }
inline Matrix reference_bhat_h2() { return column({1.0, 3.9602, -0.2157}); }
inline Matrix reference_bhat_edmd() { return column({1.0, 0.4902, 0.3093}); }

inline Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v)
    out[i++] = x;
  return out;
}

// Inputs that keep x1 of the example on the grid lattice -2.5 + 0.05 i, with u drawn
// from the grid's input range. The LMIs hold on the convex hull of the grid's B_z values,
// which covers every (x1 node, u) pair but not the parabola between nodes.
inline std::vector<Vector> lattice_inputs(double x1_start, std::size_t length, std::uint64_t seed,
                                          double u_lo = -1.6, double u_hi = 2.0)
{
  std::mt19937_64 rng(seed);
  std::vector<Vector> u;
  double x1 = x1_start;
  for (std::size_t k = 0; k < length; ++k)
  {
    std::vector<double> options;
    for (int i = 0; i <= 100; ++i)
    {
      const double target = -2.5 + 0.05 * i;
      const double uk = target - 0.7 * x1;
      if (uk >= u_lo && uk <= u_hi)
        options.push_back(uk);
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    const double uk = options[pick(rng)];
    u.push_back(vec({uk}));
    x1 = 0.7 * x1 + uk;
  }
  return u;
}

} // namespace koopman::testing
