#pragma once

#include "koopman/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

namespace koopman
{

/// Axis-aligned box given by per-coordinate lower and upper bounds.
struct Box
{
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& p, double tol = 1e-12) const;
};

/// Discrete-time control-affine system x+ = f(x) + g(x) u.
///
/// Immutable after construction; safe to share read-only between threads.
class NonlinearSystem
{
public:
  using DriftMap = std::function<Vector(const Vector&)>;
  using InputMap = std::function<Matrix(const Vector&)>;

  NonlinearSystem(int n_x, int n_u, DriftMap f, InputMap g, Box x_domain, Box u_domain);

  int n_x() const { return n_x_; }
  int n_u() const { return n_u_; }
  const Box& x_domain() const { return x_domain_; }
  const Box& u_domain() const { return u_domain_; }

  Vector f(const Vector& x) const;
  Matrix g(const Vector& x) const;

private:
  int n_x_;
  int n_u_;
  DriftMap f_;
  InputMap g_;
  Box x_domain_;
  Box u_domain_;
};

struct Trajectory
{
  std::vector<Vector> states; // x_0 .. x_N
  std::vector<Vector> inputs; // u_0 .. u_{N-1}

  std::size_t length() const { return inputs.size(); }
};

/// One step f(x) + g(x) u. Throws NumericError naming the first non-finite component.
Vector step(const NonlinearSystem& sys, const Vector& x, const Vector& u);

/// Forward simulation; errors from step are rethrown with the failing time index.
Trajectory simulate(const NonlinearSystem& sys, const Vector& x0, const std::vector<Vector>& u_seq);

/// 2-state, 1-input polynomial example:
///   x1+ = a1 x1 + u,  x2+ = a2 x2 - a3 x1^2 + x1^2 u
/// on x1 in [-2.5, 2.5], x2 in [-10, 2.7], u in [-1.6, 2.1].
NonlinearSystem builtin_example(double a1 = 0.7, double a2 = 0.7, double a3 = 0.5);

// Excitation signals -------------------------------------------------------

/// Portable Gaussian source: mt19937_64 bits mapped to (0,1) doubles and the
/// Box-Muller transform. The sequence depends only on the seed.
class GaussianSource
{
public:
  explicit GaussianSource(std::uint64_t seed);
  double next();
  double uniform(); // (0, 1)

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Zero-mean white Gaussian scalar input with the given variance.
std::vector<Vector> white_noise_input(std::size_t length, double variance, std::uint64_t seed);
std::vector<Vector> constant_input(std::size_t length, double value);
/// u_k = amplitude * sin(2 pi frequency k sample_time).
std::vector<Vector> sine_input(std::size_t length, double amplitude, double frequency,
                               double sample_time);
/// Clamp every component into the box.
std::vector<Vector> clip_inputs(std::vector<Vector> u_seq, const Box& box);

/// CSV with header `k,x1..xn,u1..um`; the final row has empty input cells.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is, int n_x, int n_u);

} // namespace koopman
