#include "koopman/dynamics.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace koopman
{

bool Box::contains(const Vector& p, double tol) const
{
  if (p.size() != lower.size())
    return false;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] < lower[i] - tol || p[i] > upper[i] + tol)
      return false;
  return true;
}

NonlinearSystem::NonlinearSystem(int n_x, int n_u, DriftMap f, InputMap g, Box x_domain,
                                 Box u_domain)
    : n_x_(n_x), n_u_(n_u), f_(std::move(f)), g_(std::move(g)), x_domain_(std::move(x_domain)),
      u_domain_(std::move(u_domain))
{
  if (n_x <= 0 || n_u <= 0)
    throw DimensionError("state and input dimensions must be positive");
  if (x_domain_.dim() != n_x || x_domain_.upper.size() != n_x)
    throw DimensionError("state domain box has wrong dimension");
  if (u_domain_.dim() != n_u || u_domain_.upper.size() != n_u)
    throw DimensionError("input domain box has wrong dimension");
  if ((x_domain_.upper.array() < x_domain_.lower.array()).any() ||
      (u_domain_.upper.array() < u_domain_.lower.array()).any())
    throw DimensionError("domain box with upper < lower");
}

Vector NonlinearSystem::f(const Vector& x) const
{
  Vector v = f_(x);
  if (v.size() != n_x_)
    throw DimensionError("f returned " + std::to_string(v.size()) + " components, expected " +
                         std::to_string(n_x_));
  return v;
}

Matrix NonlinearSystem::g(const Vector& x) const
{
  Matrix m = g_(x);
  if (m.rows() != n_x_ || m.cols() != n_u_)
    throw DimensionError("g returned a " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  return m;
}

Vector step(const NonlinearSystem& sys, const Vector& x, const Vector& u)
{
  if (x.size() != sys.n_x() || u.size() != sys.n_u())
    throw DimensionError("step: state or input dimension mismatch");
  Vector next = sys.f(x) + sys.g(x) * u;
  for (Eigen::Index i = 0; i < next.size(); ++i)
    if (!std::isfinite(next[i]))
      throw NumericError("step: state component " + std::to_string(i + 1) + " is not finite");
  return next;
}

Trajectory simulate(const NonlinearSystem& sys, const Vector& x0, const std::vector<Vector>& u_seq)
{
  if (!x0.allFinite())
    throw NumericError("simulate: initial state is not finite");
  Trajectory traj;
  traj.states.reserve(u_seq.size() + 1);
  traj.inputs = u_seq;
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < u_seq.size(); ++k)
  {
    try
    {
      traj.states.push_back(step(sys, traj.states.back(), u_seq[k]));
    }
    catch (const NumericError& e)
    {
      throw NumericError("simulate: k=" + std::to_string(k) + ": " + e.what());
    }
  }
  return traj;
}

NonlinearSystem builtin_example(double a1, double a2, double a3)
{
  auto f = [a1, a2, a3](const Vector& x) {
    Vector y(2);
    y << a1 * x[0], a2 * x[1] - a3 * x[0] * x[0];
    return y;
  };
  auto g = [](const Vector& x) {
    Matrix m(2, 1);
    m << 1.0, x[0] * x[0];
    return m;
  };
  Box xd{Vector(2), Vector(2)};
  xd.lower << -2.5, -10.0;
  xd.upper << 2.5, 2.7;
  Box ud{Vector::Constant(1, -1.6), Vector::Constant(1, 2.1)};
  return NonlinearSystem(2, 1, f, g, xd, ud);
}

GaussianSource::GaussianSource(std::uint64_t seed) : engine_(seed) {}

double GaussianSource::uniform()
{
  // 53 random bits, shifted by half an ulp so the value is never 0.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianSource::next()
{
  if (has_spare_)
  {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<Vector> white_noise_input(std::size_t length, double variance, std::uint64_t seed)
{
  if (!(variance > 0.0))
    throw DimensionError("white_noise_input: variance must be positive");
  GaussianSource src(seed);
  const double sd = std::sqrt(variance);
  std::vector<Vector> out(length, Vector(1));
  for (auto& u : out)
    u[0] = sd * src.next();
  return out;
}

std::vector<Vector> constant_input(std::size_t length, double value)
{
  return std::vector<Vector>(length, Vector::Constant(1, value));
}

std::vector<Vector> sine_input(std::size_t length, double amplitude, double frequency,
                               double sample_time)
{
  std::vector<Vector> out(length, Vector(1));
  for (std::size_t k = 0; k < length; ++k)
    out[k][0] = amplitude * std::sin(2.0 * std::numbers::pi * frequency *
                                     static_cast<double>(k) * sample_time);
  return out;
}

std::vector<Vector> clip_inputs(std::vector<Vector> u_seq, const Box& box)
{
  for (auto& u : u_seq)
    u = u.cwiseMax(box.lower).cwiseMin(box.upper);
  return u_seq;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj)
{
  if (traj.states.empty())
    return;
  const auto n_x = traj.states.front().size();
  const Eigen::Index n_u = traj.inputs.empty() ? 1 : traj.inputs.front().size();
  os << "k";
  for (Eigen::Index i = 0; i < n_x; ++i)
    os << ",x" << i + 1;
  for (Eigen::Index j = 0; j < n_u; ++j)
    os << ",u" << j + 1;
  os << '\n' << std::setprecision(12);
  for (std::size_t k = 0; k < traj.states.size(); ++k)
  {
    os << k;
    for (Eigen::Index i = 0; i < n_x; ++i)
      os << ',' << traj.states[k][i];
    for (Eigen::Index j = 0; j < n_u; ++j)
    {
      os << ',';
      if (k < traj.inputs.size())
        os << traj.inputs[k][j];
    }
    os << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& is, int n_x, int n_u)
{
  std::string line;
  if (!std::getline(is, line))
    throw DimensionError("trajectory csv: missing header");
  Trajectory traj;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line))
  {
    if (line.empty())
      continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
      cells.emplace_back();
    if (static_cast<int>(cells.size()) != 1 + n_x + n_u)
      throw DimensionError("trajectory csv: row with " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(1 + n_x + n_u));
    rows.push_back(std::move(cells));
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
  {
    Vector x(n_x);
    for (int i = 0; i < n_x; ++i)
      x[i] = std::stod(rows[r][1 + i]);
    traj.states.push_back(x);
    if (rows[r][1 + n_x].empty())
    {
      if (r + 1 != rows.size())
        throw DimensionError("trajectory csv: empty input cell before the final row");
      continue;
    }
    Vector u(n_u);
    for (int j = 0; j < n_u; ++j)
      u[j] = std::stod(rows[r][1 + n_x + j]);
    traj.inputs.push_back(u);
  }
  if (traj.states.size() != traj.inputs.size() + 1)
    throw DimensionError("trajectory csv: final row must carry an empty input");
  return traj;
}

} // namespace koopman
