#pragma once

#include <vector>

namespace koopman
{

/// Gauss-Legendre rule mapped to [0, 1]. Exact for polynomials of degree 2n-1.
struct QuadratureRule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

QuadratureRule gauss_legendre_unit(int n);

} // namespace koopman
