#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dmis/pde.hpp"

namespace dmis {

/// Reference solution sampled on a uniform space-time grid.
///
/// `nx` counts spatial intervals and `nt` counts stored time intervals, so a
/// plane holds (nt + 1) x (nx + 1) row-major values with both interval ends
/// included. Periodic problems repeat the x_min column at x_max.
/// For Schrodinger `values` is the modulus and `real` / `imag` hold the raw
/// components; both stay empty for real-valued problems.
struct SolutionGrid {
  std::string name;
  int nx = 0;
  int nt = 0;
  double t_max = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::vector<double> values;
  std::vector<double> real;
  std::vector<double> imag;

  int rows() const { return nt + 1; }
  int cols() const { return nx + 1; }
  double t_at(int k) const { return t_max * k / nt; }
  double x_at(int i) const { return x_min + (x_max - x_min) * i / nx; }
  double at(int k, int i) const { return values[static_cast<std::size_t>(k) * cols() + i]; }
};

struct SolverOptions {
  double safety = 2.0;          // RK4 step = safety / spectral-radius estimate
  double blowup = 1e6;          // sup-norm that counts as divergence
  double tail_tolerance = 1e-3; // relative energy above a quarter of the Fourier modes
};

inline constexpr int kMinGridNx = 8;
inline constexpr int kMaxGridNx = 1 << 16;
inline constexpr int kMaxGridNt = 100000;

/// Method-of-lines solve with explicit RK4. Periodic problems use a Fourier
/// pseudospectral discretization; Dirichlet problems use second-order central
/// differences (conservative flux for Burgers).
/// Throws ConfigError for out-of-range sizes and NumericalError on blow-up or
/// an under-resolved spectral tail.
SolutionGrid solve(const PdeProblem& pb, int nx, int nt, const SolverOptions& opt = {});

/// Bilinear interpolation; throws std::out_of_range outside the grid.
double sample(const SolutionGrid& grid, double t, double x);

/// Cache format: the text header `dmis-grid v1 name nx nt T x_min x_max`, a
/// newline, then each plane as little-endian float64 (values, then real and
/// imag when present).
std::string grid_header(const SolutionGrid& grid);
void write_grid(std::ostream& out, const SolutionGrid& grid);
SolutionGrid read_grid(std::istream& in);
void save_grid(const std::string& path, const SolutionGrid& grid);
SolutionGrid load_grid(const std::string& path);

}  // namespace dmis
