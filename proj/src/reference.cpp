#include "dmis/reference.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <array>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dmis/binary_io.hpp"
#include "dmis/error.hpp"

namespace dmis {
namespace {

using std::numbers::pi;
using Vec = std::vector<double>;

// Real-to-complex transform pair on n points with spectral derivatives.
class Fourier {
 public:
  Fourier(int n, double length) : n_(n), length_(length) {
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
    hat_.resize(n / 2 + 1);
  }
  ~Fourier() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Fourier(const Fourier&) = delete;
  Fourier& operator=(const Fourier&) = delete;

  double max_wavenumber() const { return pi * n_ / length_; }

  void transform(const double* u) {
    std::copy(u, u + n_, real_);
    fftw_execute(forward_);
    for (int j = 0; j <= n_ / 2; ++j) hat_[j] = {spec_[j][0], spec_[j][1]};
  }

  // d^order/dx^order of the last transformed signal. With `dealias` the
  // modes above 2/3 of the Nyquist index are dropped.
  void derivative(int order, bool dealias, double* out) {
    const int half = n_ / 2;
    for (int j = 0; j <= half; ++j) {
      std::complex<double> c = 0.0;
      const bool keep = j < half && !(dealias && 3 * j > n_);
      if (keep) {
        const std::complex<double> ik(0.0, 2.0 * pi * j / length_);
        c = hat_[j];
        for (int p = 0; p < order; ++p) c *= ik;
      }
      spec_[j][0] = c.real() / n_;
      spec_[j][1] = c.imag() / n_;
    }
    fftw_execute(backward_);
    std::copy(real_, real_ + n_, out);
  }

  // Share of spectral energy above a quarter of the mode range. The band
  // starts below the dealiasing cutoff so that filtered problems register too.
  double tail_fraction(const double* u) {
    transform(u);
    double total = 0.0, tail = 0.0;
    for (int j = 0; j <= n_ / 2; ++j) {
      const double e = std::norm(hat_[j]);
      total += e;
      if (4 * j > n_) tail += e;
    }
    return total > 0 ? std::sqrt(tail / total) : 0.0;
  }

 private:
  int n_;
  double length_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_;
  fftw_plan backward_;
  std::vector<std::complex<double>> hat_;
};

// A semi-discrete system y' = f(t, y) plus what the driver needs around it.
struct System {
  std::function<void(double, const Vec&, Vec&)> rhs;
  std::function<double(const Vec&)> radius;  // spectral radius estimate of the Jacobian
  std::function<void(double, const Vec&)> check = [](double, const Vec&) {};
  std::function<void(const Vec&, SolutionGrid&, int)> store;
};

double sup_norm(const Vec& y) {
  double m = 0.0;
  for (double v : y) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(v));
  }
  return m;
}

std::string describe(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

System dirichlet_system(const PdeProblem& pb, int nx) {
  const double dx = pb.domain.length() / nx;
  const double d = pb.diffusion;
  const int m = nx - 1;  // interior nodes
  System sys;
  sys.rhs = [=, &pb](double t, const Vec& u, Vec& du) {
    for (int i = 0; i < m; ++i) {
      const double left = i > 0 ? u[i - 1] : pb.boundary_value(t, pb.domain.x_min);
      const double right = i + 1 < m ? u[i + 1] : pb.boundary_value(t, pb.domain.x_max);
      double f = d * (right - 2.0 * u[i] + left) / (dx * dx);
      if (pb.kind == Benchmark::kBurgers) {
        f -= (right * right - left * left) / (4.0 * dx);
      } else if (pb.forcing != 0.0) {
        f += pb.forcing * std::exp(-t) * (pb.domain.x_min + (i + 1) * dx);
      }
      du[i] = f;
    }
  };
  sys.radius = [=, &pb](const Vec& u) {
    double r = 4.0 * d / (dx * dx);
    if (pb.kind == Benchmark::kBurgers) r += sup_norm(u) / dx;
    return r;
  };
  sys.store = [=, &pb](const Vec& u, SolutionGrid& g, int k) {
    double* row = g.values.data() + static_cast<std::size_t>(k) * g.cols();
    const double t = g.t_at(k);
    row[0] = pb.boundary_value(t, pb.domain.x_min);
    row[nx] = pb.boundary_value(t, pb.domain.x_max);
    std::copy(u.begin(), u.end(), row + 1);
  };
  return sys;
}

System periodic_system(const PdeProblem& pb, int n, std::shared_ptr<Fourier> ft, double tail_tol) {
  const bool complex_field = pb.kind == Benchmark::kSchrodinger;
  auto scratch = std::make_shared<std::array<Vec, 3>>();
  for (Vec& v : *scratch) v.resize(n);

  System sys;
  sys.rhs = [=, &pb](double, const Vec& y, Vec& dy) {
    Vec& a = (*scratch)[0];
    Vec& b = (*scratch)[1];
    switch (pb.kind) {
      case Benchmark::kKdv: {
        Vec& flux = (*scratch)[2];
        for (int i = 0; i < n; ++i) flux[i] = 0.5 * y[i] * y[i];
        ft->transform(flux.data());
        ft->derivative(1, true, a.data());
        ft->transform(y.data());
        ft->derivative(3, false, b.data());
        for (int i = 0; i < n; ++i) dy[i] = -a[i] - pb.dispersion * b[i];
        break;
      }
      case Benchmark::kAllenCahn: {
        ft->transform(y.data());
        ft->derivative(2, false, a.data());
        for (int i = 0; i < n; ++i) dy[i] = pb.diffusion * a[i] + pb.reaction * std::sin(pi * y[i]);
        break;
      }
      case Benchmark::kSchrodinger: {
        // h = u + i v with i h_t + c h_xx + |h|^2 h = 0.
        ft->transform(y.data());
        ft->derivative(2, false, a.data());
        ft->transform(y.data() + n);
        ft->derivative(2, false, b.data());
        for (int i = 0; i < n; ++i) {
          const double u = y[i], v = y[n + i];
          const double m2 = u * u + v * v;
          dy[i] = -pb.diffusion * b[i] - m2 * v;
          dy[n + i] = pb.diffusion * a[i] + m2 * u;
        }
        break;
      }
      default:
        throw ContractError("no periodic discretization for " + pb.name);
    }
  };
  sys.radius = [=, &pb](const Vec& y) {
    const double k = ft->max_wavenumber();
    const double s = sup_norm(y);
    switch (pb.kind) {
      case Benchmark::kKdv: return pb.dispersion * k * k * k + s * k;
      case Benchmark::kAllenCahn: return pb.diffusion * k * k + pi * pb.reaction;
      default: return pb.diffusion * k * k + 3.0 * s * s;
    }
  };
  sys.check = [=, &pb](double t, const Vec& y) {
    for (int c = 0; c < (complex_field ? 2 : 1); ++c) {
      const double tail = ft->tail_fraction(y.data() + c * n);
      if (tail > tail_tol) {
        throw NumericalError(pb.name + " is under-resolved at nx=" + std::to_string(n) + ": spectral tail " +
                             describe(tail) + " exceeds " + describe(tail_tol) + " at t=" + describe(t) +
                             "; the grid cannot support a stable step, refine nx");
      }
    }
  };
  sys.store = [=](const Vec& y, SolutionGrid& g, int k) {
    const std::size_t off = static_cast<std::size_t>(k) * g.cols();
    for (int i = 0; i <= n; ++i) {
      const int j = i % n;
      if (complex_field) {
        g.real[off + i] = y[j];
        g.imag[off + i] = y[n + j];
        g.values[off + i] = std::hypot(y[j], y[n + j]);
      } else {
        g.values[off + i] = y[j];
      }
    }
  };
  return sys;
}

void rk4_step(const System& sys, double t, double dt, Vec& y, std::array<Vec, 5>& w) {
  auto& [k1, k2, k3, k4, tmp] = w;
  const std::size_t n = y.size();
  sys.rhs(t, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  sys.rhs(t + 0.5 * dt, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  sys.rhs(t + 0.5 * dt, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
  sys.rhs(t + dt, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

SolutionGrid solve(const PdeProblem& pb, int nx, int nt, const SolverOptions& opt) {
  if (nx < kMinGridNx || nx > kMaxGridNx) {
    throw ConfigError("reference nx must lie in [" + std::to_string(kMinGridNx) + ", " +
                      std::to_string(kMaxGridNx) + "]");
  }
  if (nt < 1 || nt > kMaxGridNt) throw ConfigError("reference nt must lie in [1, " + std::to_string(kMaxGridNt) + "]");
  if (!(opt.safety > 0.0)) throw ConfigError("solver safety factor must be positive");

  const DomainSpec& d = pb.domain;
  SolutionGrid g;
  g.name = pb.name;
  g.nx = nx;
  g.nt = nt;
  g.t_max = d.t_max;
  g.x_min = d.x_min;
  g.x_max = d.x_max;
  const std::size_t plane = static_cast<std::size_t>(g.rows()) * g.cols();
  g.values.assign(plane, 0.0);
  const bool complex_field = pb.out_dim == 2;
  if (complex_field) {
    g.real.assign(plane, 0.0);
    g.imag.assign(plane, 0.0);
  }

  const bool periodic = pb.bc == BoundaryKind::kPeriodic;
  System sys;
  Vec y;
  if (periodic) {
    sys = periodic_system(pb, nx, std::make_shared<Fourier>(nx, d.length()), opt.tail_tolerance);
    y.resize(complex_field ? 2 * nx : nx);
    for (int i = 0; i < nx; ++i) {
      const auto u0 = pb.initial_value(g.x_at(i));
      y[i] = u0[0];
      if (complex_field) y[nx + i] = u0[1];
    }
  } else {
    sys = dirichlet_system(pb, nx);
    y.resize(nx - 1);
    for (int i = 1; i < nx; ++i) y[i - 1] = pb.initial_value(g.x_at(i))[0];
  }

  // Row 0 is the initial condition itself, endpoints included.
  for (int i = 0; i <= nx; ++i) {
    const auto u0 = pb.initial_value(g.x_at(i));
    if (complex_field) {
      g.real[i] = u0[0];
      g.imag[i] = u0[1];
      g.values[i] = std::hypot(u0[0], u0[1]);
    } else {
      g.values[i] = u0[0];
    }
  }

  std::array<Vec, 5> work;
  for (Vec& v : work) v.resize(y.size());
  for (int k = 1; k <= nt; ++k) {
    const double t0 = g.t_at(k - 1);
    const double span = g.t_at(k) - t0;
    const double bound = opt.safety / sys.radius(y);
    const auto steps = static_cast<long>(std::ceil(span / bound));
    const double dt = span / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      rk4_step(sys, t0 + s * dt, dt, y, work);
      const double norm = sup_norm(y);
      if (!(norm <= opt.blowup)) {
        throw NumericalError(pb.name + " blew up at t=" + describe(t0 + (s + 1) * dt) + " (|u| > " +
                             describe(opt.blowup) + ") with dt=" + describe(dt) +
                             " against the RK4 stability bound " + describe(bound) + " at nx=" +
                             std::to_string(nx));
      }
    }
    sys.check(g.t_at(k), y);
    sys.store(y, g, k);
  }
  return g;
}

double sample(const SolutionGrid& g, double t, double x) {
  const double tol_t = 1e-12 * std::max(1.0, g.t_max);
  const double tol_x = 1e-12 * std::max({1.0, std::abs(g.x_min), std::abs(g.x_max)});
  if (!(t >= -tol_t && t <= g.t_max + tol_t && x >= g.x_min - tol_x && x <= g.x_max + tol_x)) {
    throw std::out_of_range("query (" + describe(t) + ", " + describe(x) + ") lies outside the grid of " + g.name);
  }
  const double ft = std::clamp(t / g.t_max * g.nt, 0.0, static_cast<double>(g.nt));
  const double fx = std::clamp((x - g.x_min) / (g.x_max - g.x_min) * g.nx, 0.0, static_cast<double>(g.nx));
  const int k = std::min(static_cast<int>(ft), g.nt - 1);
  const int i = std::min(static_cast<int>(fx), g.nx - 1);
  const double a = ft - k, b = fx - i;
  if (a == 0.0 && b == 0.0) return g.at(k, i);
  return (1 - a) * ((1 - b) * g.at(k, i) + b * g.at(k, i + 1)) + a * ((1 - b) * g.at(k + 1, i) + b * g.at(k + 1, i + 1));
}

std::string grid_header(const SolutionGrid& g) {
  std::ostringstream s;
  s.precision(17);
  s << "dmis-grid v1 " << g.name << ' ' << g.nx << ' ' << g.nt << ' ' << g.t_max << ' ' << g.x_min << ' '
    << g.x_max;
  return s.str();
}

void write_grid(std::ostream& out, const SolutionGrid& g) {
  out << grid_header(g) << '\n';
  write_f64_le(out, g.values);
  if (!g.real.empty()) {
    write_f64_le(out, g.real);
    write_f64_le(out, g.imag);
  }
}

SolutionGrid read_grid(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError("empty grid file");
  std::istringstream h(line);
  std::string magic, version;
  SolutionGrid g;
  h >> magic >> version;
  if (magic != "dmis-grid") throw ArtifactError("not a grid file");
  if (version != "v1") throw ArtifactError("unsupported grid version " + version);
  if (!(h >> g.name >> g.nx >> g.nt >> g.t_max >> g.x_min >> g.x_max) || g.nx < 1 || g.nt < 1) {
    throw ArtifactError("malformed grid header");
  }
  const std::size_t plane = static_cast<std::size_t>(g.rows()) * g.cols();
  g.values.resize(plane);
  read_f64_le(in, g.values);
  if (in.peek() != std::char_traits<char>::eof()) {
    g.real.resize(plane);
    g.imag.resize(plane);
    read_f64_le(in, g.real);
    read_f64_le(in, g.imag);
    if (in.peek() != std::char_traits<char>::eof()) throw ArtifactError("trailing bytes in grid file");
  }
  return g;
}

void save_grid(const std::string& path, const SolutionGrid& g) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ArtifactError("cannot write " + tmp);
    write_grid(out, g);
    if (!out) throw ArtifactError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw ArtifactError("cannot move grid into " + path);
}

SolutionGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing grid file " + path);
  return read_grid(in);
}

}  // namespace dmis
