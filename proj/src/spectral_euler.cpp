#include "epflow/spectral_euler.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "epflow/integrators.hpp"

namespace epflow::euler2d {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using cplx = std::complex<double>;

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plan {
  int n = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  explicit Plan(int size) : n(size) {
    const std::lock_guard<std::mutex> lock(planner_mutex());
    real = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    spec = fftw_alloc_complex(static_cast<std::size_t>(n) * (n / 2 + 1));
    r2c = fftw_plan_dft_r2c_2d(n, n, real, spec, FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r_2d(n, n, spec, real, FFTW_ESTIMATE);
  }
  ~Plan() {
    const std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
    fftw_free(real);
    fftw_free(spec);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
};

Plan& plan_for(int n) {
  thread_local std::map<int, std::unique_ptr<Plan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Plan>(n);
  return *slot;
}

int half(int n) { return n / 2 + 1; }

/// Signed wavenumber of row index i.
int ky_of(int i, int n) { return i <= n / 2 ? i : i - n; }

void check_grid(const Grid& g) {
  if (g.rows() != g.cols() || g.rows() < 4 || g.rows() % 2 != 0) {
    throw std::invalid_argument("spectral grid must be square with even N >= 4");
  }
}

/// i k_x s and i k_y s with the Nyquist modes removed.
Spectrum derivative(const Spectrum& s, int n, int axis) {
  Spectrum out(s.size());
  const int h = half(n);
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    for (int j = 0; j < h; ++j) {
      const int k = axis == 0 ? j : ky;
      const bool nyquist = j == n / 2 || i == n / 2;
      out[static_cast<std::size_t>(i * h + j)] = nyquist ? cplx(0.0) : cplx(0.0, k) * s[static_cast<std::size_t>(i * h + j)];
    }
  }
  return out;
}

/// Parseval: int f^2 over [0, 2pi)^2 from the r2c half spectrum.
double parseval(const Spectrum& s, int n) {
  const int h = half(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < h; ++j) {
      const double w = (j == 0 || j == n / 2) ? 1.0 : 2.0;
      total += w * std::norm(s[static_cast<std::size_t>(i * h + j)]);
    }
  }
  const double nn = static_cast<double>(n) * n;
  return kTwoPi * kTwoPi * total / (nn * nn);
}

/// Zero-padded copy of an n-spectrum on an m-grid (m >= n), amplitude preserving.
Spectrum pad(const Spectrum& s, int n, int m) {
  const int hn = half(n);
  const int hm = half(m);
  const double scale = (static_cast<double>(m) * m) / (static_cast<double>(n) * n);
  Spectrum out(static_cast<std::size_t>(m) * hm, cplx(0.0));
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    if (i == n / 2) continue;
    const int im = ky >= 0 ? ky : ky + m;
    for (int j = 0; j < hn - 1; ++j) {
      out[static_cast<std::size_t>(im * hm + j)] = scale * s[static_cast<std::size_t>(i * hn + j)];
    }
  }
  return out;
}

struct Transport {
  VelocityField vel;
  Spectrum rhs;  // -(U . grad omega), dealiased
};

Transport transport(const Spectrum& w_hat, int n, const Eigen::Vector2d& c) {
  Transport t;
  const Grid w = inverse(w_hat, n);
  t.vel = biot_savart(VorticityField{w, 0.0});
  const Grid wx = inverse(derivative(w_hat, n, 0), n);
  const Grid wy = inverse(derivative(w_hat, n, 1), n);
  const Grid adv = (t.vel.u.array() * wx.array() + t.vel.v.array() * wy.array()).matrix();
  t.rhs = forward(adv);
  const int h = half(n);
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    for (int j = 0; j < h; ++j) {
      auto& r = t.rhs[static_cast<std::size_t>(i * h + j)];
      // constant noise velocity is applied spectrally: c . grad -> i (c . k)
      r = -r - cplx(0.0, c.x() * j + c.y() * ky) * w_hat[static_cast<std::size_t>(i * h + j)];
    }
  }
  dealias(t.rhs, n);
  return t;
}

double max_abs(const Grid& g) { return g.cwiseAbs().maxCoeff(); }

}  // namespace

VorticityField VorticityField::sample(int n, const std::function<double(double, double)>& f) {
  VorticityField w;
  w.values.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w.values(i, j) = f(kTwoPi * j / n, kTwoPi * i / n);
  }
  return w;
}

Spectrum forward(const Grid& g) {
  check_grid(g);
  const int n = static_cast<int>(g.rows());
  Plan& p = plan_for(n);
  std::memcpy(p.real, g.data(), sizeof(double) * static_cast<std::size_t>(n) * n);
  fftw_execute(p.r2c);
  Spectrum out(static_cast<std::size_t>(n) * half(n));
  std::memcpy(reinterpret_cast<void*>(out.data()), p.spec, sizeof(fftw_complex) * out.size());
  return out;
}

Grid inverse(const Spectrum& s, int n) {
  if (s.size() != static_cast<std::size_t>(n) * half(n)) throw std::invalid_argument("inverse: spectrum size mismatch");
  Plan& p = plan_for(n);
  std::memcpy(p.spec, reinterpret_cast<const void*>(s.data()), sizeof(fftw_complex) * s.size());
  fftw_execute(p.c2r);
  Grid g(n, n);
  const double norm = 1.0 / (static_cast<double>(n) * n);
  for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = p.real[k] * norm;
  return g;
}

void dealias(Spectrum& s, int n) {
  const int h = half(n);
  const int kmax = n / 3;
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    for (int j = 0; j < h; ++j) {
      if (j > kmax || std::abs(ky) > kmax) s[static_cast<std::size_t>(i * h + j)] = 0.0;
    }
  }
}

VorticityField dealiased(const VorticityField& w) {
  Spectrum s = forward(w.values);
  dealias(s, w.n());
  return {inverse(s, w.n()), w.t};
}

Grid stream_function(const VorticityField& w) {
  const int n = w.n();
  const double mean = w.values.mean();
  if (std::abs(mean) > 1e-12 * std::max(1.0, max_abs(w.values))) {
    throw std::invalid_argument("biot_savart: vorticity has nonzero mean " + std::to_string(mean));
  }
  Spectrum s = forward(w.values);
  const int h = half(n);
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    for (int j = 0; j < h; ++j) {
      const double k2 = static_cast<double>(j) * j + static_cast<double>(ky) * ky;
      s[static_cast<std::size_t>(i * h + j)] = k2 == 0.0 ? cplx(0.0) : -s[static_cast<std::size_t>(i * h + j)] / k2;
    }
  }
  return inverse(s, n);
}

VelocityField biot_savart(const VorticityField& w) {
  check_grid(w.values);
  const int n = w.n();
  const Spectrum psi = forward(stream_function(w));
  VelocityField out;
  out.u = -inverse(derivative(psi, n, 1), n);
  out.v = inverse(derivative(psi, n, 0), n);
  return out;
}

double max_divergence(const VelocityField& vel) {
  const int n = static_cast<int>(vel.u.rows());
  const Spectrum ux = derivative(forward(vel.u), n, 0);
  const Spectrum vy = derivative(forward(vel.v), n, 1);
  Spectrum div(ux.size());
  for (std::size_t k = 0; k < div.size(); ++k) div[k] = ux[k] + vy[k];
  return max_abs(inverse(div, n));
}

LoopMarkers LoopMarkers::circle(const Eigen::Vector2d& center, double radius, int count) {
  LoopMarkers loop;
  for (int m = 0; m < count; ++m) {
    const double th = kTwoPi * m / count;
    loop.points.push_back(center + radius * Eigen::Vector2d(std::cos(th), std::sin(th)));
  }
  return loop;
}

VelocityInterpolator::VelocityInterpolator(const VelocityField& vel, int refine) {
  const int n = static_cast<int>(vel.u.rows());
  m_ = n * std::max(1, refine);
  u_ = refine > 1 ? inverse(pad(forward(vel.u), n, m_), m_) : vel.u;
  v_ = refine > 1 ? inverse(pad(forward(vel.v), n, m_), m_) : vel.v;
}

Eigen::Vector2d VelocityInterpolator::operator()(const Eigen::Vector2d& x) const {
  const double h = kTwoPi / m_;
  const double gx = x.x() / h;
  const double gy = x.y() / h;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const double tx = gx - fx;
  const double ty = gy - fy;
  // cubic Lagrange weights on nodes -1, 0, 1, 2
  auto weights = [](double t, double* w) {
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  };
  double wx[4];
  double wy[4];
  weights(tx, wx);
  weights(ty, wy);
  const auto ix = static_cast<long>(fx);
  const auto iy = static_cast<long>(fy);
  auto wrap = [this](long i) { return static_cast<Eigen::Index>(((i % m_) + m_) % m_); };
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int a = 0; a < 4; ++a) {
    const Eigen::Index row = wrap(iy + a - 1);
    double su = 0.0;
    double sv = 0.0;
    for (int b = 0; b < 4; ++b) {
      const Eigen::Index col = wrap(ix + b - 1);
      su += wx[b] * u_(row, col);
      sv += wx[b] * v_(row, col);
    }
    out.x() += wy[a] * su;
    out.y() += wy[a] * sv;
  }
  return out;
}

StepInfo step_salt_euler(VorticityField& w, const noise::NoiseBasis& basis, double dt, const Eigen::VectorXd& dw,
                         LoopMarkers* loop, const StepOptions& options) {
  if (basis.kind() != noise::NoiseKind::TorusConstant || basis.dimension() != 2) {
    throw std::invalid_argument("step_salt_euler: noise must be torus-constant in two dimensions");
  }
  if (dw.size() != basis.size()) throw std::invalid_argument("step_salt_euler: increment size differs from K");
  if (!(dt > 0.0)) throw std::invalid_argument("step_salt_euler: dt must be positive");
  check_grid(w.values);
  const int n = w.n();

  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (int k = 0; k < basis.size(); ++k) c += basis.vectors()[static_cast<std::size_t>(k)] * (dw(k) / dt);
  if (options.include_bracket) {
    // [xi_k, xi_l] = 0 for constant fields; evaluated for uniformity.
    c += noise::bracket_drift(basis, Eigen::Vector2d::Zero());
  }

  Spectrum w0 = forward(w.values);
  dealias(w0, n);
  const Transport t1 = transport(w0, n, c);
  Spectrum stage(w0.size());
  for (std::size_t k = 0; k < stage.size(); ++k) stage[k] = w0[k] + dt * t1.rhs[k];
  const Transport t2 = transport(stage, n, c);
  Spectrum w1(w0.size());
  for (std::size_t k = 0; k < w1.size(); ++k) w1[k] = w0[k] + 0.5 * dt * (t1.rhs[k] + t2.rhs[k]);
  w1[0] = 0.0;

  StepInfo info;
  const double dx = kTwoPi / n;
  const double umax = std::max(t1.vel.u.cwiseAbs().maxCoeff(), t1.vel.v.cwiseAbs().maxCoeff());
  info.cfl = (umax + c.cwiseAbs().maxCoeff()) * dt / dx;
  info.cfl_warning = info.cfl > 1.0;
  if (options.check_divergence) {
    info.max_divergence = std::max(max_divergence(t1.vel), max_divergence(t2.vel));
  }

  if (loop != nullptr) {
    const VelocityInterpolator i1(t1.vel, options.interpolation_refine);
    const VelocityInterpolator i2(t2.vel, options.interpolation_refine);
    for (auto& x : loop->points) {
      const Eigen::Vector2d v1 = i1(x) + c;
      const Eigen::Vector2d xs = x + dt * v1;
      x += 0.5 * dt * (v1 + i2(xs) + c);
    }
  }

  w.values = inverse(w1, n);
  w.t += dt;
  if (!w.values.allFinite()) {
    throw integrators::IntegrationError("step_salt_euler: non-finite vorticity at t = " + std::to_string(w.t));
  }
  return info;
}

VorticityField shift_field(const VorticityField& w, const Eigen::Vector2d& s) {
  const int n = w.n();
  Spectrum spec = forward(w.values);
  const int h = half(n);
  for (int i = 0; i < n; ++i) {
    const int ky = ky_of(i, n);
    for (int j = 0; j < h; ++j) {
      const double phase = -(j * s.x() + ky * s.y());
      auto& z = spec[static_cast<std::size_t>(i * h + j)];
      if (j == n / 2 || i == n / 2) {
        z = 0.0;  // the Nyquist shift is not real-representable
      } else {
        z *= std::polar(1.0, phase);
      }
    }
  }
  return {inverse(spec, n), w.t};
}

VorticityField translation_oracle(const VorticityField& w0, const noise::NoiseBasis& basis,
                                  const Eigen::VectorXd& w_end, double T, double dt_det) {
  if (basis.kind() != noise::NoiseKind::TorusConstant) throw std::invalid_argument("translation_oracle: torus-constant noise required");
  if (w_end.size() != basis.size()) throw std::invalid_argument("translation_oracle: W_T size differs from K");
  VorticityField w = dealiased(w0);
  const int steps = static_cast<int>(std::llround(T / dt_det));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(basis.size());
  StepOptions opts;
  opts.check_divergence = false;
  for (int n = 0; n < steps; ++n) step_salt_euler(w, basis, dt_det, zero, nullptr, opts);
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  for (int k = 0; k < basis.size(); ++k) s += basis.vectors()[static_cast<std::size_t>(k)] * w_end(k);
  VorticityField out = shift_field(w, s);
  out.t = w0.t + T;
  return out;
}

double loop_circulation(const VelocityInterpolator& u, const LoopMarkers& loop) {
  const auto m = static_cast<int>(loop.points.size());
  if (m < 3) throw std::invalid_argument("loop_circulation: need at least three markers");
  // x'(s) on s in [0, 1) from the trigonometric interpolant (direct DFT).
  std::vector<Eigen::Vector2cd> coef(static_cast<std::size_t>(m), Eigen::Vector2cd::Zero());
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < m; ++j) {
      const cplx e = std::polar(1.0, -kTwoPi * static_cast<double>((static_cast<long>(k) * j) % m) / m);
      coef[static_cast<std::size_t>(k)] += loop.points[static_cast<std::size_t>(j)].cast<cplx>() * e;
    }
  }
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    Eigen::Vector2cd d = Eigen::Vector2cd::Zero();
    for (int k = 0; k < m; ++k) {
      const int kk = k <= m / 2 ? k : k - m;
      if (2 * k == m) continue;
      const cplx e = std::polar(1.0, kTwoPi * static_cast<double>((static_cast<long>(k) * j) % m) / m);
      d += coef[static_cast<std::size_t>(k)] * (cplx(0.0, kTwoPi * kk) * e);
    }
    const Eigen::Vector2d tangent = d.real() / m;
    total += u(loop.points[static_cast<std::size_t>(j)]).dot(tangent);
  }
  return total / m;
}

double loop_circulation(const VelocityField& vel, const LoopMarkers& loop, int refine) {
  return loop_circulation(VelocityInterpolator(vel, refine), loop);
}

Euler2dDiagnostics euler2d_diagnostics(const VorticityField& w) {
  const int n = w.n();
  Euler2dDiagnostics d;
  const Spectrum s = forward(w.values);
  d.enstrophy = 0.5 * parseval(s, n);
  d.palinstrophy = 0.5 * (parseval(derivative(s, n, 0), n) + parseval(derivative(s, n, 1), n));
  if (d.enstrophy > 0.0) {
    const VelocityField vel = biot_savart(w);
    d.energy = 0.5 * (parseval(forward(vel.u), n) + parseval(forward(vel.v), n));
  }
  return d;
}

double casimir_integral(const VorticityField& w, int power) {
  if (power < 1) throw std::invalid_argument("casimir_integral: power must be positive");
  const int n = w.n();
  const int m = 2 * n;
  const Grid fine = inverse(pad(forward(w.values), n, m), m);
  double total = 0.0;
  for (Eigen::Index k = 0; k < fine.size(); ++k) total += std::pow(fine.data()[k], power);
  return total * kTwoPi * kTwoPi / (static_cast<double>(m) * m);
}

double l2_distance(const VorticityField& a, const VorticityField& b) {
  if (a.n() != b.n()) throw std::invalid_argument("l2_distance: grid sizes differ");
  const double nn = static_cast<double>(a.n()) * a.n();
  return std::sqrt((a.values - b.values).squaredNorm() * kTwoPi * kTwoPi / nn);
}

std::string encode_snapshot(const VorticityField& w) {
  const std::uint32_t tag = 0x01020304u;
  const auto n = static_cast<std::uint32_t>(w.n());
  std::string out("EPFW");
  out.append(reinterpret_cast<const char*>(&tag), sizeof tag);
  out.append(reinterpret_cast<const char*>(&n), sizeof n);
  out.append(reinterpret_cast<const char*>(&w.t), sizeof w.t);
  out.append(reinterpret_cast<const char*>(w.values.data()), sizeof(double) * static_cast<std::size_t>(w.values.size()));
  return out;
}

void write_snapshot(const std::filesystem::path& path, const VorticityField& w) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string());
    const std::string bytes = encode_snapshot(w);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

VorticityField read_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open snapshot " + path.string());
  char magic[4];
  std::uint32_t tag = 0;
  std::uint32_t n = 0;
  VorticityField w;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&tag), sizeof tag);
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(&w.t), sizeof w.t);
  if (!f || std::string(magic, 4) != "EPFW") throw std::runtime_error("not an EPFW snapshot: " + path.string());
  if (tag != 0x01020304u) throw std::runtime_error("snapshot byte order differs from this host: " + path.string());
  if (n == 0 || n > 1u << 14) throw std::runtime_error("snapshot has implausible N: " + path.string());
  w.values.resize(n, n);
  f.read(reinterpret_cast<char*>(w.values.data()), static_cast<std::streamsize>(sizeof(double) * n * n));
  if (!f) throw std::runtime_error("truncated snapshot: " + path.string());
  return w;
}

}  // namespace epflow::euler2d
