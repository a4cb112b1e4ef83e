#include "bjj/potential.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bjj::potential {

using constants::mu_0;
using constants::mu_bohr;
using constants::pi;

void ChipLayout::validate() const {
  require(bias.norm() > 0.0, "layout: bias field must be nonzero");
  require(gf_mf_product > 0.0, "layout: moment factor must be positive");
  for (const auto& w : wires) {
    require((w.end - w.start).norm() > 0.0, "layout: zero-length wire");
    require(std::isfinite(w.current), "layout: non-finite current");
  }
}

ChipLayout ChipLayout::with_current(const std::string& label,
                                    double ampere) const {
  ChipLayout out = *this;
  bool found = false;
  for (auto& w : out.wires)
    if (w.label == label) {
      w.current = ampere;
      found = true;
    }
  require(found, "layout: no wire labelled '" + label + "'");
  return out;
}

namespace {

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.norm2(), 0.0, 1.0);
  return (p - (a + d * t)).norm();
}

// Field of one finite segment. With u the wire direction and r1 = p - start,
// u x r1 is constant along the wire and the line integral reduces to the
// end-point sines.
Vec3 segment_field(const WireSegment& w, const Vec3& p) {
  const Vec3 d = w.end - w.start;
  const double len = d.norm();
  const Vec3 u = d / len;
  const Vec3 r1 = p - w.start;
  const Vec3 r2 = p - w.end;
  const Vec3 perp = u.cross(r1);
  const double rho2 = perp.norm2();
  if (rho2 < 1e-24) return {};  // on the wire axis, outside the segment
  const double s1 = r1.dot(u) / r1.norm();
  const double s2 = r2.dot(u) / r2.norm();
  return perp * (mu_0 * w.current / (4.0 * pi) * (s1 - s2) / rho2);
}

}  // namespace

Vec3 biot_savart_field(const ChipLayout& layout, const Vec3& point) {
  Vec3 b = layout.bias;
  for (const auto& w : layout.wires) {
    if (w.current != 0.0 &&
        point_segment_distance(point, w.start, w.end) <
            layout.exclusion_radius) {
      throw SingularityError("biot_savart_field: point within exclusion radius of wire '" +
                             w.label + "'");
    }
    b += segment_field(w, point);
  }
  return b;
}

void field_batch(const ChipLayout& layout, const std::vector<Vec3>& pts,
                 std::vector<Vec3>& out, par::Mode mode) {
  require(out.size() == pts.size(), "field_batch: output size mismatch");
  par::parallel_for(pts.size(), mode,
                    [&](std::size_t i) { out[i] = biot_savart_field(layout, pts[i]); });
}

double magnetic_potential(const ChipLayout& layout, const Vec3& point) {
  return layout.gf_mf_product * mu_bohr * biot_savart_field(layout, point).norm();
}

ScalarField potential_field(const ChipLayout& layout) {
  return [layout](const Vec3& p) { return magnetic_potential(layout, p); };
}

double quartic_eval(const DoubleWellShape& shape, double x) {
  const double r = x / shape.half_spacing;
  const double q = 1.0 - r * r;
  return shape.barrier_height * q * q + 0.5 * shape.tilt * r;
}

namespace {

Eigen::Vector3d fd_gradient(const ScalarField& f, const Vec3& p, double h) {
  Eigen::Vector3d g;
  g(0) = (f({p.x + h, p.y, p.z}) - f({p.x - h, p.y, p.z})) / (2 * h);
  g(1) = (f({p.x, p.y + h, p.z}) - f({p.x, p.y - h, p.z})) / (2 * h);
  g(2) = (f({p.x, p.y, p.z + h}) - f({p.x, p.y, p.z - h})) / (2 * h);
  return g;
}

Eigen::Matrix3d fd_hessian(const ScalarField& f, const Vec3& p, double h) {
  Eigen::Matrix3d H;
  const double f0 = f(p);
  const double e[3][3] = {{h, 0, 0}, {0, h, 0}, {0, 0, h}};
  auto at = [&](double a, double b, double c) { return f({p.x + a, p.y + b, p.z + c}); };
  for (int i = 0; i < 3; ++i) {
    const double fp = at(e[i][0], e[i][1], e[i][2]);
    const double fm = at(-e[i][0], -e[i][1], -e[i][2]);
    H(i, i) = (fp - 2 * f0 + fm) / (h * h);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double fpp = at(e[i][0] + e[j][0], e[i][1] + e[j][1], e[i][2] + e[j][2]);
      const double fpm = at(e[i][0] - e[j][0], e[i][1] - e[j][1], e[i][2] - e[j][2]);
      const double fmp = at(e[j][0] - e[i][0], e[j][1] - e[i][1], e[j][2] - e[i][2]);
      const double fmm = at(-e[i][0] - e[j][0], -e[i][1] - e[j][1], -e[i][2] - e[j][2]);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4 * h * h);
    }
  return H;
}

bool inside(const AxisBox& box, const Vec3& p) {
  return p.x >= box.lo.x && p.x <= box.hi.x && p.y >= box.lo.y &&
         p.y <= box.hi.y && p.z >= box.lo.z && p.z <= box.hi.z;
}

// Damped Newton descent to a local minimum; falls back to gradient steps
// whenever the Hessian is not positive definite (flat bifurcation region).
Vec3 refine_minimum(const ScalarField& f, Vec3 p, const AxisBox& box,
                    const CharacterizeOptions& opts) {
  double fp = f(p);
  for (int it = 0; it < opts.max_newton_iter; ++it) {
    const Eigen::Vector3d g = fd_gradient(f, p, opts.hessian_step);
    const Eigen::Matrix3d H = fd_hessian(f, p, opts.hessian_step);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
    Eigen::Vector3d step;
    if (es.eigenvalues().minCoeff() > 0.0) {
      step = -H.ldlt().solve(g);
    } else {
      // scale a plain gradient step to the grid pitch
      const double gn = g.norm();
      if (gn == 0.0) break;
      step = -(opts.grid_pitch / gn) * g;
    }
    double scale = 1.0;
    Vec3 q;
    double fq = 0.0;
    bool ok = false;
    for (int bt = 0; bt < 25; ++bt) {
      q = {p.x + scale * step(0), p.y + scale * step(1), p.z + scale * step(2)};
      if (inside(box, q)) {
        fq = f(q);
        if (fq <= fp) {
          ok = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!ok) break;
    const double moved = scale * step.norm();
    p = q;
    fp = fq;
    if (moved < opts.position_tol) break;
  }
  return p;
}

// Minimize over (y,z) at fixed x; used for the inter-well path.
Vec3 refine_transverse(const ScalarField& f, Vec3 p, const CharacterizeOptions& opts) {
  const double h = opts.hessian_step;
  double fp = f(p);
  for (int it = 0; it < opts.max_newton_iter; ++it) {
    Eigen::Vector2d g;
    g(0) = (f({p.x, p.y + h, p.z}) - f({p.x, p.y - h, p.z})) / (2 * h);
    g(1) = (f({p.x, p.y, p.z + h}) - f({p.x, p.y, p.z - h})) / (2 * h);
    Eigen::Matrix2d H;
    const double f0 = fp;
    H(0, 0) = (f({p.x, p.y + h, p.z}) - 2 * f0 + f({p.x, p.y - h, p.z})) / (h * h);
    H(1, 1) = (f({p.x, p.y, p.z + h}) - 2 * f0 + f({p.x, p.y, p.z - h})) / (h * h);
    H(0, 1) = H(1, 0) =
        (f({p.x, p.y + h, p.z + h}) - f({p.x, p.y + h, p.z - h}) -
         f({p.x, p.y - h, p.z + h}) + f({p.x, p.y - h, p.z - h})) /
        (4 * h * h);
    Eigen::Vector2d step = -H.ldlt().solve(g);
    if (!step.allFinite() || H.determinant() <= 0.0) step = -g * 1e-2 / (g.norm() + 1e-300);
    double scale = 1.0;
    bool ok = false;
    Vec3 q = p;
    double fq = fp;
    for (int bt = 0; bt < 25; ++bt) {
      q = {p.x, p.y + scale * step(0), p.z + scale * step(1)};
      fq = f(q);
      if (fq <= fp) {
        ok = true;
        break;
      }
      scale *= 0.5;
    }
    if (!ok) break;
    const double moved = scale * step.norm();
    p = q;
    fp = fq;
    if (moved < opts.position_tol) break;
  }
  return p;
}

std::array<double, 3> axis_frequencies(const Eigen::Matrix3d& H, double mass) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw Error("characterize: Hessian not positive definite at reported minimum");
  // assign each eigenmode to the axis its eigenvector points along
  std::array<double, 3> freq{0, 0, 0};
  std::array<bool, 3> used{false, false, false};
  for (int m = 0; m < 3; ++m) {
    const Eigen::Vector3d v = es.eigenvectors().col(m).cwiseAbs();
    int axis = 0;
    double best = -1.0;
    for (int a = 0; a < 3; ++a)
      if (!used[a] && v(a) > best) {
        best = v(a);
        axis = a;
      }
    used[axis] = true;
    freq[axis] = std::sqrt(es.eigenvalues()(m) / mass) / (2.0 * pi);
  }
  return freq;
}

}  // namespace

TrapCharacterization characterize(const ScalarField& field, const AxisBox& box,
                                  const CharacterizeOptions& opts) {
  const Vec3 span = box.hi - box.lo;
  const int nx = std::max(3, static_cast<int>(span.x / opts.grid_pitch) + 1);
  const int ny = std::max(3, static_cast<int>(span.y / opts.grid_pitch) + 1);
  const int nz = std::max(3, static_cast<int>(span.z / opts.grid_pitch) + 1);
  require(static_cast<long long>(nx) * ny * nz < (1LL << 24),
          "characterize: search box too large for grid pitch");

  std::vector<double> v(static_cast<std::size_t>(nx) * ny * nz);
  auto idx = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  };
  auto pos = [&](int i, int j, int k) -> Vec3 {
    return {box.lo.x + span.x * i / (nx - 1), box.lo.y + span.y * j / (ny - 1),
            box.lo.z + span.z * k / (nz - 1)};
  };
  par::parallel_for(v.size(), par::default_mode(), [&](std::size_t q) {
    const int i = static_cast<int>(q % nx);
    const int j = static_cast<int>((q / nx) % ny);
    const int k = static_cast<int>(q / (static_cast<std::size_t>(nx) * ny));
    v[q] = field(pos(i, j, k));
  });

  // face-neighbor local minima seed the refinement
  std::vector<Vec3> seeds;
  for (int k = 1; k + 1 < nz; ++k)
    for (int j = 1; j + 1 < ny; ++j)
      for (int i = 1; i + 1 < nx; ++i) {
        const double c = v[idx(i, j, k)];
        if (c < v[idx(i - 1, j, k)] && c < v[idx(i + 1, j, k)] &&
            c < v[idx(i, j - 1, k)] && c < v[idx(i, j + 1, k)] &&
            c < v[idx(i, j, k - 1)] && c < v[idx(i, j, k + 1)])
          seeds.push_back(pos(i, j, k));
      }
  if (seeds.empty()) throw Error("characterize: no local minimum in search box");

  std::vector<Vec3> minima;
  const double dedupe = std::max(4.0 * opts.hessian_step, 2.0 * opts.position_tol);
  for (const auto& s : seeds) {
    const Vec3 m = refine_minimum(field, s, box, opts);
    bool dup = false;
    for (const auto& e : minima)
      if ((e - m).norm() < std::max(dedupe, 0.2 * opts.grid_pitch)) dup = true;
    if (!dup) minima.push_back(m);
  }
  std::sort(minima.begin(), minima.end(),
            [](const Vec3& a, const Vec3& b) { return a.x < b.x; });
  if (minima.size() > 2)
    throw Error("characterize: more than two minima in search box");

  TrapCharacterization out;
  out.minima = minima;
  for (const auto& m : minima) {
    const Eigen::Matrix3d H = fd_hessian(field, m, opts.hessian_step);
    out.frequencies.push_back(axis_frequencies(H, opts.mass));
  }

  if (minima.size() == 2) {
    const Vec3 &m1 = minima[0], &m2 = minima[1];
    const int nsteps = 101;
    double best_v = -std::numeric_limits<double>::infinity();
    Vec3 best_p;
    Vec3 guess = m1;
    for (int s = 0; s <= nsteps; ++s) {
      const double t = static_cast<double>(s) / nsteps;
      Vec3 p{m1.x + t * (m2.x - m1.x), guess.y, guess.z};
      if (s == 0) p = m1;
      p = refine_transverse(field, p, opts);
      guess = p;
      const double val = field(p);
      if (val > best_v) {
        best_v = val;
        best_p = p;
      }
    }
    const double v1 = field(m1), v2 = field(m2);
    DoubleWellShape shape;
    shape.barrier_height = best_v - std::min(v1, v2);
    shape.half_spacing = 0.5 * std::abs(m2.x - m1.x);
    shape.tilt = v2 - v1;
    out.shape = shape;
    out.saddle = best_p;
  }
  return out;
}

TrapCharacterization characterize(const ChipLayout& layout, const AxisBox& box,
                                  const CharacterizeOptions& opts) {
  layout.validate();
  return characterize(potential_field(layout), box, opts);
}

std::vector<double> axis_profile(const ScalarField& field,
                                 const std::vector<double>& xs, Vec3 seed,
                                 const CharacterizeOptions& opts) {
  std::vector<double> v(xs.size());
  Vec3 p = seed;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    p.x = xs[i];
    p = refine_transverse(field, p, opts);
    v[i] = field(p);
  }
  return v;
}

std::vector<SweepRow> barrier_sweep(const ChipLayout& layout_template,
                                    const std::string& swept_label,
                                    const std::vector<double>& i2_values,
                                    const AxisBox& box,
                                    const CharacterizeOptions& opts) {
  for (std::size_t i = 1; i < i2_values.size(); ++i)
    require(i2_values[i] > i2_values[i - 1], "barrier_sweep: currents must ascend");
  std::vector<SweepRow> rows(i2_values.size());
  for (std::size_t i = 0; i < i2_values.size(); ++i) {
    const double i2 = i2_values[i];
    try {
      const auto layout = layout_template.with_current(swept_label, i2);
      const auto trap = characterize(layout, box, opts);
      SweepRow r;
      r.i2_ampere = i2;
      r.n_minima = static_cast<int>(trap.minima.size());
      if (trap.shape) {
        r.vb = trap.shape->barrier_height;
        r.x0 = trap.shape->half_spacing;
        r.tilt = trap.shape->tilt;
      } else {
        r.vb = 0.0;
        r.x0 = std::numeric_limits<double>::quiet_NaN();
        r.tilt = 0.0;
      }
      // report the (right) minimum's frequencies
      const auto& f = trap.frequencies.back();
      r.fx = f[0];
      r.fy = f[1];
      r.fz = f[2];
      rows[i] = r;
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "barrier_sweep at I2=" << i2 * 1e3 << " mA: " << e.what();
      throw Error(msg.str());
    }
  }
  return rows;
}

ChipLayout parse_layout(std::istream& in) {
  ChipLayout layout;
  layout.bias = {};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "bias_G") {
      double bx, by, bz;
      require(static_cast<bool>(ls >> bx >> by >> bz), "layout: bad bias_G line");
      layout.bias = {bx * 1e-4, by * 1e-4, bz * 1e-4};
    } else if (key == "moment") {
      require(static_cast<bool>(ls >> layout.gf_mf_product), "layout: bad moment line");
    } else if (key == "exclusion_um") {
      double r;
      require(static_cast<bool>(ls >> r), "layout: bad exclusion_um line");
      layout.exclusion_radius = r * 1e-6;
    } else if (key == "wire") {
      WireSegment w;
      double x0, y0, z0, x1, y1, z1, i_ma;
      require(static_cast<bool>(ls >> w.label >> x0 >> y0 >> z0 >> x1 >> y1 >> z1 >> i_ma),
              "layout: bad wire line");
      w.start = {x0 * 1e-6, y0 * 1e-6, z0 * 1e-6};
      w.end = {x1 * 1e-6, y1 * 1e-6, z1 * 1e-6};
      w.current = i_ma * 1e-3;
      layout.wires.push_back(w);
    } else {
      throw InvalidInput("layout: unknown key '" + key + "'");
    }
  }
  layout.validate();
  return layout;
}

ChipLayout load_layout(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "layout: cannot open " + path);
  return parse_layout(f);
}

ChipLayout default_layout() {
  ChipLayout layout;
  layout.bias = {15e-4, 8e-4, 0.0};  // (15, 8, 0) G
  layout.gf_mf_product = 1.0;
  const double half = 2.5e-3;
  // guide wire along x; trap forms at z0 = mu0*I0/(2*pi*By) = 25 um
  layout.wires.push_back({{-half, 0, 0}, {half, 0, 0}, 100e-3, "i0"});
  // longitudinal confinement pair (field dips at the trap)
  layout.wires.push_back({{-12e-6, -half, 0}, {-12e-6, half, 0}, -2.8e-3, "i1"});
  layout.wires.push_back({{12e-6, -half, 0}, {12e-6, half, 0}, -2.8e-3, "i1"});
  // splitting wire on the buried layer, opposite polarity
  layout.wires.push_back({{0, -half, -10e-6}, {0, half, -10e-6}, 0.0, "i2"});
  return layout;
}

}  // namespace bjj::potential
