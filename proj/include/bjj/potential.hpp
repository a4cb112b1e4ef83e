#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bjj/constants.hpp"
#include "bjj/error.hpp"
#include "bjj/parallel.hpp"
#include "bjj/vec3.hpp"

// Magnetostatic double-well trap: chip-wire fields, trap characterization and
// the reduced quartic well model.
namespace bjj::potential {

struct WireSegment {
  Vec3 start;      // m
  Vec3 end;        // m
  double current;  // A
  std::string label;
};

struct ChipLayout {
  std::vector<WireSegment> wires;
  Vec3 bias;                       // T
  double gf_mf_product = 1.0;      // 1.0 for |F=2, m_F=2>
  double exclusion_radius = 1e-7;  // m, singularity guard around each wire

  void validate() const;
  // Scale the current of every wire whose label matches.
  ChipLayout with_current(const std::string& label, double ampere) const;
};

// Reduced model V(x) = V_b [1-(x/x0)^2]^2 + (tilt/2)(x/x0).
struct DoubleWellShape {
  double barrier_height = 0.0;  // J
  double half_spacing = 0.0;    // m
  double tilt = 0.0;            // J
};

struct TrapCharacterization {
  std::vector<Vec3> minima;                       // 1 or 2, ascending in x
  std::vector<std::array<double, 3>> frequencies; // Hz, per minimum (fx,fy,fz)
  std::optional<DoubleWellShape> shape;           // present when two minima
  Vec3 saddle;                                    // valid when two minima
};

struct AxisBox {
  Vec3 lo, hi;
};

struct CharacterizeOptions {
  double grid_pitch = 0.25e-6;  // m, coarse seeding grid
  double hessian_step = 1e-8;   // m, central-difference step
  double position_tol = 1e-9;   // m
  double mass = constants::mass_rb87;
  int max_newton_iter = 200;
};

using ScalarField = std::function<double(const Vec3&)>;

// Field of all wire segments plus the bias. Linear in each current.
Vec3 biot_savart_field(const ChipLayout& layout, const Vec3& point);

// Batch evaluation (data parallel); out must have pts.size() entries.
void field_batch(const ChipLayout& layout, const std::vector<Vec3>& pts,
                 std::vector<Vec3>& out, par::Mode mode = par::default_mode());

// Weak-field-seeker potential V = gF_mF * mu_B * |B|.
double magnetic_potential(const ChipLayout& layout, const Vec3& point);

// Potential as a scalar field, for the characterization machinery.
ScalarField potential_field(const ChipLayout& layout);

double quartic_eval(const DoubleWellShape& shape, double x);

// Locate minima in the box, measure trap frequencies from the Hessian and,
// when double-welled, the (V_b, x0, tilt) shape.
TrapCharacterization characterize(const ScalarField& field, const AxisBox& box,
                                  const CharacterizeOptions& opts = {});
TrapCharacterization characterize(const ChipLayout& layout, const AxisBox& box,
                                  const CharacterizeOptions& opts = {});

// Potential along the trap axis: at each x the field is minimized over
// (y, z), path-following from the seed point.
std::vector<double> axis_profile(const ScalarField& field,
                                 const std::vector<double>& xs, Vec3 seed,
                                 const CharacterizeOptions& opts = {});

struct SweepRow {
  double i2_ampere;
  double vb;            // J, 0 for single well
  double fx, fy, fz;    // Hz
  double x0;            // m, NaN for single well
  double tilt;          // J
  int n_minima;
};

std::vector<SweepRow> barrier_sweep(const ChipLayout& layout_template,
                                    const std::string& swept_label,
                                    const std::vector<double>& i2_values,
                                    const AxisBox& box,
                                    const CharacterizeOptions& opts = {});

// Layout file: "bias_G Bx By Bz", "moment g", "exclusion_um r" and
// "wire LABEL x0 y0 z0 x1 y1 z1 I" lines (positions um, currents mA).
ChipLayout load_layout(const std::string& path);
ChipLayout parse_layout(std::istream& in);

// Shipped default chip: side-guide wire plus three crossing wires, calibrated
// so the trap bifurcates near I2 ~ 2.2 mA.
ChipLayout default_layout();

}  // namespace bjj::potential
