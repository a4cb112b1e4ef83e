#pragma once

// Physical constants (SI). CODATA 2018 values where applicable.
namespace bjj::constants {

inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double h_planck = 6.62607015e-34;   // J s
inline constexpr double k_boltzmann = 1.380649e-23;  // J/K
inline constexpr double mu_bohr = 9.2740100783e-24;  // J/T
inline constexpr double mu_0 = 1.25663706212e-6;     // T m / A
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double zeta3 = 1.2020569031595943;  // Riemann zeta(3)

// 87Rb, |F=2, m_F=2>
inline constexpr double mass_rb87 = 1.44316e-25;       // kg
inline constexpr double a_scatt_rb87 = 5.24e-9;        // m, triplet s-wave length
inline constexpr double lambda_d2_rb87 = 780.241e-9;   // m
inline constexpr double gamma_d2_rb87 = 2.0 * pi * 6.0666e6;  // rad/s
// resonant cross section 3*lambda^2/(2*pi) for the cycling transition
inline constexpr double sigma0_d2_rb87 =
    3.0 * lambda_d2_rb87 * lambda_d2_rb87 / (2.0 * pi);

// energy <-> frequency helpers
inline constexpr double hz_to_joule(double f) { return h_planck * f; }
inline constexpr double joule_to_hz(double e) { return e / h_planck; }

}  // namespace bjj::constants
