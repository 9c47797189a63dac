#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hsl {

// Phase-space vectors always carry three slots; for d = 2 the last one is
// identically zero, so dot products and norms need no dimension argument.
using Vec = std::array<double, 3>;

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator-(const Vec& a) { return {-a[0], -a[1], -a[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec& operator+=(Vec& a, const Vec& b) {
  a[0] += b[0]; a[1] += b[1]; a[2] += b[2];
  return a;
}
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

enum class ErrorCode : int {
  ok = 0,
  invalid_dimension,
  scaling_violation,
  malformed_spec,
  overlap_input,
  non_unit_omega,
  event_cascade_overflow,
  inconsistent_state,
  size_guard,
  rejection_budget_exhausted,
  invalid_density,
  k_too_large,
  missing_sample_time,
  insufficient_replicas,
  amplitude_guard,
  overflow,
  cutoff_leak,
  majorant_breach,
  cell_underflow,
  negative_mass,
  integrator_failure,
  support_violation,
  exp_overflow,
  config_invalid,
  resource_budget_exceeded,
  config_hash_mismatch,
  io_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace hsl
