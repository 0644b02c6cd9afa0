#pragma once

// Randomised numerical checks of the transport and light-sink identities.

#include <cstdint>
#include <string>
#include <vector>

#include "bxr/geometry.hpp"

namespace bxr {

struct IdentityCheck {
  std::string name;
  std::string anchor;  // the identity being checked, as a formula
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct IdentityConfig {
  int n = 3;
  int pairs = 100;
  int steps = 512;
  double coeff_norm = 1.0;
  double fd_step = 1e-4;
  int basis_per_axis = 2;
  double epsilon = 0.25;
  std::uint64_t seed = 1;
  bool include_lightsink = true;  // Delta and light-sink checks (slower)
  int lightsink_pairs = 10;
  int threads = 1;
};

/// Transport-level identities: pseudolinearisation (segment and broken),
/// d_A f, u(T), differentiation along the fiber, gauge invariance,
/// variation formula, gamma-out, I-alpha, composition.
std::vector<IdentityCheck> transport_identities(const IdentityConfig& cfg);

/// Light-sink identities: Delta adjoint/left/bi-action, rho idempotence,
/// Delta norm vs rho distance.
std::vector<IdentityCheck> lightsink_identities(const IdentityConfig& cfg);

std::vector<IdentityCheck> run_identity_suite(const IdentityConfig& cfg);

std::string identity_csv(const std::vector<IdentityCheck>& checks);

}  // namespace bxr
