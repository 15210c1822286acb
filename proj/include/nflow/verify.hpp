#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nflow/construct.hpp"
#include "nflow/core.hpp"
#include "nflow/params.hpp"

// Property suites shared by the CLI verify command and the acceptance
// binary. Every check reports the worst value it measured.
namespace nflow::verify {

struct CheckResult {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

using Rng = std::mt19937_64;

/// core, flow, discretize, conv, construct.
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);
/// Runs one suite or "all"; throws DomainError on an unknown name.
std::vector<CheckResult> run_suite(const std::string& name, std::uint64_t seed);

// core
CheckResult check_leaky_identity(Rng& rng, int samples = 10000);
CheckResult check_activation_lipschitz(Rng& rng, int samples = 10000);

// flow
CheckResult check_semigroup(Rng& rng, int cases = 20);
CheckResult check_linear_flow(Rng& rng);
CheckResult check_gronwall(Rng& rng, int pairs = 200);

// discretize
CheckResult check_inverse_step(Rng& rng, int samples = 10000);
/// Ratios error(dt)/error(dt/2) over dt in {1/8, 1/16, 1/32}.
CheckResult check_convergence(Rng& rng, Structure structure, int problems = 20);
CheckResult check_model_roundtrip(Rng& rng, int networks = 100);

// conv
CheckResult check_conv_emulation(Rng& rng, int cases = 50);
CheckResult check_translation_equivariance(Rng& rng, int cases = 50);

// construct
CheckResult check_double_width(Rng& rng, int schedules = 50, int checkpoints = 10);
CheckResult check_activation_flow(Rng& rng, int samples = 10000);

/// Classical RK4 on an autonomous-in-segment field, hitting the given
/// breakpoints exactly. Independent of the flow module.
using Field = std::function<Vector(std::size_t segment, const Vector& z)>;
Vector rk4_piecewise(const Field& f, const std::vector<double>& durations, const Vector& z0, double t_end,
                     int substeps_per_segment);

/// Direct integration of the signed target dynamics up to t_end.
Vector signed_target_oracle(const DoubleWidthSpec& spec, const Vector& z0, double t_end, int substeps = 512);

/// Random dense path with entries of W and b up to `scale` in magnitude.
ParamPath random_dense_path(Rng& rng, Structure structure, int channels, const std::vector<double>& durations,
                            double scale);

std::string format_report(const std::vector<CheckResult>& results);

}  // namespace nflow::verify
