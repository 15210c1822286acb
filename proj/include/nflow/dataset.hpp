#pragma once

#include <cstdint>
#include <string>

#include "nflow/core.hpp"

namespace nflow {

/// Paired functions sampled on a periodic grid of [0, 1); columns are samples.
struct FunctionDataset {
  Matrix inputs;   ///< n x count
  Matrix outputs;  ///< n x count
};

enum class OperatorKind { Identity, Antiderivative };

OperatorKind operator_kind_from_string(const std::string& s);
const char* to_string(OperatorKind k) noexcept;

/// Zero-mean inputs sum_{j<=modes} (c_j sqrt2 cos 2pi j x + s_j sqrt2 sin 2pi j x)
/// with c_j, s_j ~ N(0, 1/j^2). Antiderivative outputs are the zero-mean
/// primitive, computed in closed form from the coefficients.
FunctionDataset fourier_dataset(OperatorKind kind, int n, int modes, int count, std::uint64_t seed);

/// Text form: a header line "n=<n>,h=<1/n>" and one function per row.
std::string functions_to_csv(const Matrix& functions);
/// Inverse of functions_to_csv; throws FormatError on malformed input.
Matrix functions_from_csv(const std::string& text);

}  // namespace nflow
