#pragma once

// Data-parallel kernels. Each kernel has a serial reference and an OpenMP
// version; both perform the same arithmetic per output element in the same
// order, so their results are bitwise identical.

#include <vector>

#include "nflow/convops.hpp"
#include "nflow/core.hpp"
#include "nflow/network.hpp"
#include "nflow/params.hpp"

namespace nflow::kernels {

namespace serial {

Matrix conv_apply(const ConvKernel& k, const Matrix& z);
std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& inputs);
std::vector<Matrix> forward_latent_batch(const Network& net, const std::vector<Matrix>& states);
std::vector<LatentState> integrate_batch(const ParamPath& p, const ActivationFamily& fam,
                                         const std::vector<LatentState>& initial, int substeps);

}  // namespace serial

namespace omp {

Matrix conv_apply(const ConvKernel& k, const Matrix& z);
std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& inputs);
std::vector<Matrix> forward_latent_batch(const Network& net, const std::vector<Matrix>& states);
std::vector<LatentState> integrate_batch(const ParamPath& p, const ActivationFamily& fam,
                                         const std::vector<LatentState>& initial, int substeps);

}  // namespace omp

/// Threads OpenMP will use for the next parallel region.
int max_threads();

}  // namespace nflow::kernels
