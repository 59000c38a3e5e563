// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/simd/kernels.hpp"

namespace artikin::simd {

namespace scalar {
void density_row(const SplatParams& g, double row_center, int x0, int count, double* out);
void splat_row(const SplatParams& g, double row_center, int x0, int count, const RowAccumulators& acc);
double min_sq_distance(const double* xs, const double* ys, const double* zs, std::size_t n, double qx, double qy,
                       double qz);
} // namespace scalar

#if defined(ARTIKIN_HAVE_AVX2)
namespace avx2 {
void density_row(const SplatParams& g, double row_center, int x0, int count, double* out);
void splat_row(const SplatParams& g, double row_center, int x0, int count, const RowAccumulators& acc);
double min_sq_distance(const double* xs, const double* ys, const double* zs, std::size_t n, double qx, double qy,
                       double qz);
} // namespace avx2
#endif

} // namespace artikin::simd
