// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the splatter and the Chamfer metric.
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 variant. The variant is chosen once at runtime from
// the CPU features; `ARTIKIN_SIMD=scalar|avx2` or set_isa() override it.

namespace artikin::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Compiled in and supported by the running CPU.
bool isa_available(Isa isa);

/// ISA used by kernels(). Defaults to the best available one.
Isa active_isa();

/// Force an ISA; throws std::invalid_argument if unavailable.
void set_isa(Isa isa);

/// Screen-space Gaussian footprint evaluated along a pixel row. `conic_*` is
/// the inverse of the 2D covariance.
struct SplatParams {
    double conic_xx = 1.0;
    double conic_xy = 0.0;
    double conic_yy = 1.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double opacity = 1.0;
    double max_density = 0.99;
    /// Squared Mahalanobis cutoff; density is 0 beyond it.
    double cutoff_sq = 9.0;
    double red = 0.0;
    double green = 0.0;
    double blue = 0.0;
    double depth = 0.0;
};

/// Per-pixel accumulators of one image row, each offset to the first pixel
/// of the span being splatted.
struct RowAccumulators {
    double* transmittance = nullptr;
    double* red = nullptr;
    double* green = nullptr;
    double* blue = nullptr;
    double* depth_sum = nullptr;
    double* weight_sum = nullptr;
    double* part_weight = nullptr;
};

struct KernelTable {
    /// Densities at pixel centers (x0 + i + 0.5, row_center) for i < count.
    void (*density_row)(const SplatParams& g, double row_center, int x0, int count, double* out);
    /// Front-to-back composite one primitive into `count` pixels of a row.
    void (*splat_row)(const SplatParams& g, double row_center, int x0, int count, const RowAccumulators& acc);
    /// min_i |p_i - q|² over structure-of-arrays points; +inf when n == 0.
    double (*min_sq_distance)(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                              double qy, double qz);
};

const KernelTable& kernels();
const KernelTable& kernels(Isa isa);

} // namespace artikin::simd
