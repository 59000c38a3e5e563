// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace artikin::simd::scalar {

namespace {

// Operation order is shared with the vector variants so that the quadratic
// form is bit-identical across ISAs.
inline double row_density(const SplatParams& g, double dx, double cross, double dy_term)
{
    const double q = (g.conic_xx * dx) * dx + (cross * dx + dy_term);
    if (!(q <= g.cutoff_sq)) {
        return 0.0;
    }
    return std::min(g.opacity * std::exp(-0.5 * q), g.max_density);
}

} // namespace

void density_row(const SplatParams& g, double row_center, int x0, int count, double* out)
{
    const double dy = row_center - g.mean_y;
    const double cross = 2.0 * g.conic_xy * dy;
    const double dy_term = (g.conic_yy * dy) * dy;
    for (int i = 0; i < count; ++i) {
        const double dx = (static_cast<double>(x0 + i) + 0.5) - g.mean_x;
        out[i] = row_density(g, dx, cross, dy_term);
    }
}

void splat_row(const SplatParams& g, double row_center, int x0, int count, const RowAccumulators& acc)
{
    const double dy = row_center - g.mean_y;
    const double cross = 2.0 * g.conic_xy * dy;
    const double dy_term = (g.conic_yy * dy) * dy;
    for (int i = 0; i < count; ++i) {
        const double dx = (static_cast<double>(x0 + i) + 0.5) - g.mean_x;
        const double rho = row_density(g, dx, cross, dy_term);
        if (rho == 0.0) {
            continue;
        }
        const double t = acc.transmittance[i];
        const double w = rho * t;
        acc.transmittance[i] = t * (1.0 - rho);
        acc.red[i] += w * g.red;
        acc.green[i] += w * g.green;
        acc.blue[i] += w * g.blue;
        acc.depth_sum[i] += w * g.depth;
        acc.weight_sum[i] += w;
        acc.part_weight[i] += w;
    }
}

double min_sq_distance(const double* xs, const double* ys, const double* zs, std::size_t n, double qx, double qy,
                       double qz)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        const double d = (dx * dx + dy * dy) + dz * dz;
        best = std::min(best, d);
    }
    return best;
}

} // namespace artikin::simd::scalar
