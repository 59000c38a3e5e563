// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 (no FMA); only reached after a runtime CPU check.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace artikin::simd::avx2 {

namespace {

// Cephes-style exp for x in [-708, 0]: n = round(x·log2 e), Padé on the
// remainder, then scale by 2^n through the exponent bits.
inline __m256d exp_pd(__m256d x)
{
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 2^52 + 2^51

    x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, c1));
    r = _mm256_sub_pd(r, _mm256_mul_pd(n, c2));
    const __m256d rr = _mm256_mul_pd(r, r);
    __m256d px = _mm256_add_pd(_mm256_mul_pd(p0, rr), p1);
    px = _mm256_add_pd(_mm256_mul_pd(px, rr), p2);
    px = _mm256_mul_pd(px, r);
    __m256d qx = _mm256_add_pd(_mm256_mul_pd(q0, rr), q1);
    qx = _mm256_add_pd(_mm256_mul_pd(qx, rr), q2);
    qx = _mm256_add_pd(_mm256_mul_pd(qx, rr), q3);
    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_add_pd(one, _mm256_mul_pd(two, e));

    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_add_epi64(_mm256_castpd_si256(e), _mm256_slli_epi64(ni, 52));
    return _mm256_castsi256_pd(bits);
}

inline __m256i tail_mask(int remaining)
{
    const __m256i lane = _mm256_set_epi64x(3, 2, 1, 0);
    return _mm256_cmpgt_epi64(_mm256_set1_epi64x(remaining), lane);
}

struct RowSetup {
    __m256d conic_xx;
    __m256d cross;
    __m256d dy_term;
    __m256d mean_x;
    __m256d opacity;
    __m256d max_density;
    __m256d cutoff;
    __m256d lane_offset;
};

inline RowSetup setup(const SplatParams& g, double row_center)
{
    const double dy = row_center - g.mean_y;
    RowSetup s;
    s.conic_xx = _mm256_set1_pd(g.conic_xx);
    s.cross = _mm256_set1_pd(2.0 * g.conic_xy * dy);
    s.dy_term = _mm256_set1_pd((g.conic_yy * dy) * dy);
    s.mean_x = _mm256_set1_pd(g.mean_x);
    s.opacity = _mm256_set1_pd(g.opacity);
    s.max_density = _mm256_set1_pd(g.max_density);
    s.cutoff = _mm256_set1_pd(g.cutoff_sq);
    s.lane_offset = _mm256_set_pd(3.5, 2.5, 1.5, 0.5);
    return s;
}

inline __m256d density4(const RowSetup& s, int x)
{
    const __m256d px = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(x)), s.lane_offset);
    const __m256d dx = _mm256_sub_pd(px, s.mean_x);
    const __m256d q =
        _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(s.conic_xx, dx), dx), _mm256_add_pd(_mm256_mul_pd(s.cross, dx), s.dy_term));
    const __m256d inside = _mm256_cmp_pd(q, s.cutoff, _CMP_LE_OQ);
    __m256d rho = _mm256_mul_pd(s.opacity, exp_pd(_mm256_mul_pd(_mm256_set1_pd(-0.5), q)));
    rho = _mm256_min_pd(rho, s.max_density);
    return _mm256_and_pd(rho, inside);
}

} // namespace

void density_row(const SplatParams& g, double row_center, int x0, int count, double* out)
{
    const RowSetup s = setup(g, row_center);
    int i = 0;
    for (; i + 4 <= count; i += 4) {
        _mm256_storeu_pd(out + i, density4(s, x0 + i));
    }
    if (i < count) {
        _mm256_maskstore_pd(out + i, tail_mask(count - i), density4(s, x0 + i));
    }
}

void splat_row(const SplatParams& g, double row_center, int x0, int count, const RowAccumulators& acc)
{
    const RowSetup s = setup(g, row_center);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d red = _mm256_set1_pd(g.red);
    const __m256d green = _mm256_set1_pd(g.green);
    const __m256d blue = _mm256_set1_pd(g.blue);
    const __m256d depth = _mm256_set1_pd(g.depth);

    auto step = [&](int i, __m256i mask) {
        const __m256d rho = density4(s, x0 + i);
        const __m256d t = _mm256_maskload_pd(acc.transmittance + i, mask);
        const __m256d w = _mm256_mul_pd(rho, t);
        _mm256_maskstore_pd(acc.transmittance + i, mask, _mm256_mul_pd(t, _mm256_sub_pd(one, rho)));
        auto accumulate = [&](double* dst, __m256d v) {
            _mm256_maskstore_pd(dst + i, mask, _mm256_add_pd(_mm256_maskload_pd(dst + i, mask), v));
        };
        accumulate(acc.red, _mm256_mul_pd(w, red));
        accumulate(acc.green, _mm256_mul_pd(w, green));
        accumulate(acc.blue, _mm256_mul_pd(w, blue));
        accumulate(acc.depth_sum, _mm256_mul_pd(w, depth));
        accumulate(acc.weight_sum, w);
        accumulate(acc.part_weight, w);
    };

    const __m256i all = _mm256_set1_epi64x(-1);
    int i = 0;
    for (; i + 4 <= count; i += 4) {
        step(i, all);
    }
    if (i < count) {
        step(i, tail_mask(count - i));
    }
}

double min_sq_distance(const double* xs, const double* ys, const double* zs, std::size_t n, double qx, double qy,
                       double qz)
{
    const __m256d vx = _mm256_set1_pd(qx);
    const __m256d vy = _mm256_set1_pd(qy);
    const __m256d vz = _mm256_set1_pd(qz);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vy);
        const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vz);
        const __m256d d =
            _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), _mm256_mul_pd(dz, dz));
        best = _mm256_min_pd(best, d);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    double out = lanes[0];
    for (int l = 1; l < 4; ++l) {
        out = out < lanes[l] ? out : lanes[l];
    }
    for (; i < n; ++i) {
        const double dx = xs[i] - qx;
        const double dy = ys[i] - qy;
        const double dz = zs[i] - qz;
        const double d = (dx * dx + dy * dy) + dz * dz;
        out = out < d ? out : d;
    }
    return out;
}

} // namespace artikin::simd::avx2
