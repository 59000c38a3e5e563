// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace artikin::simd {

namespace {

constexpr KernelTable kScalarTable{&scalar::density_row, &scalar::splat_row, &scalar::min_sq_distance};

#if defined(ARTIKIN_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::density_row, &avx2::splat_row, &avx2::min_sq_distance};
#endif

bool cpu_has_avx2()
{
#if defined(ARTIKIN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa detect()
{
    if (const char* env = std::getenv("ARTIKIN_SIMD")) {
        const std::string v(env);
        if (v == "scalar") {
            return Isa::scalar;
        }
        if (v == "avx2" && isa_available(Isa::avx2)) {
            return Isa::avx2;
        }
    }
    return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current()
{
    static std::atomic<Isa> isa{detect()};
    return isa;
}

} // namespace

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
        return cpu_has_avx2();
    }
    return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa)
{
    if (!isa_available(isa)) {
        throw std::invalid_argument("SIMD variant '" + std::string(to_string(isa)) + "' is not available");
    }
    current().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels(Isa isa)
{
#if defined(ARTIKIN_HAVE_AVX2)
    if (isa == Isa::avx2 && cpu_has_avx2()) {
        return kAvx2Table;
    }
#endif
    (void)isa;
    return kScalarTable;
}

const KernelTable& kernels() { return kernels(active_isa()); }

} // namespace artikin::simd
