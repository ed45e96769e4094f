#include <atomic>
#include <cstdlib>
#include <string>

#include "star/kernels.hpp"

namespace star::simd {

#if defined(STAR_HAVE_AVX2)
const KernelTable* avx2_table_unchecked();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(STAR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* table_for(Isa isa) {
    if (isa == Isa::Avx2) {
        if (const KernelTable* t = avx2_kernels()) return t;
    }
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
    static std::atomic<const KernelTable*> table{table_for(detect())};
    return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(STAR_HAVE_AVX2)
    static const bool ok = cpu_has_avx2();
    return ok ? avx2_table_unchecked() : nullptr;
#else
    return nullptr;
#endif
}

Isa detect() {
    if (const char* env = std::getenv("STAR_SIMD")) {
        if (std::string(env) == "scalar") return Isa::Scalar;
    }
    return avx2_kernels() != nullptr ? Isa::Avx2 : Isa::Scalar;
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void select(Isa isa) { active().store(table_for(isa), std::memory_order_release); }

std::string_view name(Isa isa) {
    switch (isa) {
        case Isa::Avx2:
            return "avx2";
        case Isa::Scalar:
            break;
    }
    return "scalar";
}

}  // namespace star::simd
