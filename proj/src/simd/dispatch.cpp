#include <atomic>
#include <cstdlib>
#include <string>

#include "despeckle/error.hpp"
#include "despeckle/simd.hpp"

namespace despeckle::simd {
namespace {

const KernelTable* table_for(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return scalar_kernels();
    case Isa::avx2: return avx2_kernels();
    case Isa::avx512: return avx512_kernels();
    case Isa::neon: return neon_kernels();
    }
    return nullptr;
}

bool cpu_has(Isa isa) noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512: return __builtin_cpu_supports("avx512f");
    case Isa::neon: return false;
    }
    return false;
#else
    return isa == Isa::scalar || isa == Isa::neon;
#endif
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("DESPECKLE_ISA")) {
        if (auto isa = parse_isa(env); isa && is_supported(*isa)) return table_for(*isa);
    }
    return table_for(best_isa());
}

} // namespace

const char* to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::avx512: return "avx512";
    case Isa::neon: return "neon";
    }
    return "?";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512, Isa::neon})
        if (name == to_string(isa)) return isa;
    return std::nullopt;
}

bool is_supported(Isa isa) noexcept { return table_for(isa) != nullptr && cpu_has(isa); }

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512, Isa::neon})
        if (is_supported(isa)) out.push_back(isa);
    return out;
}

Isa best_isa() noexcept {
    for (Isa isa : {Isa::avx512, Isa::avx2, Isa::neon})
        if (is_supported(isa)) return isa;
    return Isa::scalar;
}

const KernelTable& kernels() noexcept {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        const KernelTable* init = initial_table();
        g_active.compare_exchange_strong(t, init, std::memory_order_acq_rel);
        t = g_active.load(std::memory_order_acquire);
    }
    return *t;
}

Isa active_isa() noexcept { return kernels().isa; }

void set_active_isa(Isa isa) {
    if (!is_supported(isa))
        throw InvalidArgument(std::string("instruction set not available: ") + to_string(isa));
    g_active.store(table_for(isa), std::memory_order_release);
}

} // namespace despeckle::simd
