#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "arcweaver/kernels/dot.hpp"

namespace arcweaver::kernels {
namespace {

using DotFn = double (*)(const float*, const float*, std::size_t);

DotFn kernel_for(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return &avx2::dot;
#endif
#if defined(__aarch64__)
    case Isa::Neon: return &neon::dot;
#endif
    default: return &scalar::dot;
  }
}

Isa detect() {
  if (const char* forced = std::getenv("ARCWEAVER_ISA")) {
    std::string name(forced);
    if (name == "scalar") return Isa::Scalar;
    if (name == "avx2" && isa_supported(Isa::Avx2)) return Isa::Avx2;
    if (name == "neon" && isa_supported(Isa::Neon)) return Isa::Neon;
  }
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "scalar";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("ISA not supported on this CPU: " + std::string(to_string(isa)));
  }
  current().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return kernel_for(active_isa())(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const float> a) { return dot(a, a); }

void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out) {
  if (query.size() != dim || rows.size() != dim * out.size()) {
    throw std::invalid_argument("dot_rows: shape mismatch");
  }
  DotFn fn = kernel_for(active_isa());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = fn(query.data(), rows.data() + r * dim, dim);
  }
}

}  // namespace arcweaver::kernels
