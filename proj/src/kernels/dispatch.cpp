// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string_view>

#include "itpatch/error.hpp"
#include "kernels_impl.hpp"

namespace itpatch::kernels {

const KernelTable* avx2() { return avx2_table(); }
const KernelTable* neon() { return neon_table(); }

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out{&scalar()};
  if (const auto* t = avx2()) out.push_back(t);
  if (const auto* t = neon()) out.push_back(t);
  return out;
}

const KernelTable& active() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* force = std::getenv("ITPATCH_SIMD");
    if (force && std::string_view(force) == "scalar") return scalar();
    if (const auto* t = avx2()) return *t;
    if (const auto* t = neon()) return *t;
    return scalar();
  }();
  return chosen;
}

void convolve_separable(std::span<const float> src, std::span<float> dst, int width, int height,
                        std::span<const float> taps) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (src.size() != n || dst.size() != n) throw ContractViolation("convolve: plane size mismatch");
  if (taps.empty() || taps.size() % 2 == 0) throw ContractViolation("convolve: odd tap count required");
  if (n == 0) return;
  std::vector<float> tmp(n);
  const auto& k = active();
  const int ntaps = static_cast<int>(taps.size());
  k.convolve_rows(src.data(), tmp.data(), width, height, taps.data(), ntaps);
  k.convolve_cols(tmp.data(), dst.data(), width, height, taps.data(), ntaps);
}

}  // namespace itpatch::kernels
