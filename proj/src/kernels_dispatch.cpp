#include "tilt/kernels.hpp"

#include <cstdlib>

namespace tilt::kernels {

#ifdef TILT_HAVE_AVX2
namespace detail {
const Ops* avx2_table();
}
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* lookup(std::string_view name) {
  if (name == "scalar") return &scalar();
#ifdef TILT_HAVE_AVX2
  if (name == "avx2" && cpu_has_avx2_fma()) return detail::avx2_table();
#endif
  return nullptr;
}

const Ops& select() {
  if (const char* env = std::getenv("TILT_KERNELS")) {
    if (const Ops* ops = lookup(env)) return *ops;
  }
#ifdef TILT_HAVE_AVX2
  if (cpu_has_avx2_fma()) return *detail::avx2_table();
#endif
  return scalar();
}

}  // namespace

const Ops& active() {
  static const Ops& chosen = select();
  return chosen;
}

const Ops* variant(std::string_view name) { return lookup(name); }

std::vector<std::string> available() {
  std::vector<std::string> names = {"scalar"};
#ifdef TILT_HAVE_AVX2
  if (cpu_has_avx2_fma()) names.emplace_back("avx2");
#endif
  return names;
}

}  // namespace tilt::kernels
