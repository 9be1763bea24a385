#include "lttd/num/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <type_traits>

namespace lttd::num {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  const T* p = t.data();
  const int64_t n = t.numel();
  // Inf and NaN are exactly the values with an all-ones exponent.
  using Bits = std::conditional_t<sizeof(T) == 4, uint32_t, uint64_t>;
  constexpr Bits exp_mask = sizeof(T) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
  bool bad = false;
  for (int64_t i = 0; i < n; ++i) {
    Bits b;
    std::memcpy(&b, p + i, sizeof b);
    bad |= (b & exp_mask) == exp_mask;
  }
  if (!bad) return;
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) {
      throw NumericError("non-finite value at flat index " + std::to_string(i) + " in " + what);
    }
  }
}

template void require_finite(const Tensor<float>&, const std::string&);
template void require_finite(const Tensor<double>&, const std::string&);

}  // namespace lttd::num
