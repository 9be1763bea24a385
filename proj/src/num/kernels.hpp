#pragma once

// Dense kernels shared by the ops. Every output element is accumulated over
// the reduction index in ascending order with the same multiply-add, whatever
// block it lands in, so results for one row never depend on which other rows
// share the call.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace lttd::num::kernels {

namespace detail {

constexpr int kRows = 8;
constexpr int kVecBytes = 64;
template <typename T>
constexpr int kCols = kVecBytes / static_cast<int>(sizeof(T));
template <typename T>
struct VecOf {
  typedef T type __attribute__((vector_size(kVecBytes)));
};
template <typename T>
using Vec = typename VecOf<T>::type;

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, Vec<T> v) {
  std::memcpy(p, &v, sizeof(v));
}

// The single multiply-add every kernel path goes through.
template <typename T>
inline Vec<T> madd(T a, Vec<T> b, Vec<T> c) {
  return c + b * a;
}

template <typename T>
inline void full_block(int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                       int64_t ldc, bool accumulate) {
  Vec<T> acc[kRows];
  for (int r = 0; r < kRows; ++r) acc[r] = accumulate ? load<T>(c + r * ldc) : Vec<T>{};
  for (int64_t p = 0; p < k; ++p) {
    const Vec<T> bv = load<T>(b + p * ldb);
    for (int r = 0; r < kRows; ++r) acc[r] = madd<T>(a[r * lda + p], bv, acc[r]);
  }
  for (int r = 0; r < kRows; ++r) store<T>(c + r * ldc, acc[r]);
}

template <typename T>
inline void edge_block(int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                       int64_t ldc, bool accumulate, int rows, int cols) {
  Vec<T> acc[kRows] = {};
  if (accumulate) {
    for (int r = 0; r < rows; ++r)
      for (int j = 0; j < cols; ++j) acc[r][j] = c[r * ldc + j];
  }
  for (int64_t p = 0; p < k; ++p) {
    Vec<T> bv{};
    for (int j = 0; j < cols; ++j) bv[j] = b[p * ldb + j];
    for (int r = 0; r < rows; ++r) acc[r] = madd<T>(a[r * lda + p], bv, acc[r]);
  }
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < cols; ++j) c[r * ldc + j] = acc[r][j];
}

template <typename T>
std::vector<T> transpose(int64_t rows, int64_t cols, const T* x, int64_t ldx) {
  std::vector<T> out(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out[static_cast<size_t>(j * rows + i)] = x[i * ldx + j];
  return out;
}

}  // namespace detail

// C[m,n] (+)= A[m,k] · B[k,n], row-major with leading dimensions.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc, bool accumulate) {
  constexpr int R = detail::kRows, C = detail::kCols<T>;
  for (int64_t i = 0; i < m; i += R) {
    const int rows = static_cast<int>(std::min<int64_t>(R, m - i));
    for (int64_t j = 0; j < n; j += C) {
      const int cols = static_cast<int>(std::min<int64_t>(C, n - j));
      if (rows == R && cols == C) {
        detail::full_block(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc, accumulate);
      } else {
        detail::edge_block(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc, accumulate,
                           rows, cols);
      }
    }
  }
}

// C[k,n] (+)= A[m,k]^T · B[m,n].
template <typename T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc, bool accumulate) {
  const std::vector<T> at = detail::transpose(m, k, a, lda);
  gemm_nn(k, n, m, at.data(), m, b, ldb, c, ldc, accumulate);
}

// C[m,n] (+)= A[m,k] · B[n,k]^T.
template <typename T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc, bool accumulate) {
  const std::vector<T> bt = detail::transpose(n, k, b, ldb);
  gemm_nn(m, n, k, a, lda, bt.data(), n, c, ldc, accumulate);
}

}  // namespace lttd::num::kernels
