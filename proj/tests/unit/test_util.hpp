#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "lttd/num/rng.hpp"
#include "lttd/num/tensor.hpp"

namespace lttd::testing {

template <typename T = double>
num::Tensor<T> random_tensor(num::Shape shape, uint64_t seed, double scale = 1.0) {
  num::Rng rng(seed);
  num::Tensor<T> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * scale);
  return t;
}

// Distinct, well-separated values (no ties) in shuffled order.
inline num::Tensor<double> distinct_tensor(num::Shape shape, uint64_t seed) {
  num::Rng rng(seed);
  num::Tensor<double> t(std::move(shape));
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) t[i] = 0.1 * static_cast<double>(i) - 0.05 * static_cast<double>(n);
  for (int64_t i = n; i > 1; --i) std::swap(t[i - 1], t[static_cast<int64_t>(rng.below(static_cast<uint64_t>(i)))]);
  return t;
}

// Fresh per-process scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() /
              ("lttd_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// FNV-1a over relative paths and contents of every regular file, in path order.
inline uint64_t tree_checksum(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  };
  for (const auto& f : files) {
    feed(std::filesystem::relative(f, root).string());
    feed(read_bytes(f));
  }
  return h;
}

}  // namespace lttd::testing
