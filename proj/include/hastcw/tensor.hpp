#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hastcw {

// Dense n-dimensional array of doubles, row-major.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s);

  size_t size() const { return v.size(); }
  size_t dim(size_t i) const { return shape[i]; }

  // 4-d accessors (n, c, h, w)
  double& at4(size_t n, size_t c, size_t h, size_t w) {
    return v[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  double at4(size_t n, size_t c, size_t h, size_t w) const {
    return v[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  // 2-d accessors (n, k)
  double& at2(size_t n, size_t k) { return v[n * shape[1] + k]; }
  double at2(size_t n, size_t k) const { return v[n * shape[1] + k]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

size_t shape_product(const std::vector<size_t>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

// --- HCWT container ------------------------------------------------------
// Binary, little-endian: magic "HCWT", u32 version=1, u8 dtype
// (1 = float32, 2 = uint32), u8 ndim, ndim x u32 dims, payload row-major.
// A 0-dim tensor is a scalar with exactly one element.

enum class Dtype : uint8_t { f32 = 1, u32 = 2 };

struct RawTensor {
  Dtype dtype = Dtype::f32;
  std::vector<uint32_t> dims;
  std::vector<float> f32;
  std::vector<uint32_t> u32;

  size_t element_count() const;
};

void write_tensor(const std::string& path, const RawTensor& t);
RawTensor read_tensor(const std::string& path);

// Conversions between the double-precision working type and f32 storage.
RawTensor to_raw_f32(const Tensor& t);
Tensor from_raw_f32(const RawTensor& r);

}  // namespace hastcw
