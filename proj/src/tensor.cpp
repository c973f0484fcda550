#include "hastcw/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "hastcw/errors.hpp"

namespace hastcw {

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)) { v.assign(shape_product(shape), 0.0); }

size_t shape_product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

size_t RawTensor::element_count() const {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

namespace {

constexpr char kMagic[4] = {'H', 'C', 'W', 'T'};
constexpr uint32_t kVersion = 1;

// All fields little-endian; this code assumes a little-endian host.
template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("truncated tensor file: " + path);
  return value;
}

}  // namespace

void write_tensor(const std::string& path, const RawTensor& t) {
  size_t n = t.element_count();
  if (t.dtype == Dtype::f32 && t.f32.size() != n)
    throw ValidationError("write_tensor: f32 payload size disagrees with dims");
  if (t.dtype == Dtype::u32 && t.u32.size() != n)
    throw ValidationError("write_tensor: u32 payload size disagrees with dims");
  if (t.dims.size() > 255) throw ValidationError("write_tensor: too many dimensions");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint8_t>(out, static_cast<uint8_t>(t.dtype));
  put<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
  for (uint32_t d : t.dims) put<uint32_t>(out, d);
  if (t.dtype == Dtype::f32)
    out.write(reinterpret_cast<const char*>(t.f32.data()), static_cast<std::streamsize>(n * 4));
  else
    out.write(reinterpret_cast<const char*>(t.u32.data()), static_cast<std::streamsize>(n * 4));
  if (!out) throw IoError("write failed: " + path);
}

RawTensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic in tensor file: " + path);
  uint32_t version = get<uint32_t>(in, path);
  if (version != kVersion) throw FormatError("unsupported tensor file version in: " + path);
  uint8_t dtype = get<uint8_t>(in, path);
  if (dtype != 1 && dtype != 2) throw FormatError("unknown dtype in tensor file: " + path);
  uint8_t ndim = get<uint8_t>(in, path);

  RawTensor t;
  t.dtype = static_cast<Dtype>(dtype);
  t.dims.resize(ndim);
  for (uint8_t i = 0; i < ndim; ++i) t.dims[i] = get<uint32_t>(in, path);
  size_t n = t.element_count();
  if (n > (size_t{1} << 31)) throw FormatError("tensor too large in: " + path);
  if (t.dtype == Dtype::f32) {
    t.f32.resize(n);
    in.read(reinterpret_cast<char*>(t.f32.data()), static_cast<std::streamsize>(n * 4));
  } else {
    t.u32.resize(n);
    in.read(reinterpret_cast<char*>(t.u32.data()), static_cast<std::streamsize>(n * 4));
  }
  if (!in) throw FormatError("truncated tensor payload: " + path);
  char extra;
  if (in.read(&extra, 1)) throw FormatError("trailing bytes in tensor file: " + path);
  return t;
}

RawTensor to_raw_f32(const Tensor& t) {
  RawTensor r;
  r.dtype = Dtype::f32;
  r.dims.assign(t.shape.begin(), t.shape.end());
  r.f32.resize(t.v.size());
  std::transform(t.v.begin(), t.v.end(), r.f32.begin(), [](double x) { return static_cast<float>(x); });
  return r;
}

Tensor from_raw_f32(const RawTensor& r) {
  if (r.dtype != Dtype::f32) throw FormatError("expected float32 tensor");
  Tensor t;
  t.shape.assign(r.dims.begin(), r.dims.end());
  t.v.assign(r.f32.begin(), r.f32.end());
  return t;
}

}  // namespace hastcw
