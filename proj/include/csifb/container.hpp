#pragma once

// Binary multi-array container used by every persisted artifact.
//
// Layout (little-endian throughout):
//   magic   "CSFB" (4 bytes)
//   version u32
//   hdrlen  u32, followed by hdrlen bytes of UTF-8 JSON metadata
//   count   u32 arrays, each:
//     name   u16 length + bytes
//     dtype  u8   (see DType)
//     ndim   u8
//     dims   u64 x ndim
//     data   row-major payload
//
// complex64 means interleaved float32 (re, im) pairs; complex128 the same in
// float64. Matrices are written row-major regardless of in-memory order.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csifb/errors.hpp"
#include "csifb/hash.hpp"

namespace csifb {

using json = nlohmann::json;

enum class DType : std::uint8_t {
  kF32 = 0,
  kF64 = 1,
  kC64 = 2,
  kC128 = 3,
  kU32 = 4,
  kI32 = 5,
  kU8 = 6,
  kI64 = 7,
};

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kC64: return 8;
    case DType::kC128: return 16;
    case DType::kU32: return 4;
    case DType::kI32: return 4;
    case DType::kU8: return 1;
    case DType::kI64: return 8;
  }
  throw std::invalid_argument("unknown dtype");
}

struct Array {
  std::string name;
  DType dtype = DType::kU8;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> bytes;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

template <typename Scalar>
std::vector<std::uint8_t> to_bytes_rowmajor(const Eigen::MatrixXcd& m, bool as_f32) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(m.size()) * (as_f32 ? 8 : 16));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (as_f32) {
        const float re = static_cast<float>(m(r, c).real());
        const float im = static_cast<float>(m(r, c).imag());
        const auto* pr = reinterpret_cast<const std::uint8_t*>(&re);
        const auto* pi = reinterpret_cast<const std::uint8_t*>(&im);
        out.insert(out.end(), pr, pr + 4);
        out.insert(out.end(), pi, pi + 4);
      } else {
        const double v[2] = {m(r, c).real(), m(r, c).imag()};
        const auto* p = reinterpret_cast<const std::uint8_t*>(v);
        out.insert(out.end(), p, p + 16);
      }
    }
  }
  return out;
}

}  // namespace detail

inline Array make_array_c64(const std::string& name, const Eigen::MatrixXcd& m) {
  Array a;
  a.name = name;
  a.dtype = DType::kC64;
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.bytes = detail::to_bytes_rowmajor<float>(m, true);
  return a;
}

inline Array make_array_c128(const std::string& name, const Eigen::MatrixXcd& m) {
  Array a;
  a.name = name;
  a.dtype = DType::kC128;
  a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  a.bytes = detail::to_bytes_rowmajor<double>(m, false);
  return a;
}

inline Array make_array_f64(const std::string& name, const Eigen::VectorXd& v) {
  Array a;
  a.name = name;
  a.dtype = DType::kF64;
  a.dims = {static_cast<std::uint64_t>(v.size())};
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  a.bytes.assign(p, p + v.size() * 8);
  return a;
}

inline Array make_array_i64(const std::string& name, const std::vector<std::int64_t>& v) {
  Array a;
  a.name = name;
  a.dtype = DType::kI64;
  a.dims = {v.size()};
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  a.bytes.assign(p, p + v.size() * 8);
  return a;
}

inline Array make_array_blob(const std::string& name, std::vector<std::uint8_t> blob) {
  Array a;
  a.name = name;
  a.dtype = DType::kU8;
  a.dims = {blob.size()};
  a.bytes = std::move(blob);
  return a;
}

inline Eigen::MatrixXcd array_to_complex_matrix(const Array& a) {
  if (a.dims.size() != 2 || (a.dtype != DType::kC64 && a.dtype != DType::kC128)) {
    throw std::invalid_argument("array '" + a.name + "' is not a complex matrix");
  }
  const auto rows = static_cast<Eigen::Index>(a.dims[0]);
  const auto cols = static_cast<Eigen::Index>(a.dims[1]);
  Eigen::MatrixXcd m(rows, cols);
  if (a.dtype == DType::kC64) {
    const auto* p = reinterpret_cast<const float*>(a.bytes.data());
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const std::size_t i = 2 * static_cast<std::size_t>(r * cols + c);
        m(r, c) = {static_cast<double>(p[i]), static_cast<double>(p[i + 1])};
      }
    }
  } else {
    const auto* p = reinterpret_cast<const double*>(a.bytes.data());
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const std::size_t i = 2 * static_cast<std::size_t>(r * cols + c);
        m(r, c) = {p[i], p[i + 1]};
      }
    }
  }
  return m;
}

inline Eigen::VectorXd array_to_real_vector(const Array& a) {
  if (a.dtype != DType::kF64 || a.dims.size() != 1) {
    throw std::invalid_argument("array '" + a.name + "' is not an f64 vector");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.dims[0]));
  std::memcpy(v.data(), a.bytes.data(), a.bytes.size());
  return v;
}

inline std::vector<std::int64_t> array_to_i64_vector(const Array& a) {
  if (a.dtype != DType::kI64 || a.dims.size() != 1) {
    throw std::invalid_argument("array '" + a.name + "' is not an i64 vector");
  }
  std::vector<std::int64_t> v(a.dims[0]);
  std::memcpy(v.data(), a.bytes.data(), a.bytes.size());
  return v;
}

// One artifact file: a JSON header plus named arrays.
class Container {
 public:
  json header;
  std::vector<Array> arrays;

  void add(Array a) { arrays.push_back(std::move(a)); }

  bool has(const std::string& name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return true;
    }
    return false;
  }

  const Array& get(const std::string& name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return a;
    }
    throw MismatchError("container is missing array '" + name + "'");
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write("CSFB", 4);
    write_u32(f, 1);
    const std::string hdr = header.dump();
    write_u32(f, static_cast<std::uint32_t>(hdr.size()));
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    write_u32(f, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
      write_u16(f, static_cast<std::uint16_t>(a.name.size()));
      f.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      const std::uint8_t dt = static_cast<std::uint8_t>(a.dtype);
      f.write(reinterpret_cast<const char*>(&dt), 1);
      const std::uint8_t nd = static_cast<std::uint8_t>(a.dims.size());
      f.write(reinterpret_cast<const char*>(&nd), 1);
      for (auto d : a.dims) write_u64(f, d);
      if (a.bytes.size() != a.element_count() * dtype_size(a.dtype)) {
        throw std::logic_error("array byte size inconsistent with dims: " + a.name);
      }
      f.write(reinterpret_cast<const char*>(a.bytes.data()),
              static_cast<std::streamsize>(a.bytes.size()));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
  }

  static Container load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "CSFB") {
      throw MismatchError("not a CSFB container: " + path);
    }
    const std::uint32_t version = read_u32(f);
    if (version != 1) throw MismatchError("unsupported container version");
    const std::uint32_t hdrlen = read_u32(f);
    std::string hdr(hdrlen, '\0');
    f.read(hdr.data(), hdrlen);
    Container c;
    c.header = hdr.empty() ? json::object() : json::parse(hdr);
    const std::uint32_t count = read_u32(f);
    for (std::uint32_t i = 0; i < count; ++i) {
      Array a;
      const std::uint16_t nlen = read_u16(f);
      a.name.resize(nlen);
      f.read(a.name.data(), nlen);
      std::uint8_t dt = 0, nd = 0;
      f.read(reinterpret_cast<char*>(&dt), 1);
      f.read(reinterpret_cast<char*>(&nd), 1);
      a.dtype = static_cast<DType>(dt);
      a.dims.resize(nd);
      for (auto& d : a.dims) d = read_u64(f);
      a.bytes.resize(a.element_count() * dtype_size(a.dtype));
      f.read(reinterpret_cast<char*>(a.bytes.data()),
             static_cast<std::streamsize>(a.bytes.size()));
      if (!f) throw MismatchError("truncated container: " + path);
      c.arrays.push_back(std::move(a));
    }
    return c;
  }

  // Fingerprint over header + all array contents.
  std::uint64_t fingerprint() const {
    ByteSink sink;
    const std::string hdr = header.dump();
    sink.put_range(hdr.data(), hdr.size());
    for (const auto& a : arrays) {
      sink.put_range(a.name.data(), a.name.size());
      sink.put(static_cast<std::uint8_t>(a.dtype));
      sink.put_range(a.dims.data(), a.dims.size());
      sink.put_range(a.bytes.data(), a.bytes.size());
    }
    return sink.hash();
  }

 private:
  static void write_u16(std::ostream& f, std::uint16_t v) {
    f.write(reinterpret_cast<const char*>(&v), 2);
  }
  static void write_u32(std::ostream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  static void write_u64(std::ostream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  static std::uint16_t read_u16(std::istream& f) {
    std::uint16_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 2);
    return v;
  }
  static std::uint32_t read_u32(std::istream& f) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  static std::uint64_t read_u64(std::istream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  }
};

inline void save_json_sidecar(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

inline json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return json::parse(f);
}

}  // namespace csifb
