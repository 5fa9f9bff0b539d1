// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace melstream {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Tensor/op dimension mismatches.
struct ShapeError : Error {
  using Error::Error;
};
// Invalid or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};
// File open/read/write failures.
struct IoError : Error {
  using Error::Error;
};
// Malformed file contents (archive, config text, WAV).
struct ParseError : Error {
  using Error::Error;
};
// Weights/manifest or input validation failures.
struct ValidationError : Error {
  using Error::Error;
};

// 64-byte aligned float buffer. SIMD kernels rely on this alignment and on
// callers zero-padding any row tails they promise to pad.
class AlignedBuf {
 public:
  AlignedBuf() = default;
  explicit AlignedBuf(size_t n) { resize(n); }
  AlignedBuf(const AlignedBuf& o) { assign(o.p_, o.n_); }
  AlignedBuf(AlignedBuf&& o) noexcept : p_(o.p_), n_(o.n_) {
    o.p_ = nullptr;
    o.n_ = 0;
  }
  AlignedBuf& operator=(const AlignedBuf& o) {
    if (this != &o) assign(o.p_, o.n_);
    return *this;
  }
  AlignedBuf& operator=(AlignedBuf&& o) noexcept {
    if (this != &o) {
      release();
      p_ = o.p_;
      n_ = o.n_;
      o.p_ = nullptr;
      o.n_ = 0;
    }
    return *this;
  }
  ~AlignedBuf() { release(); }

  void resize(size_t n) {
    if (n == n_) return;
    release();
    if (n > 0) {
      size_t bytes = (n * sizeof(float) + 63) / 64 * 64;
      p_ = static_cast<float*>(std::aligned_alloc(64, bytes));
      if (!p_) throw std::bad_alloc();
      std::memset(p_, 0, bytes);
    }
    n_ = n;
  }
  void zero() {
    if (p_) std::memset(p_, 0, n_ * sizeof(float));
  }

  float* data() { return p_; }
  const float* data() const { return p_; }
  size_t size() const { return n_; }
  float& operator[](size_t i) { return p_[i]; }
  float operator[](size_t i) const { return p_[i]; }

 private:
  void assign(const float* src, size_t n) {
    resize(n);
    if (n) std::memcpy(p_, src, n * sizeof(float));
  }
  void release() {
    std::free(p_);
    p_ = nullptr;
    n_ = 0;
  }
  float* p_ = nullptr;
  size_t n_ = 0;
};

// Row-major matrix with rows padded to a multiple of 16 floats so every row
// is 64-byte aligned. The pad region is kept at zero.
struct PackedMat {
  AlignedBuf buf;
  int rows = 0;
  int cols = 0;
  int stride = 0;  // >= cols, multiple of 16

  PackedMat() = default;
  PackedMat(int r, int c) { resize(r, c); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    stride = (c + 15) / 16 * 16;
    buf.resize(static_cast<size_t>(r) * stride);
  }
  void zero() { buf.zero(); }
  float* row(int r) { return buf.data() + static_cast<size_t>(r) * stride; }
  const float* row(int r) const { return buf.data() + static_cast<size_t>(r) * stride; }
  size_t footprint_bytes() const { return buf.size() * sizeof(float); }
};

inline int round_up16(int n) { return (n + 15) / 16 * 16; }

}  // namespace melstream
