// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "melstream/common.hpp"

namespace melstream {

// Multiply-accumulate and auxiliary operation counts for one forward pass.
// macs covers linear/conv/LSTM/filterbank matrix work (1 MAC = 1 multiply +
// 1 add; reported FLOPs = 2*MACs). adds covers biases, normalization and
// elementwise arithmetic; nonlins covers activations and other
// transcendentals. Counts depend only on shapes, never on values.
struct OpCounter {
  uint64_t macs = 0;
  uint64_t adds = 0;
  uint64_t nonlins = 0;

  void reset() { macs = adds = nonlins = 0; }
  OpCounter& operator+=(const OpCounter& o) {
    macs += o.macs;
    adds += o.adds;
    nonlins += o.nonlins;
    return *this;
  }
  bool operator==(const OpCounter& o) const = default;
};

// Dense row-major float32 tensor. The interface type for weights, masks and
// spectral features; hot paths run on PackedMat scratch instead.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> dims) : dims_(std::move(dims)) {
    data_.assign(static_cast<size_t>(numel_of(dims_)), 0.f);
  }
  Tensor(std::initializer_list<int64_t> dims) : Tensor(std::vector<int64_t>(dims)) {}
  static Tensor from_data(std::vector<int64_t> dims, std::vector<float> data) {
    Tensor t;
    if (numel_of(dims) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data length does not match dims");
    t.dims_ = std::move(dims);
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<int64_t>& dims() const { return dims_; }
  int64_t dim(size_t i) const { return dims_.at(i); }
  size_t rank() const { return dims_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  float& at2(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * dims_[1] + j)]; }
  float at2(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * dims_[1] + j)]; }
  float& at3(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * dims_[1] + j) * dims_[2] + k)];
  }
  float at3(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * dims_[1] + j) * dims_[2] + k)];
  }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < dims_.size(); i++)
      s += (i ? "," : "") + std::to_string(dims_[i]);
    return s + "]";
  }

  static int64_t numel_of(const std::vector<int64_t>& dims) {
    int64_t n = 1;
    for (int64_t d : dims) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int64_t> dims_;
  std::vector<float> data_;
};

}  // namespace melstream
