// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Named-tensor archive: the interoperability surface for model weights and
// feature dumps. Little-endian throughout:
//
//   magic "MMNT" | version u32 (=1) | tensor count u32
//   per tensor: name length u32, UTF-8 name, rank u32, dims u32[rank],
//               dtype u32 (0 = float32), payload (row-major float32)
//
// Names are unique; tensors are written in lexicographic name order, so
// save() bytes are a pure function of the contents.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "melstream/run_config.hpp"
#include "melstream/tensor.hpp"

namespace melstream {

using TensorMap = std::map<std::string, Tensor>;

std::vector<uint8_t> archive_to_bytes(const TensorMap& tensors);
TensorMap archive_from_bytes(const uint8_t* data, size_t size);

void save_archive(const TensorMap& tensors, const std::string& path);
TensorMap load_archive(const std::string& path);

// ---- manifest ----

struct TensorSpec {
  std::string name;
  std::vector<int64_t> dims;
  int64_t numel() const;
};

// Expected tensor names/shapes for a pipeline config, in name order.
// Deterministic; includes the meta.config_fp fingerprint tensor.
std::vector<TensorSpec> build_manifest(const PipelineConfig& cfg);

// Seeded deterministic init satisfying the manifest. SplitMix64 stream per
// tensor keyed by (seed, name); weight matrices U(+-1/sqrt(fan_in)) with
// fan_in the product of trailing dims, layer-norm gains 1, other vectors 0.
TensorMap random_init(const PipelineConfig& cfg, uint64_t seed);

struct ValidateResult {
  std::vector<std::string> missing;     // in manifest, absent from archive
  std::vector<std::string> extra;      // in archive, not in manifest
  std::vector<std::string> mismatched;  // shape or fingerprint differences
  bool ok() const { return missing.empty() && extra.empty() && mismatched.empty(); }
  std::string summary() const;
};

ValidateResult validate_weights(const TensorMap& weights, const PipelineConfig& cfg);

}  // namespace melstream
