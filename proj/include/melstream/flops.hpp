// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Analytic per-layer operation accounting for the enhancement network
// (compression module + mask estimator). The formulas mirror the counters
// embedded in the forward paths one for one, and the test suite asserts
// exact equality between the two on real runs. FLOPs = 2 * MACs; the
// auxiliary (bias/elementwise/activation) counts are reported separately
// and a combined total is also given.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "melstream/archive.hpp"
#include "melstream/engine.hpp"
#include "melstream/run_config.hpp"

namespace melstream {

struct LayerRow {
  std::string name;
  uint64_t params = 0;
  uint64_t macs = 0;     // per frame
  uint64_t adds = 0;     // per frame
  uint64_t nonlins = 0;  // per frame
  // macs = macs_const + macs_per_unit * units, with units the band count the
  // layer iterates over (so band scaling is directly assertable).
  uint64_t units = 0;
  uint64_t macs_per_unit = 0;
  uint64_t macs_const = 0;
};

struct FlopsReport {
  PipelineConfig cfg;
  std::vector<LayerRow> rows;

  uint64_t total_params() const;
  uint64_t total_macs() const;
  uint64_t total_adds() const;
  uint64_t total_nonlins() const;
  double frames_per_second() const;
  double gflops_per_s(bool include_aux) const;
  OpCounter per_frame_counter() const;  // for exactness checks

  std::string table() const;
  std::string tsv() const;
};

FlopsReport count_flops(const PipelineConfig& cfg);

// Percentage MAC reduction going from `base` to `other` (positive when
// `other` is cheaper).
double reduction_percent(const FlopsReport& base, const FlopsReport& other);

struct RtfResult {
  double audio_seconds = 0;
  double wall_seconds = 0;
  double rtf = 0;
  Engine::StageSeconds stages;
  int64_t frames = 0;
  uint64_t macs = 0;
};

// Streams `seconds` of synthetic audio through one stream on one thread and
// reports wall-clock real-time factor plus the per-stage split.
RtfResult bench_rtf(const PipelineConfig& cfg, const TensorMap& weights,
                    double seconds, uint64_t noise_seed = 1);

}  // namespace melstream
