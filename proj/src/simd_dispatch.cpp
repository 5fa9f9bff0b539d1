// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/simd.hpp"

#include "melstream/common.hpp"

namespace melstream::simd {
namespace {

Lane detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx512f")) return Lane::avx512;
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Lane::avx2;
  return Lane::scalar;
#elif defined(__aarch64__)
  return Lane::neon;
#else
  return Lane::scalar;
#endif
}

Lane& active() {
  static Lane lane = detect_best();
  return lane;
}

}  // namespace

bool lane_available(Lane lane) {
  switch (lane) {
    case Lane::scalar:
      return true;
#if defined(__x86_64__) || defined(_M_X64)
    case Lane::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Lane::avx512:
      return __builtin_cpu_supports("avx512f");
#endif
#if defined(__aarch64__)
    case Lane::neon:
      return true;
#endif
    default:
      return false;
  }
}

const Ops& ops(Lane lane) {
  if (!lane_available(lane))
    throw ConfigError(std::string("simd lane not available: ") + lane_name(lane));
  switch (lane) {
#if defined(__x86_64__) || defined(_M_X64)
    case Lane::avx2:
      return detail::avx2_ops;
    case Lane::avx512:
      return detail::avx512_ops;
#endif
#if defined(__aarch64__)
    case Lane::neon:
      return detail::neon_ops;
#endif
    default:
      return detail::scalar_ops;
  }
}

const Ops& ops() { return ops(active()); }

Lane active_lane() { return active(); }

void set_lane(Lane lane) {
  if (!lane_available(lane))
    throw ConfigError(std::string("simd lane not available: ") + lane_name(lane));
  active() = lane;
}

std::vector<Lane> available_lanes() {
  std::vector<Lane> out;
  for (Lane l : {Lane::scalar, Lane::avx2, Lane::avx512, Lane::neon})
    if (lane_available(l)) out.push_back(l);
  return out;
}

const char* lane_name(Lane lane) {
  switch (lane) {
    case Lane::scalar:
      return "scalar";
    case Lane::avx2:
      return "avx2";
    case Lane::avx512:
      return "avx512";
    case Lane::neon:
      return "neon";
  }
  return "?";
}

Lane lane_from_name(const std::string& name) {
  if (name == "auto") return detect_best();
  for (Lane l : {Lane::scalar, Lane::avx2, Lane::avx512, Lane::neon})
    if (name == lane_name(l)) return l;
  throw ConfigError("unknown simd lane: " + name);
}

}  // namespace melstream::simd
