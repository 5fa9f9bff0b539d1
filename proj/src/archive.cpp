// Copyright 2026 The Melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melstream/archive.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "melstream/dsp.hpp"
#include "melstream/rng.hpp"

namespace melstream {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'N', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

struct Reader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;
  std::string context = "header";

  void need(size_t n, const std::string& what) {
    if (pos + n > size)
      throw ParseError("archive truncated at byte " + std::to_string(pos) +
                       " while reading " + what + " of " + context);
    (void)what;
  }
  uint32_t u32(const std::string& what) {
    need(4, what);
    uint32_t v = static_cast<uint32_t>(data[pos]) | (static_cast<uint32_t>(data[pos + 1]) << 8) |
                 (static_cast<uint32_t>(data[pos + 2]) << 16) |
                 (static_cast<uint32_t>(data[pos + 3]) << 24);
    pos += 4;
    return v;
  }
};

}  // namespace

std::vector<uint8_t> archive_to_bytes(const TensorMap& tensors) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.dims()) put_u32(out, static_cast<uint32_t>(d));
    put_u32(out, kDtypeF32);
    const size_t bytes = static_cast<size_t>(t.numel()) * 4;
    const size_t base = out.size();
    out.resize(base + bytes);
    std::memcpy(out.data() + base, t.data(), bytes);
  }
  return out;
}

TensorMap archive_from_bytes(const uint8_t* data, size_t size) {
  Reader r{data, size};
  r.need(4, "magic");
  if (std::memcmp(data, kMagic, 4) != 0) throw ParseError("bad archive magic (expected MMNT)");
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kVersion)
    throw ParseError("unsupported archive version " + std::to_string(version));
  const uint32_t count = r.u32("tensor count");
  TensorMap out;
  for (uint32_t i = 0; i < count; i++) {
    r.context = "tensor " + std::to_string(i);
    const uint32_t name_len = r.u32("name length");
    r.need(name_len, "name");
    std::string name(reinterpret_cast<const char*>(data + r.pos), name_len);
    r.pos += name_len;
    r.context = "tensor '" + name + "'";
    const uint32_t rank = r.u32("rank");
    if (rank > 8) throw ParseError("implausible rank " + std::to_string(rank) + " in " + r.context);
    std::vector<int64_t> dims(rank);
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; d++) {
      dims[d] = r.u32("dims");
      if (dims[d] <= 0) throw ParseError("non-positive dim in " + r.context);
      numel *= dims[d];
    }
    const uint32_t dtype = r.u32("dtype");
    if (dtype != kDtypeF32)
      throw ParseError("unsupported dtype " + std::to_string(dtype) + " in " + r.context);
    r.need(static_cast<size_t>(numel) * 4, "payload");
    std::vector<float> payload(static_cast<size_t>(numel));
    std::memcpy(payload.data(), data + r.pos, static_cast<size_t>(numel) * 4);
    r.pos += static_cast<size_t>(numel) * 4;
    if (out.count(name)) throw ParseError("duplicate tensor name '" + name + "'");
    out.emplace(name, Tensor::from_data(std::move(dims), std::move(payload)));
  }
  return out;
}

void save_archive(const TensorMap& tensors, const std::string& path) {
  const std::vector<uint8_t> bytes = archive_to_bytes(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create archive: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing archive: " + path);
}

TensorMap load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open archive: " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (!in.read(reinterpret_cast<char*>(bytes.data()), size))
    throw IoError("failed reading archive: " + path);
  try {
    return archive_from_bytes(bytes.data(), bytes.size());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---- manifest ----

int64_t TensorSpec::numel() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

std::vector<TensorSpec> build_manifest(const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<TensorSpec> specs;
  auto add = [&specs](std::string name, std::vector<int64_t> dims) {
    specs.push_back({std::move(name), std::move(dims)});
  };

  add("meta.config_fp", {4});

  const int64_t D = cfg.s2m.embed_dim;
  const int64_t M = cfg.channels;
  const int64_t F = cfg.stft.bins();
  const int64_t Fp = cfg.mel.n_mels;
  const int64_t fk = cfg.s2m.freq_kernel;
  const int64_t tk = cfg.s2m.time_kernel;
  const int Q = cfg.s2m.conv_blocks;

  auto add_branch = [&](const std::string& prefix, int64_t in_features, bool with_fcb) {
    add(prefix + ".lin.W", {D, in_features});
    add(prefix + ".lin.b", {D});
    add(prefix + ".lin.ln.g", {D});
    add(prefix + ".lin.ln.b", {D});
    if (with_fcb) {
      for (int i = 0; i < Q; i++) {
        const std::string b = prefix + ".fcb." + std::to_string(i);
        add(b + ".K", {D, D, fk});
        add(b + ".b", {D});
        add(b + ".ln.g", {D});
        add(b + ".ln.b", {D});
      }
    }
  };

  if (cfg.scale == Scale::mel) {
    switch (cfg.s2m.variant) {
      case Variant::separate_fcb_tsb: {
        add_branch("s2m.mag", M, true);
        add_branch("s2m.pha", 2 * M, true);
        const int exchanges = cfg.s2m.comm_per_block ? Q : 1;
        for (int i = 0; i < exchanges; i++) {
          const std::string c = "s2m.comm." + std::to_string(i);
          add(c + ".p2m.W", {D, D});
          add(c + ".p2m.b", {D});
          if (cfg.s2m.comm_bidirectional) {
            add(c + ".m2p.W", {D, D});
            add(c + ".m2p.b", {D});
          }
        }
        add("s2m.pha.fb.W", {Fp, F});
        add("s2m.pha.fb.b", {Fp});
        add("s2m.tsb.K", {D, 2 * D, tk});
        add("s2m.tsb.b", {D});
        break;
      }
      case Variant::joint_fcb_tsb:
      case Variant::joint_fcb:
        add_branch("s2m.joint", 2 * M, true);
        if (cfg.s2m.variant == Variant::joint_fcb_tsb) {
          add("s2m.tsb.K", {D, D, tk});
          add("s2m.tsb.b", {D});
        }
        break;
      case Variant::joint_handcrafted:
        add_branch("s2m.joint", 2 * M, false);
        break;
      case Variant::joint_trainmel: {
        add_branch("s2m.joint", 2 * M, false);
        const dsp::MelFilterbank fb = dsp::build_mel_filterbank(cfg.stft, cfg.mel);
        for (int m = 0; m < fb.n_mels; m++)
          add("s2m.tm." + std::to_string(m) + ".w", {fb.hi[m] - fb.lo[m]});
        add("s2m.tm.b", {Fp});
        break;
      }
    }
  }

  // mask estimator; feature width flows through bypassed modules unchanged
  const int64_t dout = cfg.backbone.module_out;
  int64_t d = cfg.feature_dim();
  const auto& bb = cfg.backbone;
  auto add_lstm = [&](const std::string& p, int64_t in, int64_t h) {
    add(p + ".Wx", {4 * h, in});
    add(p + ".Wh", {4 * h, h});
    add(p + ".b", {4 * h});
  };
  if (bb.enable[0]) {
    add_lstm("bb.m1.f", d, bb.hidden[0]);
    add_lstm("bb.m1.r", d, bb.hidden[0]);
    add("bb.m1.lin.W", {dout, 2 * bb.hidden[0]});
    add("bb.m1.lin.b", {dout});
    d = dout;
  }
  if (bb.enable[1]) {
    add_lstm("bb.m2", d, bb.hidden[1]);
    add("bb.m2.lin.W", {dout, bb.hidden[1]});
    add("bb.m2.lin.b", {dout});
    d = dout;
  }
  if (bb.enable[2]) {
    add_lstm("bb.m3", (bb.n1 + bb.n2 + 1) * d + 1, bb.hidden[2]);
    add("bb.m3.lin.W", {dout, bb.hidden[2]});
    add("bb.m3.lin.b", {dout});
    d = dout;
  }
  if (bb.enable[3]) {
    add_lstm("bb.m4.f", bb.context * d + 1, bb.hidden[3]);
    add_lstm("bb.m4.r", bb.context * d + 1, bb.hidden[3]);
    add("bb.m4.lin.W", {dout, 2 * bb.hidden[3]});
    add("bb.m4.lin.b", {dout});
    d = dout;
  }
  add("bb.out.W", {1, d});
  add("bb.out.b", {1});

  std::sort(specs.begin(), specs.end(),
            [](const TensorSpec& a, const TensorSpec& b) { return a.name < b.name; });
  return specs;
}

TensorMap random_init(const PipelineConfig& cfg, uint64_t seed) {
  TensorMap out;
  for (const TensorSpec& spec : build_manifest(cfg)) {
    Tensor t(spec.dims);
    if (spec.name == "meta.config_fp") {
      const auto chunks = fingerprint_chunks(cfg.fingerprint());
      for (int i = 0; i < 4; i++) t[i] = chunks[i];
    } else if (spec.dims.size() >= 2) {
      int64_t fan_in = 1;
      for (size_t i = 1; i < spec.dims.size(); i++) fan_in *= spec.dims[i];
      const float range = 1.f / std::sqrt(static_cast<float>(fan_in));
      SplitMix64 rng(seed, spec.name);
      for (int64_t i = 0; i < t.numel(); i++) t[i] = rng.next_uniform(range);
    } else if (spec.name.size() >= 5 &&
               spec.name.compare(spec.name.size() - 5, 5, ".ln.g") == 0) {
      for (int64_t i = 0; i < t.numel(); i++) t[i] = 1.f;
    }
    // remaining rank-1 tensors (biases, layer-norm shifts) start at zero
    out.emplace(spec.name, std::move(t));
  }
  return out;
}

std::string ValidateResult::summary() const {
  if (ok()) return "ok";
  std::string s;
  for (const auto& m : missing) s += "missing: " + m + "\n";
  for (const auto& e : extra) s += "extra: " + e + "\n";
  for (const auto& m : mismatched) s += m + "\n";
  if (!s.empty()) s.pop_back();
  return s;
}

ValidateResult validate_weights(const TensorMap& weights, const PipelineConfig& cfg) {
  ValidateResult res;
  const std::vector<TensorSpec> manifest = build_manifest(cfg);
  std::map<std::string, const TensorSpec*> by_name;
  for (const TensorSpec& s : manifest) by_name[s.name] = &s;

  for (const TensorSpec& s : manifest) {
    auto it = weights.find(s.name);
    if (it == weights.end()) {
      res.missing.push_back(s.name);
      continue;
    }
    if (it->second.dims() != s.dims) {
      Tensor want(s.dims);
      res.mismatched.push_back("shape mismatch: " + s.name + " is " +
                               it->second.shape_str() + ", expected " + want.shape_str());
    }
  }
  for (const auto& [name, t] : weights)
    if (!by_name.count(name)) res.extra.push_back(name);

  auto fp = weights.find("meta.config_fp");
  if (fp != weights.end() && fp->second.numel() == 4) {
    const uint64_t got = fingerprint_from_chunks(fp->second.data());
    const uint64_t want = cfg.fingerprint();
    if (got != want)
      res.mismatched.push_back("config fingerprint mismatch: weights carry " +
                               format_fingerprint(got) + ", config is " +
                               format_fingerprint(want));
  }
  return res;
}

}  // namespace melstream
