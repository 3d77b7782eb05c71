#pragma once

// Checkpoint container.
//
// Layout (all integers little-endian):
//   8 bytes   magic "ATTACKPT"
//   u32       format version (1)
//   u64       header length H, then H bytes of UTF-8 JSON
//   u32       tensor count T, then T records of
//               u32 name length, name bytes,
//               u64 rows, u64 cols, rows*cols IEEE-754 f64 in row-major order
//
// The JSON header always carries "network" (the NetworkSpec); writers add
// whatever else they need (prototype version, anchor indices, config hash).

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "atta/model/network.hpp"

namespace atta {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'A', 'T', 'T', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.value;
    throw SchemaError("checkpoint: missing tensor '" + name + "'");
  }
  bool has_tensor(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return true;
    return false;
  }
};

inline nlohmann::json spec_to_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim},
          {"extractor_widths", s.extractor_widths},
          {"classifier_hidden", s.classifier_hidden},
          {"discriminator_hidden", s.discriminator_hidden},
          {"discriminator_bn_layer", s.discriminator_bn_layer},
          {"num_classes", s.num_classes},
          {"num_conditions", s.num_conditions}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  try {
    NetworkSpec s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.extractor_widths = j.at("extractor_widths").get<std::vector<std::size_t>>();
    s.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
    s.discriminator_hidden = j.at("discriminator_hidden").get<std::vector<std::size_t>>();
    s.discriminator_bn_layer = j.at("discriminator_bn_layer").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.num_conditions = j.at("num_conditions").get<std::size_t>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: bad network spec: ") + e.what());
  }
}

inline void append_mlp_tensors(const Mlp& mlp, const std::string& prefix,
                               std::vector<NamedTensor>& out) {
  for (std::size_t i = 0; i < mlp.layers().size(); ++i) {
    const DenseLayer& l = mlp.layers()[i];
    const std::string p = prefix + "." + std::to_string(i) + ".";
    out.push_back({p + "weight", l.weight});
    out.push_back({p + "bias", l.bias});
    if (l.batch_norm) {
      out.push_back({p + "gamma", l.gamma});
      out.push_back({p + "beta", l.beta});
      out.push_back({p + "running_mean", l.stats.running_mean});
      out.push_back({p + "running_var", l.stats.running_var});
    }
  }
}

inline std::vector<NamedTensor> named_tensors(const NetworkParams& params) {
  std::vector<NamedTensor> out;
  append_mlp_tensors(params.extractor, "extractor", out);
  append_mlp_tensors(params.classifier, "classifier", out);
  if (params.discriminator) append_mlp_tensors(*params.discriminator, "discriminator", out);
  return out;
}

namespace detail {
inline void fill_mlp(Mlp& mlp, const std::string& prefix, const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < mlp.layers().size(); ++i) {
    DenseLayer& l = mlp.layers()[i];
    const std::string p = prefix + "." + std::to_string(i) + ".";
    auto take = [&](const std::string& name, Matrix& dst) {
      const Matrix& src = ckpt.tensor(p + name);
      if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
        throw SchemaError("checkpoint: tensor '" + p + name + "' has shape " + shape_str(src) +
                          ", expected " + shape_str(dst));
      }
      dst = src;
    };
    take("weight", l.weight);
    take("bias", l.bias);
    if (l.batch_norm) {
      take("gamma", l.gamma);
      take("beta", l.beta);
      take("running_mean", l.stats.running_mean);
      take("running_var", l.stats.running_var);
    }
  }
}
}  // namespace detail

/// Rebuilds parameters from the header spec and named tensors. The
/// discriminator is restored only if its tensors are present.
inline NetworkParams params_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.header.contains("network")) throw SchemaError("checkpoint: header lacks 'network'");
  NetworkParams p = init_network(spec_from_json(ckpt.header.at("network")), 0);
  detail::fill_mlp(p.extractor, "extractor", ckpt);
  detail::fill_mlp(p.classifier, "classifier", ckpt);
  if (ckpt.has_tensor("discriminator.0.weight")) {
    detail::fill_mlp(*p.discriminator, "discriminator", ckpt);
  } else {
    p.discriminator.reset();
  }
  return p;
}

namespace detail {
template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw SchemaError("checkpoint: truncated data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = ckpt.header.dump();
  detail::put<std::uint64_t>(out, header.size());
  out += header;
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    out.append(reinterpret_cast<const char*>(t.value.data()),
               static_cast<std::size_t>(t.value.size()) * sizeof(double));
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view data) {
  detail::Reader r(data);
  if (r.bytes(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, 8)) {
    throw SchemaError("checkpoint: bad magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw SchemaError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto header_len = r.get<std::uint64_t>();
  try {
    ckpt.header = nlohmann::json::parse(r.bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: bad header: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = std::string(r.bytes(r.get<std::uint32_t>()));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    auto raw = r.bytes(rows * cols * sizeof(double));
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::memcpy(t.value.data(), raw.data(), raw.size());
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw SchemaError("checkpoint: trailing bytes");
  return ckpt;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing '" + path + "'");
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

/// Byte snapshot of a parameter set (network spec + tensors).
inline std::string snapshot(const NetworkParams& params) {
  Checkpoint c;
  c.header["network"] = spec_to_json(params.spec);
  c.tensors = named_tensors(params);
  return encode_checkpoint(c);
}

inline NetworkParams restore(std::string_view bytes) {
  return params_from_checkpoint(decode_checkpoint(bytes));
}

}  // namespace atta
