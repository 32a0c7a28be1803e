#include "ava/tqr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ava/errors.hpp"

namespace ava::tqr {

namespace {

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const char* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return bits;
}

void append_values(std::string& out, const NamedArray& a) {
  for (double v : a.values) {
    if (a.dtype == DType::f32) {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

}  // namespace

std::string to_string(DType t) { return t == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw FormatError("unknown dtype '" + name + "'");
}

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

const NamedArray& Checkpoint::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw FormatError("checkpoint has no array '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : ckpt.arrays) {
    if (grad::numel(a.shape) != a.values.size()) {
      throw ShapeError("array '" + a.name + "' does not match its shape");
    }
    const std::size_t bytes = a.values.size() * dtype_size(a.dtype);
    entries.push_back({{"name", a.name},
                       {"shape", a.shape},
                       {"dtype", to_string(a.dtype)},
                       {"offset", offset},
                       {"bytes", bytes}});
    offset += bytes;
  }
  const nlohmann::json manifest = {{"format", "TQR1"}, {"config", ckpt.config}, {"arrays", entries}};
  const std::string text = manifest.dump();

  std::string out(kCheckpointMagic, 4);
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  for (const auto& a : ckpt.arrays) append_values(out, a);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a TQR1 checkpoint (bad magic header)");
  }
  const auto manifest_size = get_le<std::uint64_t>(bytes.data() + 4);
  if (manifest_size > bytes.size() - 12) throw FormatError("checkpoint manifest is truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(12, manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  const std::size_t base = 12 + manifest_size;
  std::size_t expected_offset = 0;
  try {
    if (manifest.at("format") != "TQR1") throw FormatError("unsupported checkpoint format");
    ckpt.config = manifest.at("config");
    for (const auto& e : manifest.at("arrays")) {
      NamedArray a;
      a.name = e.at("name").get<std::string>();
      a.shape = e.at("shape").get<grad::Shape>();
      a.dtype = parse_dtype(e.at("dtype").get<std::string>());
      const auto offset = e.at("offset").get<std::size_t>();
      const auto nbytes = e.at("bytes").get<std::size_t>();
      const std::size_t width = dtype_size(a.dtype);
      if (offset != expected_offset || nbytes != grad::numel(a.shape) * width) {
        throw FormatError("array '" + a.name + "' has an inconsistent manifest entry");
      }
      if (base + offset + nbytes > bytes.size()) throw FormatError("array '" + a.name + "' is truncated");
      a.values.resize(grad::numel(a.shape));
      const char* p = bytes.data() + base + offset;
      for (std::size_t i = 0; i < a.values.size(); ++i, p += width) {
        a.values[i] = a.dtype == DType::f32 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                                            : std::bit_cast<double>(get_le<std::uint64_t>(p));
      }
      expected_offset = offset + nbytes;
      ckpt.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  if (base + expected_offset != bytes.size()) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

template <typename T>
Checkpoint make_checkpoint(const TQRModel<T>& model, const nlohmann::json& extra) {
  Checkpoint ckpt;
  ckpt.config = extra.is_object() ? extra : nlohmann::json::object();
  ckpt.config["model"] = to_json(model.config());
  const auto& p = model.parameters();
  for (std::size_t i = 0; i < p.count(); ++i) {
    const auto& a = p.arrays[i];
    ckpt.arrays.push_back({p.names[i], a.shape, dtype_of<T>(), std::vector<double>(a.data.begin(), a.data.end())});
  }
  return ckpt;
}

namespace {

template <typename T>
Parameters<T> parameters_from(const Checkpoint& ckpt) {
  Parameters<T> p;
  for (const auto& a : ckpt.arrays) {
    std::vector<T> data(a.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(a.values[i]);
    p.add(a.name, Array<T>(a.shape, std::move(data)));
  }
  return p;
}

ModelConfig saved_config(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("model")) throw FormatError("checkpoint config has no model section");
  try {
    return model_config_from_json(ckpt.config.at("model"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint model config: ") + e.what());
  }
}

}  // namespace

template <typename T>
TQRModel<T> model_from_checkpoint(const Checkpoint& ckpt) {
  return TQRModel<T>(saved_config(ckpt), parameters_from<T>(ckpt));
}

template <typename T>
TQRModel<T> load_pretrained(const Checkpoint& ckpt, const ModelConfig& requested) {
  const ModelConfig saved = saved_config(ckpt);
  if (!saved.same_architecture(requested)) {
    throw FormatError("checkpoint architecture " + to_json(saved).dump() + " does not match requested " +
                      to_json(requested).dump());
  }
  return TQRModel<T>(requested, parameters_from<T>(ckpt));
}

template Checkpoint make_checkpoint(const TQRModel<float>&, const nlohmann::json&);
template Checkpoint make_checkpoint(const TQRModel<double>&, const nlohmann::json&);
template TQRModel<float> model_from_checkpoint(const Checkpoint&);
template TQRModel<double> model_from_checkpoint(const Checkpoint&);
template TQRModel<float> load_pretrained(const Checkpoint&, const ModelConfig&);
template TQRModel<double> load_pretrained(const Checkpoint&, const ModelConfig&);

}  // namespace ava::tqr
