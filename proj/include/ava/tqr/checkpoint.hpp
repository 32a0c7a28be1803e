#pragma once

// "TQR1" container: 4-byte magic, uint64 little-endian manifest size, JSON
// manifest {"format", "config", "arrays": [{name, shape, dtype, offset,
// bytes}]}, then the raw little-endian array data.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ava/tqr/model.hpp"

namespace ava::tqr {

inline constexpr char kCheckpointMagic[4] = {'T', 'Q', 'R', '1'};

enum class DType { f32, f64 };

std::string to_string(DType t);
DType parse_dtype(const std::string& name);
std::size_t dtype_size(DType t);

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::f32 : DType::f64;
}

// Values are held as double so one container serves both precisions; an f32
// array only ever holds values that are exactly representable as float.
struct NamedArray {
  std::string name;
  grad::Shape shape;
  DType dtype = DType::f64;
  std::vector<double> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on a bad magic, malformed manifest, truncated array
// (named in the message) or trailing bytes.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// config["model"] holds the model config; `extra` keys are merged in.
template <typename T>
Checkpoint make_checkpoint(const TQRModel<T>& model, const nlohmann::json& extra = nlohmann::json::object());

// Rebuilds the model exactly as saved.
template <typename T>
TQRModel<T> model_from_checkpoint(const Checkpoint& ckpt);

// Loads saved weights under a requested config. Shape-fixing fields must
// match (FormatError otherwise); head-mode and temperature fields come from
// `requested`.
template <typename T>
TQRModel<T> load_pretrained(const Checkpoint& ckpt, const ModelConfig& requested);

}  // namespace ava::tqr
