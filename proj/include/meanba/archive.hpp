#pragma once

// Tensor archive: a plain-text manifest followed by raw little-endian payload.
//
//   MEANBA-ARCHIVE 1\n
//   <name> <f32|f64> <rank> <dim_0> ... <dim_{rank-1}>\n     (one line per tensor)
//   END\n
//   <payload: tensors concatenated in manifest order>
//
// See docs/archive-format.md for the full description.

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "meanba/tensor.hpp"

namespace meanba {

enum class ArchiveErrc {
  io_error,
  malformed_manifest,
  truncated_payload,
  duplicate_name,
  trailing_data,
  invalid_name,
};

const char* to_string(ArchiveErrc e);

class ArchiveError : public std::runtime_error {
 public:
  ArchiveError(ArchiveErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ArchiveErrc code() const { return code_; }

 private:
  ArchiveErrc code_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  DType dtype() const { return data.index() == 0 ? DType::f32 : DType::f64; }
  std::size_t element_count() const;

  template <typename T>
  static NamedTensor from(std::string name, const Tensor3<T>& t) {
    return {std::move(name), {t.batch(), t.channels(), t.length()}, t.values()};
  }
  template <typename T>
  static NamedTensor from(std::string name, const Tensor4<T>& t) {
    return {std::move(name), {t.batch(), t.channels(), t.length(), t.state()}, t.values()};
  }
  template <typename T>
  static NamedTensor from(std::string name, std::vector<std::size_t> shape, std::vector<T> values) {
    return {std::move(name), std::move(shape), std::move(values)};
  }

  // Converting accessors; f32 <-> f64 conversion is applied when needed.
  template <typename T>
  std::vector<T> values_as() const;
  template <typename T>
  Tensor3<T> as_tensor3() const;
  template <typename T>
  Tensor4<T> as_tensor4() const;

  bool operator==(const NamedTensor&) const = default;
};

using TensorSet = std::vector<NamedTensor>;

// Names must be non-empty and contain no whitespace or control characters.
bool valid_tensor_name(const std::string& name);

std::vector<char> archive_encode(const TensorSet& tensors);
TensorSet archive_decode(const std::vector<char>& bytes);

void archive_write(const TensorSet& tensors, const std::filesystem::path& path);
TensorSet archive_read(const std::filesystem::path& path);

const NamedTensor* find_tensor(const TensorSet& set, const std::string& name);
const NamedTensor& require_tensor(const TensorSet& set, const std::string& name);

}  // namespace meanba
