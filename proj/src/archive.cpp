#include "meanba/archive.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace meanba {

namespace {

constexpr std::string_view kMagic = "MEANBA-ARCHIVE 1";
constexpr std::string_view kSentinel = "END";

template <typename U>
U byteswap_uint(U v) {
  U out = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out = static_cast<U>((out << 8) | (v & 0xff));
    v >>= 8;
  }
  return out;
}

template <typename T>
void append_le(std::vector<char>& out, const std::vector<T>& values) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  char* dst = out.data() + start;
  for (std::size_t i = 0; i < values.size(); ++i) {
    U bits = std::bit_cast<U>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap_uint(bits);
    std::memcpy(dst + i * sizeof(T), &bits, sizeof(T));
  }
}

template <typename T>
std::vector<T> read_le(const char* src, std::size_t count) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    U bits;
    std::memcpy(&bits, src + i * sizeof(T), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) bits = byteswap_uint(bits);
    values[i] = std::bit_cast<T>(bits);
  }
  return values;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) tokens.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::size_t parse_dim(const std::string& tok, const std::string& line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ArchiveError(ArchiveErrc::malformed_manifest, "bad integer in line '" + line + "'");
  return v;
}

std::size_t checked_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) {
    if (s != 0 && n > SIZE_MAX / s)
      throw ArchiveError(ArchiveErrc::malformed_manifest, "shape overflows");
    n *= s;
  }
  return n;
}

}  // namespace

const char* to_string(ArchiveErrc e) {
  switch (e) {
    case ArchiveErrc::io_error: return "io_error";
    case ArchiveErrc::malformed_manifest: return "malformed_manifest";
    case ArchiveErrc::truncated_payload: return "truncated_payload";
    case ArchiveErrc::duplicate_name: return "duplicate_name";
    case ArchiveErrc::trailing_data: return "trailing_data";
    case ArchiveErrc::invalid_name: return "invalid_name";
  }
  return "unknown";
}

std::size_t NamedTensor::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

template <typename T>
std::vector<T> NamedTensor::values_as() const {
  return std::visit(
      [](const auto& v) {
        std::vector<T> out(v.size());
        std::transform(v.begin(), v.end(), out.begin(), [](auto x) { return static_cast<T>(x); });
        return out;
      },
      data);
}

template <typename T>
Tensor3<T> NamedTensor::as_tensor3() const {
  if (shape.size() != 3) throw std::invalid_argument("tensor '" + name + "' is not rank 3");
  return Tensor3<T>(shape[0], shape[1], shape[2], values_as<T>());
}

template <typename T>
Tensor4<T> NamedTensor::as_tensor4() const {
  if (shape.size() != 4) throw std::invalid_argument("tensor '" + name + "' is not rank 4");
  return Tensor4<T>(shape[0], shape[1], shape[2], shape[3], values_as<T>());
}

template std::vector<float> NamedTensor::values_as<float>() const;
template std::vector<double> NamedTensor::values_as<double>() const;
template Tensor3<float> NamedTensor::as_tensor3<float>() const;
template Tensor3<double> NamedTensor::as_tensor3<double>() const;
template Tensor4<float> NamedTensor::as_tensor4<float>() const;
template Tensor4<double> NamedTensor::as_tensor4<double>() const;

bool valid_tensor_name(const std::string& name) {
  if (name.empty()) return false;
  for (unsigned char c : name)
    if (c <= 0x20 || c == 0x7f) return false;
  return true;
}

std::vector<char> archive_encode(const TensorSet& tensors) {
  std::set<std::string> seen;
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  for (const auto& t : tensors) {
    if (!valid_tensor_name(t.name))
      throw ArchiveError(ArchiveErrc::invalid_name, "'" + t.name + "'");
    if (!seen.insert(t.name).second) throw ArchiveError(ArchiveErrc::duplicate_name, t.name);
    if (checked_product(t.shape) != t.element_count())
      throw std::invalid_argument("tensor '" + t.name + "': shape does not match data length");
    manifest << t.name << ' ' << dtype_name(t.dtype()) << ' ' << t.shape.size();
    for (auto s : t.shape) manifest << ' ' << s;
    manifest << '\n';
  }
  manifest << kSentinel << '\n';

  const std::string header = manifest.str();
  std::vector<char> out(header.begin(), header.end());
  for (const auto& t : tensors)
    std::visit([&](const auto& v) { append_le(out, v); }, t.data);
  return out;
}

TensorSet archive_decode(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), '\n');
    if (nl == bytes.end())
      throw ArchiveError(ArchiveErrc::malformed_manifest, "manifest is not newline terminated");
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(pos), nl);
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    return line;
  };

  if (next_line() != kMagic) throw ArchiveError(ArchiveErrc::malformed_manifest, "bad magic line");

  struct Entry {
    std::string name;
    DType dtype;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  for (;;) {
    std::string line = next_line();
    if (line == kSentinel) break;
    auto tok = split_ws(line);
    if (tok.size() < 3) throw ArchiveError(ArchiveErrc::malformed_manifest, "short line '" + line + "'");
    Entry e;
    e.name = tok[0];
    if (!valid_tensor_name(e.name)) throw ArchiveError(ArchiveErrc::malformed_manifest, "bad name");
    if (tok[1] == "f32")
      e.dtype = DType::f32;
    else if (tok[1] == "f64")
      e.dtype = DType::f64;
    else
      throw ArchiveError(ArchiveErrc::malformed_manifest, "unknown dtype '" + tok[1] + "'");
    const std::size_t rank = parse_dim(tok[2], line);
    if (tok.size() != 3 + rank)
      throw ArchiveError(ArchiveErrc::malformed_manifest, "rank does not match dims in '" + line + "'");
    for (std::size_t i = 0; i < rank; ++i) e.shape.push_back(parse_dim(tok[3 + i], line));
    if (!seen.insert(e.name).second) throw ArchiveError(ArchiveErrc::duplicate_name, e.name);
    entries.push_back(std::move(e));
  }

  TensorSet out;
  out.reserve(entries.size());
  for (auto& e : entries) {
    const std::size_t count = checked_product(e.shape);
    const std::size_t nbytes = count * dtype_size(e.dtype);
    if (bytes.size() - pos < nbytes)
      throw ArchiveError(ArchiveErrc::truncated_payload, "payload for '" + e.name + "' is short");
    NamedTensor t{e.name, e.shape, {}};
    if (e.dtype == DType::f32)
      t.data = read_le<float>(bytes.data() + pos, count);
    else
      t.data = read_le<double>(bytes.data() + pos, count);
    pos += nbytes;
    out.push_back(std::move(t));
  }
  if (pos != bytes.size())
    throw ArchiveError(ArchiveErrc::trailing_data, std::to_string(bytes.size() - pos) + " extra bytes");
  return out;
}

void archive_write(const TensorSet& tensors, const std::filesystem::path& path) {
  const auto bytes = archive_encode(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArchiveError(ArchiveErrc::io_error, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ArchiveError(ArchiveErrc::io_error, "write failed for " + path.string());
}

TensorSet archive_read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArchiveError(ArchiveErrc::io_error, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return archive_decode(bytes);
}

const NamedTensor* find_tensor(const TensorSet& set, const std::string& name) {
  for (const auto& t : set)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& require_tensor(const TensorSet& set, const std::string& name) {
  if (const auto* t = find_tensor(set, name)) return *t;
  throw std::invalid_argument("archive has no tensor named '" + name + "'");
}

}  // namespace meanba
