#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <string>

#include "meanba/archive.hpp"
#include "meanba/rng.hpp"
#include "meanba/tensor.hpp"

using namespace meanba;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("meanba_test_" + name);
}

template <typename T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST_CASE("tensor shapes are validated") {
  CHECK_THROWS_AS(Tensor3<float>(0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(Tensor3<float>(1, 2, 2, std::vector<float>(3)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor4<double>(1, 1, 1, 0), std::invalid_argument);
  Tensor4<double> t(2, 3, 4, 5);
  CHECK(t.size() == 120);
  CHECK(t.index(1, 2, 3, 4) == 119);
}

TEST_CASE("mean_over_channels") {
  SUBCASE("single channel is unchanged") {
    Rng rng(1);
    Tensor3<float> x(2, 1, 5);
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-3, 3));
    CHECK(mean_over_channels(x) == x);
  }
  SUBCASE("constant channels") {
    Tensor3<double> x(2, 4, 3);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t d = 0; d < 4; ++d)
        for (std::size_t l = 0; l < 3; ++l) x(b, d, l) = 0.1 * static_cast<double>(b * 3 + l);
    const auto m = mean_over_channels(x);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 0; l < 3; ++l) CHECK(m(b, 0, l) == x(b, 0, l));
  }
  SUBCASE("hand sum") {
    Tensor3<double> x(1, 3, 1, std::vector<double>{1.0, 2.0, 6.0});
    CHECK(mean_over_channels(x)(0, 0, 0) == 3.0);
  }
  SUBCASE("rank 4 matches a per-element loop") {
    Rng rng(2);
    Tensor4<float> x(2, 5, 3, 4);
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
    const auto m = mean_over_channels(x);
    CHECK(m.channels() == 1);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t n = 0; n < 4; ++n) {
          double s = 0;
          for (std::size_t d = 0; d < 5; ++d) s += x(b, d, l, n);
          CHECK(m(b, 0, l, n) == doctest::Approx(s / 5).epsilon(1e-6));
        }
  }
  SUBCASE("idempotent after the first application") {
    Rng rng(3);
    Tensor3<double> x(3, 7, 4);
    for (auto& v : x.data()) v = rng.uniform(-1, 1);
    const auto once = mean_over_channels(x);
    CHECK(mean_over_channels(once) == once);
  }
}

TEST_CASE("broadcast_channels") {
  Tensor3<float> one(1, 1, 1, std::vector<float>{3.0f});
  CHECK(broadcast_channels(one, 1) == one);
  const auto four = broadcast_channels(one, 4);
  CHECK(four.values() == std::vector<float>{3.0f, 3.0f, 3.0f, 3.0f});
  CHECK_THROWS_AS(broadcast_channels(four, 2), std::invalid_argument);

  SUBCASE("mean after broadcast is the identity on D=1 tensors") {
    Rng rng(4);
    Tensor3<float> x(2, 1, 6);
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-5, 5));
    for (std::size_t d : {1u, 2u, 7u, 64u}) CHECK(mean_over_channels(broadcast_channels(x, d)) == x);
  }
  SUBCASE("broadcast of the mean restores constant-channel tensors") {
    Tensor3<double> x(1, 3, 2);
    for (std::size_t d = 0; d < 3; ++d) {
      x(0, d, 0) = 1.25;
      x(0, d, 1) = -7.5;
    }
    CHECK(broadcast_channels(mean_over_channels(x), 3) == x);
  }
}

TEST_CASE("archive: empty set round trips") {
  const auto bytes = archive_encode({});
  CHECK(std::string(bytes.begin(), bytes.end()) == "MEANBA-ARCHIVE 1\nEND\n");
  CHECK(archive_decode(bytes).empty());
}

TEST_CASE("archive: one f32 (2,2) tensor has a 16-byte payload") {
  TensorSet set{NamedTensor::from("w", {2, 2}, std::vector<float>{1, 2, 3, 4})};
  const auto bytes = archive_encode(set);
  const std::string header = "MEANBA-ARCHIVE 1\nw f32 2 2 2\nEND\n";
  REQUIRE(bytes.size() == header.size() + 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
  // 1.0f little-endian
  CHECK(static_cast<unsigned char>(bytes[header.size() + 3]) == 0x3f);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 2]) == 0x80);
}

TEST_CASE("archive: random tensor sets round trip bitwise through a file") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    TensorSet set;
    const std::size_t count = 3;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<std::size_t> shape;
      const std::size_t rank = 1 + rng.below(4);
      std::size_t n = 1;
      for (std::size_t r = 0; r < rank; ++r) {
        shape.push_back(1 + rng.below(5));
        n *= shape.back();
      }
      const std::string name = "t" + std::to_string(trial) + "." + std::to_string(i);
      if (rng.below(2) == 0) {
        std::vector<float> v(n);
        for (auto& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(rng.bits()) & 0x7f7fffffu);
        set.push_back(NamedTensor::from(name, shape, v));
      } else {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-1e6, 1e6);
        set.push_back(NamedTensor::from(name, shape, v));
      }
    }
    const auto path = temp_file("roundtrip.mta");
    archive_write(set, path);
    const auto back = archive_read(path);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(back[i].name == set[i].name);
      CHECK(back[i].shape == set[i].shape);
      REQUIRE(back[i].dtype() == set[i].dtype());
      if (set[i].dtype() == DType::f32)
        CHECK(bitwise_equal(std::get<0>(back[i].data), std::get<0>(set[i].data)));
      else
        CHECK(bitwise_equal(std::get<1>(back[i].data), std::get<1>(set[i].data)));
    }
    std::filesystem::remove(path);
  }
}

TEST_CASE("archive: each failure has its own error code") {
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const ArchiveError& e) {
      return e.code();
    }
    FAIL("expected ArchiveError");
    return ArchiveErrc::io_error;
  };
  TensorSet set{NamedTensor::from("a", {3}, std::vector<double>{1, 2, 3})};
  const auto good = archive_encode(set);

  SUBCASE("duplicate names on write and read") {
    TensorSet dup{set[0], set[0]};
    CHECK(code_of([&] { archive_encode(dup); }) == ArchiveErrc::duplicate_name);
    const std::string text = "MEANBA-ARCHIVE 1\na f64 1 1\na f64 1 1\nEND\n" + std::string(16, '\0');
    CHECK(code_of([&] { archive_decode({text.begin(), text.end()}); }) == ArchiveErrc::duplicate_name);
  }
  SUBCASE("malformed manifest") {
    for (std::string text : {"NOPE\nEND\n", "MEANBA-ARCHIVE 1\na f16 1 3\nEND\n", "MEANBA-ARCHIVE 1\na f64 2 3\nEND\n",
                             "MEANBA-ARCHIVE 1\na f64 1 x\nEND\n", "MEANBA-ARCHIVE 1\na f64 1 3"}) {
      CHECK(code_of([&] { archive_decode({text.begin(), text.end()}); }) == ArchiveErrc::malformed_manifest);
    }
  }
  SUBCASE("truncated payload") {
    auto cut = good;
    cut.pop_back();
    CHECK(code_of([&] { archive_decode(cut); }) == ArchiveErrc::truncated_payload);
  }
  SUBCASE("trailing bytes") {
    auto extra = good;
    extra.push_back('x');
    CHECK(code_of([&] { archive_decode(extra); }) == ArchiveErrc::trailing_data);
  }
  SUBCASE("invalid names") {
    TensorSet bad{NamedTensor::from("has space", {1}, std::vector<float>{1})};
    CHECK(code_of([&] { archive_encode(bad); }) == ArchiveErrc::invalid_name);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { archive_read(temp_file("does-not-exist.mta")); }) == ArchiveErrc::io_error);
  }
}

TEST_CASE("archive: converting accessors") {
  Tensor3<float> t(1, 2, 3);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(i) * 0.5f;
  const auto named = NamedTensor::from("t", t);
  CHECK(named.as_tensor3<float>() == t);
  CHECK(named.as_tensor3<double>()(0, 1, 2) == 2.5);
  CHECK_THROWS_AS(named.as_tensor4<float>(), std::invalid_argument);
}
