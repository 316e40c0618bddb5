#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>

#include "unispace/core/ids.hpp"
#include "unispace/core/model.hpp"

namespace uni::testing {

inline IdGenerator seeded(std::uint8_t n) {
  std::array<std::uint8_t, 32> seed{};
  seed.fill(n);
  Uuid u{};
  u.hi = 0x1000 + n;
  u.lo = 0x8000000000000000ull + n;
  return IdGenerator(DomainId{u}, seed);
}

inline PersonCard card(const std::string& name) {
  PersonCard c;
  c.sign.name = name;
  c.sign.ctype = ConceptualType::Person;
  return c;
}

/// Fresh scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("unispace-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace uni::testing
