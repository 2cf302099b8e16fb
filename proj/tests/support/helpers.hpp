#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "foodclf/error.hpp"

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("foodclf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

/// Checks that `expr` throws foodclf::Error carrying `expected_code`.
#define CHECK_ERROR_CODE(expr, expected_code)                     \
  do {                                                            \
    bool thrown_ = false;                                         \
    try {                                                         \
      (void)(expr);                                               \
    } catch (const foodclf::Error& e_) {                          \
      thrown_ = true;                                             \
      CHECK_MESSAGE(e_.code() == (expected_code), e_.what());     \
    }                                                             \
    CHECK_MESSAGE(thrown_, "expected foodclf::Error from " #expr); \
  } while (false)
