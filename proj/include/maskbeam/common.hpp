#ifndef MASKBEAM_COMMON_HPP
#define MASKBEAM_COMMON_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace maskbeam {

// Base error for everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: shape mismatch, malformed file, invalid config. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-finite loss, Cholesky breakdown. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// I/O failure: unreadable or unwritable path. CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, used for config digests and per-utterance seed derivation.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Each index owns
// its output slot, so results are schedule-independent; callers do any
// cross-index reduction afterwards in a fixed order. jobs <= 0 means one
// worker per hardware thread.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

int resolve_jobs(int jobs);

}  // namespace maskbeam

#endif  // MASKBEAM_COMMON_HPP
