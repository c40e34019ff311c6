#pragma once

#include <cstdint>
#include <mutex>
#include <string>

#include "openintent/common.hpp"

namespace openintent {

/// 26-character Crockford base32 ids: 48-bit millisecond time then 80 random
/// bits. Ids from one generator are strictly increasing, also within a
/// millisecond.
class UlidGenerator {
 public:
  UlidGenerator();
  explicit UlidGenerator(std::uint64_t seed);

  std::string next();
  std::string next(std::uint64_t unix_ms);

 private:
  std::mutex mutex_;
  Rng rng_;
  std::uint64_t last_ms_ = 0;
  std::uint16_t rand_hi_ = 0;  // top 16 of the 80 random bits
  std::uint64_t rand_lo_ = 0;  // low 64
};

/// Checks length and alphabet.
bool is_valid_ulid(std::string_view id);

}  // namespace openintent
