#include "openintent/service/ulid.hpp"

#include <chrono>
#include <random>

namespace openintent {

namespace {
constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
}

UlidGenerator::UlidGenerator() : rng_(std::random_device{}()) {}
UlidGenerator::UlidGenerator(std::uint64_t seed) : rng_(seed) {}

std::string UlidGenerator::next() {
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  return next(static_cast<std::uint64_t>(now));
}

std::string UlidGenerator::next(std::uint64_t unix_ms) {
  std::lock_guard lock(mutex_);
  if (unix_ms > last_ms_) {
    last_ms_ = unix_ms;
    rand_hi_ = static_cast<std::uint16_t>(rng_() & 0x7fff);  // leave headroom for increments
    rand_lo_ = rng_();
  } else {
    // Same (or earlier) millisecond: keep the previous time and count up.
    if (++rand_lo_ == 0) ++rand_hi_;
  }
  // 128 bits: time (48) | hi (16) | lo (64), rendered as 26 base32 digits.
  std::string out(26, '0');
  const unsigned __int128 value = (static_cast<unsigned __int128>(last_ms_ & 0xffffffffffffULL) << 80) |
                                  (static_cast<unsigned __int128>(rand_hi_) << 64) | rand_lo_;
  unsigned __int128 v = value;
  for (int i = 25; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kAlphabet[static_cast<unsigned>(v & 31)];
    v >>= 5;
  }
  return out;
}

bool is_valid_ulid(std::string_view id) {
  if (id.size() != 26) return false;
  for (char c : id)
    if (std::string_view(kAlphabet).find(c) == std::string_view::npos) return false;
  return id[0] <= '7';
}

}  // namespace openintent
