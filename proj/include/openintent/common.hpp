#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace openintent {

using json = nlohmann::json;

/// Error categories. The service maps these onto HTTP status classes and the
/// CLI onto exit codes, so pick the kind by who is at fault, not by module.
enum class ErrorKind {
  invalid_argument,  // caller supplied bad input (400 / exit 1)
  not_found,         // unknown id, missing file (404 / exit 1)
  conflict,          // state does not permit the request (409 / exit 1)
  not_implemented,   // registered method without an implementation
  numerical,         // NaN loss, non-convergence
  io,                // filesystem failure (500 / exit 2)
  cancelled,         // run stopped at a step boundary
  internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

/// True for errors the user can fix by changing their input.
bool is_user_error(ErrorKind kind);

// ---------------------------------------------------------------------------
// Seeded randomness. std distributions are implementation-defined, so the
// helpers below draw directly from the engine to keep runs bit-stable across
// standard libraries.
// ---------------------------------------------------------------------------
using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, n > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Standard normal via Box-Muller (one value per call).
double standard_normal(Rng& rng);

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Derive an independent stream seed from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

std::string read_file(const std::string& path);

// ---------------------------------------------------------------------------
// JSON helpers for Eigen values.
// ---------------------------------------------------------------------------
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

/// Throws invalid_argument naming the first key of `object` not in `allowed`.
void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

bool all_finite(const Eigen::MatrixXd& m);

/// Squared Euclidean distance between row `i` of `a` and row `j` of `b`.
inline double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                               Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace openintent
