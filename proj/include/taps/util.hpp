#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taps {

// Base error for anything raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Collapses interior whitespace runs to a single space and trims the ends.
std::string collapse_ws(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Case/underscore-insensitive key for matching names like GET_FLIGHTS
// against GetFlights.
std::string loose_name_key(std::string_view name);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string sha256_hex(std::string_view data);

// Deterministic RNG with stable cross-platform draws. std::mt19937_64
// supplies the stream; bounded draws avoid std::uniform_int_distribution,
// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). Rejection-sampled, n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  // Uniform in [0, 1).
  double uniform_real();

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    if (items.empty()) throw Error("Rng::pick on empty list");
    return items[static_cast<std::size_t>(uniform_int(items.size()))];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace taps
