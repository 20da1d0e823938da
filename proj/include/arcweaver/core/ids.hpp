#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace arcweaver {

// 64-bit FNV-1a. Stable across platforms; used for derived ids and for the
// mock embedding seeds.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t& state);

// 128-bit identifiers rendered as 32 lowercase hex digits. Random mode draws
// from std::random_device; derived mode hashes a caller-supplied context
// string so that offline runs produce identical stores.
class IdGenerator {
 public:
  enum class Mode { Random, Derived };

  explicit IdGenerator(Mode mode = Mode::Random);

  Mode mode() const { return mode_; }

  // `context` must describe the entity uniquely in derived mode, e.g.
  // "arc|Mercy Harbor|S01E02|3".
  std::string next(std::string_view context);

  // Retries with a salted context until `taken` reports the id free.
  std::string next_unique(std::string_view context,
                          const std::function<bool(const std::string&)>& taken);

 private:
  Mode mode_;
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

std::string hex128(std::uint64_t hi, std::uint64_t lo);

}  // namespace arcweaver
