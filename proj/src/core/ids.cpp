#include "arcweaver/core/ids.hpp"

#include <cstdio>

namespace arcweaver {

std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string hex128(std::uint64_t hi, std::uint64_t lo) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

IdGenerator::IdGenerator(Mode mode) : mode_(mode) {
  if (mode_ == Mode::Random) {
    std::random_device device;
    std::seed_seq seq{device(), device(), device(), device()};
    rng_.seed(seq);
  }
}

std::string IdGenerator::next(std::string_view context) {
  if (mode_ == Mode::Derived) {
    std::uint64_t a = fnv1a64(context);
    std::uint64_t b = fnv1a64(context, 0x84222325cbf29ce4ULL);
    return hex128(splitmix64(a), splitmix64(b));
  }
  std::lock_guard lock(mutex_);
  std::uint64_t hi = rng_();
  std::uint64_t lo = rng_();
  return hex128(hi, lo);
}

std::string IdGenerator::next_unique(std::string_view context,
                                     const std::function<bool(const std::string&)>& taken) {
  std::string id = next(context);
  for (int salt = 1; taken(id); ++salt) {
    id = next(std::string(context) + "#" + std::to_string(salt));
  }
  return id;
}

}  // namespace arcweaver
