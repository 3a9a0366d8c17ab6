#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include <cereal/cereal.hpp>
#include <cereal/types/string.hpp>

namespace anf {

// Seedable random source. Distributions are constructed per draw so the
// generator state alone determines every future sample, which keeps
// checkpoint/resume exact.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from (seed, stream) via seed_seq mixing.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x414e46u};
    Rng r;
    r.engine_.seed(seq);
    return r;
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  std::uint64_t bits() { return engine_(); }

  engine_type& engine() { return engine_; }

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

  template <class Archive>
  void save(Archive& ar) const {
    std::ostringstream os;
    os << engine_;
    ar(os.str());
  }

  template <class Archive>
  void load(Archive& ar) {
    std::string s;
    ar(s);
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  engine_type engine_;
};

}  // namespace anf
