#ifndef DOSEINS_RNG_HPP
#define DOSEINS_RNG_HPP

#include <cstdint>
#include <limits>

namespace doseins {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Derive a stream key from a master seed and a stream index.
std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t stream);

/// Stateless draw in (0, 1) addressed by (key, a, b, c). Used for common
/// random numbers: the k-th patient at a given dose always sees the same
/// uniform, whatever path the trial took to get there.
double counter_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// Counter-based stream: the i-th output is a pure function of (key, i).
/// Copies are independent values; there is no global state.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::uint64_t stream)
      : key_(derive_key(master_seed, stream)) {}

  static RngStream from_state(std::uint64_t key, std::uint64_t counter) {
    RngStream r;
    r.key_ = key;
    r.counter_ = counter;
    return r;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean, double sd);
  /// Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace doseins

#endif  // DOSEINS_RNG_HPP
