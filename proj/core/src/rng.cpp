#include "doseins/rng.hpp"

#include <stdexcept>

#include "doseins/stats.hpp"

namespace doseins {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

double to_open_unit(std::uint64_t bits) {
  // 53 random bits, offset by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t stream) {
  return mix64(mix64(master_seed) ^ (stream * kGolden + 0x632BE59BD9B4E019ULL));
}

double counter_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(key ^ mix64(a + 1));
  h = mix64(h ^ mix64(b + 0x1000193ULL));
  h = mix64(h ^ mix64(c + 0xA0761D6478BD642FULL));
  return to_open_unit(h);
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c * kGolden));
}

double RngStream::uniform() { return to_open_unit((*this)()); }

double RngStream::normal(double mean, double sd) {
  return mean + sd * normal_quantile(uniform());
}

int RngStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int needs lo <= hi");
  const std::uint64_t span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  const std::uint64_t top = (*this)() >> 32;
  return lo + static_cast<int>((top * span) >> 32);
}

}  // namespace doseins
