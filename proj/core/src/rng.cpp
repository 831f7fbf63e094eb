#include "ltk/rng.hpp"

#include "ltk/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ltk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

double Rng::uniform() { return std::generate_canonical<double, 53>(engine_); }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Marsaglia polar method; the second variate is discarded so no hidden state survives.
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double Rng::cauchy() {
  double u = uniform();
  while (u == 0.0 || u == 0.5) u = uniform();
  return std::tan(std::numbers::pi * (u - 0.5));
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error("Rng::index called with n = 0");
  // Rejection sampling keeps the draw unbiased and independent of stdlib internals.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r < limit) return static_cast<std::size_t>(r % n);
  }
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng.engine_;
  if (!is) throw IntegrityError("cannot restore random engine state");
  return rng;
}

}  // namespace ltk
