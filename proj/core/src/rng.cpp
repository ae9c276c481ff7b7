#include "smiling/types.hpp"

namespace smiling {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
  return static_cast<int>(uniform() * n);
}

Vec Rng::normal_vec(Eigen::Index d) {
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = normal();
  return v;
}

void Rng::fill_normal(Mat& m) {
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = normal();
}

Rng Rng::fork() { return Rng(engine_()); }

}  // namespace smiling
