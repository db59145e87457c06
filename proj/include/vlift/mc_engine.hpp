#pragma once

// Reproducible Monte Carlo over per-path random streams.

#include "vlift/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace vlift {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Randomness { None, GaussianOnly, Mixed };

/// xoshiro256** with a splitmix64-expanded seed: 32 bytes of state, so a
/// fresh stream per path costs a handful of multiplications.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  Xoshiro256() { seed(0, 0); }

  void seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = splitmix64(a) ^ (b * 0xd1342543de82ef95ULL);
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(x);
    }
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Random stream of one path. The engine is keyed by (seed, path) only, so a
/// path replays bit-identically no matter which worker runs it.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path) : seed_(seed), path_(path) { reset(); }

  void reset() {
    engine_.seed(seed_, path_);
    normal_.reset();
  }

  double gaussian() {
    const double z = normal_(engine_);
    return flip_ ? -z : z;
  }

  void fill_gaussian(double* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = gaussian();
  }

  /// Uniform on [0, 1).
  double uniform() {
    if (gaussian_only_)
      throw std::logic_error("PathRng: uniform draw requested from a Gaussian-only stream");
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Exponential with unit rate.
  double exponential() { return -std::log1p(-uniform()); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t path() const { return path_; }
  bool flipped() const { return flip_; }
  void set_flip(bool f) { flip_ = f; }
  void set_gaussian_only(bool g) { gaussian_only_ = g; }

 private:
  std::uint64_t seed_;
  std::uint64_t path_;
  Xoshiro256 engine_;
  std::normal_distribution<double> normal_;
  bool flip_ = false;
  bool gaussian_only_ = false;
};

/// A path simulator writes `dimension()` numbers per path.
template <class S>
concept PathSimulator = std::copy_constructible<S> && requires(S s, const S cs, PathRng& rng, double* out) {
  { cs.dimension() } -> std::convertible_to<std::size_t>;
  { cs.randomness() } -> std::convertible_to<Randomness>;
  s.simulate(rng, out);
};

struct Estimate {
  Vector mean;
  Vector std_error;
  std::size_t paths = 0;
  std::vector<Vector> batch_means;

  double z_score(std::size_t i, double target) const {
    if (std_error(i) == 0.0) return mean(i) == target ? 0.0 : std::numeric_limits<double>::infinity();
    return (mean(i) - target) / std_error(i);
  }
};

class PathFailure : public std::runtime_error {
 public:
  PathFailure(std::uint64_t path, std::uint64_t seed, const std::string& what)
      : std::runtime_error("path " + std::to_string(path) + " (seed " + std::to_string(seed) +
                           ") failed: " + what),
        path_(path),
        seed_(seed) {}
  std::uint64_t path() const { return path_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t path_;
  std::uint64_t seed_;
};

namespace detail {

struct BlockStats {
  std::size_t count = 0;
  Vector mean;
  Vector m2;
};

// The partition depends on the path count only.
inline std::size_t block_count(std::size_t paths) { return std::min<std::size_t>(paths, 64); }

inline std::pair<std::size_t, std::size_t> block_range(std::size_t b, std::size_t blocks,
                                                       std::size_t paths) {
  return {paths * b / blocks, paths * (b + 1) / blocks};
}

struct Failure {
  std::uint64_t path = std::numeric_limits<std::uint64_t>::max();
  std::string what;
};

// Runs body(block) for every block over `workers` threads and rethrows the
// failure with the lowest path index.
template <class Body>
void run_blocks(std::size_t blocks, unsigned workers, std::uint64_t seed, Body&& body) {
  std::vector<Failure> failures(blocks);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      body(b, failures[b]);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(blocks)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  const Failure* first = nullptr;
  for (const auto& f : failures)
    if (!f.what.empty() && (!first || f.path < first->path)) first = &f;
  if (first) throw PathFailure(first->path, seed, first->what);
}

}  // namespace detail

/// Runs `paths` independent paths and returns per-component mean and standard
/// error. Numbers do not depend on `workers`.
template <PathSimulator S>
Estimate run_paths(const S& simulator, std::size_t paths, std::uint64_t seed, unsigned workers = 1) {
  if (paths == 0) throw std::invalid_argument("run_paths: path count must be positive");
  const std::size_t dim = simulator.dimension();
  const std::size_t blocks = detail::block_count(paths);
  std::vector<detail::BlockStats> stats(blocks);
  detail::run_blocks(blocks, workers, seed, [&](std::size_t b, detail::Failure& fail) {
    S sim(simulator);
    auto [lo, hi] = detail::block_range(b, blocks, paths);
    auto& st = stats[b];
    st.mean = Vector::Zero(dim);
    st.m2 = Vector::Zero(dim);
    Vector out(dim);
    for (std::size_t p = lo; p < hi; ++p) {
      try {
        PathRng rng(seed, p);
        out.setZero();
        sim.simulate(rng, out.data());
        if (!out.allFinite()) throw std::runtime_error("non-finite path output");
      } catch (const std::exception& e) {
        fail.path = p;
        fail.what = e.what();
        return;
      }
      ++st.count;
      const double inv = 1.0 / static_cast<double>(st.count);
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double delta = out(i) - st.mean(i);
        st.mean(i) += delta * inv;
        st.m2(i) += delta * (out(i) - st.mean(i));
      }
    }
  });

  Estimate est;
  est.paths = paths;
  Vector mean = Vector::Zero(dim);
  Vector m2 = Vector::Zero(dim);
  std::size_t n = 0;
  for (const auto& st : stats) {
    const std::size_t nb = st.count;
    const Vector delta = st.mean - mean;
    const double tot = static_cast<double>(n + nb);
    mean += delta * (static_cast<double>(nb) / tot);
    m2 += st.m2 + delta.cwiseProduct(delta) * (static_cast<double>(n) * static_cast<double>(nb) / tot);
    n += nb;
    est.batch_means.push_back(st.mean);
  }
  est.mean = mean;
  if (paths > 1)
    est.std_error = (m2 / static_cast<double>(paths - 1) / static_cast<double>(paths)).cwiseSqrt();
  else
    est.std_error = Vector::Zero(dim);
  return est;
}

/// Calls body(sim, p, rng) for every path, where `sim` is a per-block copy of
/// `simulator`. Bodies may only write state owned by path p.
template <class S, class Body>
void for_each_path(const S& simulator, std::size_t paths, std::uint64_t seed, unsigned workers, Body&& body) {
  if (paths == 0) return;
  const std::size_t blocks = detail::block_count(paths);
  detail::run_blocks(blocks, workers, seed, [&](std::size_t b, detail::Failure& fail) {
    S sim(simulator);
    auto [lo, hi] = detail::block_range(b, blocks, paths);
    for (std::size_t p = lo; p < hi; ++p) {
      try {
        PathRng rng(seed, p);
        body(sim, p, rng);
      } catch (const std::exception& e) {
        fail.path = p;
        fail.what = e.what();
        return;
      }
    }
  });
}

/// Raw per-path outputs in path order, for writing sample paths.
template <PathSimulator S>
std::vector<Vector> collect_paths(const S& simulator, std::size_t paths, std::uint64_t seed,
                                  unsigned workers = 1) {
  const std::size_t dim = simulator.dimension();
  std::vector<Vector> out(paths, Vector::Zero(dim));
  if (paths == 0) return out;
  const std::size_t blocks = detail::block_count(paths);
  detail::run_blocks(blocks, workers, seed, [&](std::size_t b, detail::Failure& fail) {
    S sim(simulator);
    auto [lo, hi] = detail::block_range(b, blocks, paths);
    for (std::size_t p = lo; p < hi; ++p) {
      try {
        PathRng rng(seed, p);
        sim.simulate(rng, out[p].data());
      } catch (const std::exception& e) {
        fail.path = p;
        fail.what = e.what();
        return;
      }
    }
  });
  return out;
}

/// Pairs each path with its sign-flipped Gaussian stream and reports the pair average.
template <PathSimulator S>
class Antithetic {
 public:
  explicit Antithetic(S inner) : inner_(std::move(inner)), buf_(inner_.dimension()) {
    if (inner_.randomness() == Randomness::Mixed)
      throw std::invalid_argument("antithetic: simulator consumes non-Gaussian randomness");
  }

  std::size_t dimension() const { return inner_.dimension(); }
  Randomness randomness() const { return inner_.randomness(); }

  void simulate(PathRng& rng, double* out) {
    rng.set_gaussian_only(true);
    inner_.simulate(rng, out);
    rng.reset();
    rng.set_flip(true);
    std::fill(buf_.begin(), buf_.end(), 0.0);
    inner_.simulate(rng, buf_.data());
    rng.set_flip(false);
    for (std::size_t i = 0; i < buf_.size(); ++i) out[i] = 0.5 * (out[i] + buf_[i]);
  }

 private:
  S inner_;
  std::vector<double> buf_;
};

template <PathSimulator S>
Antithetic<S> antithetic_wrap(S simulator) {
  return Antithetic<S>(std::move(simulator));
}

}  // namespace vlift
