#pragma once

// Counter-based random streams and the deterministic replication runner.
//
// Every replication r of an experiment with master seed s draws from its own
// stream whose key is derived from (s, r) alone:
//
//   key(s, r) = mix64(s ^ mix64(r + 0x632BE59BD9B4E019))
//   x_k       = mix64(key + (k + 1) * 0x9E3779B97F4A7C15),  k = 0, 1, ...
//
// where mix64 is the SplitMix64 finalizer. Draw k of a replication is a pure
// function of (s, r, k), so results never depend on which worker ran the
// replication or in what order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace mrw {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}
  static RandomStream for_replication(std::uint64_t master, std::uint64_t rep) noexcept {
    return RandomStream(derive_seed(master, rep));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }
  double normal() { return normal_(*this); }
  double exponential() { return exponential_(*this); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  boost::random::normal_distribution<double> normal_;
  boost::random::exponential_distribution<double> exponential_;
};

// Replications are grouped in fixed-size blocks; each block is accumulated
// sequentially in replication order and the block results are merged in
// block order. The merge tree is therefore independent of the worker count
// and floating-point sums are bit-identical for 1 or N workers.
inline constexpr std::size_t kReplicationBlock = 1024;

// Acc must be default constructible and provide `void merge(const Acc&)`.
// body(rep, stream, acc) runs one replication.
template <class Acc, class Body>
Acc replicate(std::size_t reps, std::uint64_t master_seed, unsigned workers, Body&& body) {
  const std::size_t nblocks = (reps + kReplicationBlock - 1) / kReplicationBlock;
  std::vector<Acc> blocks(nblocks);
  std::vector<std::exception_ptr> failures(nblocks);
  auto run_block = [&](std::size_t blk) {
    const std::size_t lo = blk * kReplicationBlock;
    const std::size_t hi = std::min(reps, lo + kReplicationBlock);
    try {
      Acc acc{};
      for (std::size_t r = lo; r < hi; ++r) {
        RandomStream stream = RandomStream::for_replication(master_seed, r);
        body(r, stream, acc);
      }
      blocks[blk] = std::move(acc);
    } catch (...) {
      failures[blk] = std::current_exception();
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || nblocks <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, nblocks));
    pool.reserve(n);
    for (unsigned w = 0; w < n; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < nblocks; b += n) run_block(b);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  Acc total{};
  for (const auto& b : blocks) total.merge(b);
  return total;
}

}  // namespace mrw
