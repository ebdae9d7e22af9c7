#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace mreal {

/// Purpose tag attached to each random draw so tests can count sampling
/// cardinalities without stubbing the generator.
enum class DrawKind {
  shift,
  noise_scale,
  noise_vector,
  epsilon,
  latent,
  shuffle,
  other,
};

/// Seeded random source with a serializable state.
///
/// Distributions are implemented here rather than through <random>'s
/// distribution objects so that the stream is fully described by the engine
/// state (no cached normals) and identical across standard libraries.
class Rng {
 public:
  using DrawHook = std::function<void(DrawKind, std::size_t)>;

  explicit Rng(std::uint64_t seed = 0);

  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal (Box-Muller, second value discarded).
  double normal();
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint64_t bits() { return engine_(); }

  /// Records `count` draws of the given purpose with the installed hook.
  void note(DrawKind kind, std::size_t count = 1) const {
    if (hook_) hook_(kind, count);
  }
  void set_hook(DrawHook hook) { hook_ = std::move(hook); }

  std::string state() const;
  void restore(const std::string& state);

  /// Independent stream derived from (seed, index) with splitmix64 mixing.
  static Rng derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
  DrawHook hook_;
};

}  // namespace mreal
