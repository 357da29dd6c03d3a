#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "popdyn/rng.hpp"

namespace popdyn {

class GroundTruth;

enum class Phase : std::uint8_t { kBootstrap = 0, kPersonalized = 1, kRandomProbe = 2 };

std::string_view to_string(Phase phase);

/// Set of phases, used to select which exposures count for training or metrics.
class PhaseMask {
 public:
  constexpr PhaseMask() = default;
  constexpr PhaseMask(std::initializer_list<Phase> phases) {
    for (Phase p : phases) bits_ |= bit(p);
  }

  constexpr bool contains(Phase p) const noexcept { return (bits_ & bit(p)) != 0; }
  static constexpr PhaseMask all() {
    return {Phase::kBootstrap, Phase::kPersonalized, Phase::kRandomProbe};
  }

  friend constexpr bool operator==(PhaseMask, PhaseMask) = default;

 private:
  static constexpr std::uint8_t bit(Phase p) { return std::uint8_t{1} << static_cast<int>(p); }
  std::uint8_t bits_ = 0;
};

struct ExposureRecord {
  std::int32_t user = 0;
  std::int32_t item = 0;
  std::int32_t position = 1;  // 1-based rank
  std::int32_t iteration = 0;
  Phase phase = Phase::kBootstrap;
  bool clicked = false;

  friend bool operator==(const ExposureRecord&, const ExposureRecord&) = default;
};

/// Probability of examining rank k: 1 / log2(1 + k).
double examination_prob(int position);

/// One Bernoulli examination per position, independent across positions; a
/// click needs examination and a true like. Every position consumes exactly
/// one draw so streams stay aligned across rankers.
std::vector<ExposureRecord> simulate_clicks(int user, std::span<const int> ranked_items,
                                            const GroundTruth& gt, Rng& rng,
                                            int iteration = 0,
                                            Phase phase = Phase::kBootstrap);

}  // namespace popdyn
