#pragma once

#include <cstdint>
#include <vector>

#include "popdyn/ground_truth.hpp"

namespace testutil {

/// Ground truth from an explicit list of liked items per user.
inline popdyn::GroundTruth make_gt(int n_items, const std::vector<std::vector<int>>& likes) {
  const int n_users = static_cast<int>(likes.size());
  std::vector<std::uint8_t> rel(static_cast<std::size_t>(n_users) * n_items, 0);
  for (int u = 0; u < n_users; ++u) {
    for (int i : likes[u]) rel[static_cast<std::size_t>(u) * n_items + i] = 1;
  }
  return popdyn::GroundTruth(n_users, n_items, std::move(rel));
}

/// Everyone likes everything.
inline popdyn::GroundTruth full_gt(int n_users, int n_items) {
  return popdyn::GroundTruth(n_users, n_items,
                             std::vector<std::uint8_t>(static_cast<std::size_t>(n_users) * n_items, 1));
}

}  // namespace testutil
