#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include "popdyn/click_model.hpp"

namespace popdyn {

/// Per-item cumulative click counts.
using ClickCounts = std::vector<std::int64_t>;

/// Positions of past unclicked exposures of each (user, item) pair. A pair's
/// history is dropped once the user clicks the item.
class FalsePositiveIndex {
 public:
  FalsePositiveIndex() = default;
  explicit FalsePositiveIndex(int n_users) : by_user_(static_cast<std::size_t>(n_users)) {}

  void record(const ExposureRecord& rec);

  /// Empty when the pair has no unclicked history.
  std::span<const std::int32_t> positions(int user, int item) const;

  std::size_t n_pairs() const;

  friend bool operator==(const FalsePositiveIndex&, const FalsePositiveIndex&) = default;

 private:
  std::vector<std::unordered_map<std::int32_t, std::vector<std::int32_t>>> by_user_;
};

/// Append-only exposure history with incrementally maintained views.
class InteractionLog {
 public:
  InteractionLog() = default;
  InteractionLog(int n_users, int n_items);

  void append(const ExposureRecord& rec);
  void append(std::span<const ExposureRecord> recs);

  int n_users() const noexcept { return n_users_; }
  int n_items() const noexcept { return n_items_; }
  std::span<const ExposureRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Per-item clicks restricted to `phases`.
  ClickCounts click_counts(PhaseMask phases) const;
  std::int64_t total_clicks(PhaseMask phases = PhaseMask::all()) const;

  const FalsePositiveIndex& false_positives() const noexcept { return false_positives_; }

  bool has_clicked(int user, int item) const noexcept {
    return clicked_[static_cast<std::size_t>(user) * n_items_ + item] != 0;
  }
  int n_clicked_by(int user) const noexcept { return clicked_per_user_[user]; }

  /// Rebuilds every derived view from the raw records.
  InteractionLog recomputed() const;
  /// True when the incremental views match a from-scratch rebuild.
  bool views_consistent() const;

  /// CSV: user,item,position,clicked,iteration,phase
  void write_csv(const std::filesystem::path& path) const;

 private:
  int n_users_ = 0;
  int n_items_ = 0;
  std::vector<ExposureRecord> records_;
  std::vector<std::int64_t> clicks_by_phase_[3];
  std::vector<std::uint8_t> clicked_;
  std::vector<int> clicked_per_user_;
  FalsePositiveIndex false_positives_;
};

}  // namespace popdyn
