#include "popdyn/interaction_log.hpp"

#include <fstream>

#include "popdyn/error.hpp"

namespace popdyn {

void FalsePositiveIndex::record(const ExposureRecord& rec) {
  auto& user_map = by_user_.at(static_cast<std::size_t>(rec.user));
  if (rec.clicked) {
    user_map.erase(rec.item);
  } else {
    user_map[rec.item].push_back(rec.position);
  }
}

std::span<const std::int32_t> FalsePositiveIndex::positions(int user, int item) const {
  const auto& user_map = by_user_.at(static_cast<std::size_t>(user));
  if (auto it = user_map.find(item); it != user_map.end()) return it->second;
  return {};
}

std::size_t FalsePositiveIndex::n_pairs() const {
  std::size_t n = 0;
  for (const auto& m : by_user_) n += m.size();
  return n;
}

InteractionLog::InteractionLog(int n_users, int n_items)
    : n_users_(n_users),
      n_items_(n_items),
      clicked_(static_cast<std::size_t>(n_users) * n_items, 0),
      clicked_per_user_(static_cast<std::size_t>(n_users), 0),
      false_positives_(n_users) {
  for (auto& c : clicks_by_phase_) c.assign(static_cast<std::size_t>(n_items), 0);
}

void InteractionLog::append(const ExposureRecord& rec) {
  if (rec.user < 0 || rec.user >= n_users_ || rec.item < 0 || rec.item >= n_items_) {
    throw Error("InteractionLog: record out of range");
  }
  if (rec.position < 1) throw Error("InteractionLog: position must be >= 1");
  records_.push_back(rec);
  false_positives_.record(rec);
  if (rec.clicked) {
    ++clicks_by_phase_[static_cast<int>(rec.phase)][static_cast<std::size_t>(rec.item)];
    auto& flag = clicked_[static_cast<std::size_t>(rec.user) * n_items_ + rec.item];
    if (!flag) {
      flag = 1;
      ++clicked_per_user_[static_cast<std::size_t>(rec.user)];
    }
  }
}

void InteractionLog::append(std::span<const ExposureRecord> recs) {
  for (const auto& r : recs) append(r);
}

ClickCounts InteractionLog::click_counts(PhaseMask phases) const {
  ClickCounts out(static_cast<std::size_t>(n_items_), 0);
  for (int p = 0; p < 3; ++p) {
    if (!phases.contains(static_cast<Phase>(p))) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += clicks_by_phase_[p][i];
  }
  return out;
}

std::int64_t InteractionLog::total_clicks(PhaseMask phases) const {
  std::int64_t total = 0;
  for (auto c : click_counts(phases)) total += c;
  return total;
}

InteractionLog InteractionLog::recomputed() const {
  InteractionLog fresh(n_users_, n_items_);
  fresh.append(records_);
  return fresh;
}

bool InteractionLog::views_consistent() const {
  const InteractionLog fresh = recomputed();
  for (int p = 0; p < 3; ++p) {
    if (fresh.clicks_by_phase_[p] != clicks_by_phase_[p]) return false;
  }
  return fresh.clicked_ == clicked_ && fresh.clicked_per_user_ == clicked_per_user_ &&
         fresh.false_positives_ == false_positives_;
}

void InteractionLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "user,item,position,clicked,iteration,phase\n";
  for (const auto& r : records_) {
    out << r.user << ',' << r.item << ',' << r.position << ',' << (r.clicked ? 1 : 0) << ','
        << r.iteration << ',' << to_string(r.phase) << '\n';
  }
}

}  // namespace popdyn
