#include "popdyn/ground_truth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string_view>

#include "binary_io.hpp"
#include "popdyn/error.hpp"
#include "popdyn/interaction_log.hpp"
#include "popdyn/metrics.hpp"
#include "popdyn/rng.hpp"

namespace popdyn {
namespace {

constexpr std::string_view kGroundTruthMagic = "PDGT0001";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + delim.size();
  }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available in libstdc++ 11.
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
  } else {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  }
}

std::vector<int> column_sums(int n_users, int n_items, std::span<const std::uint8_t> rel) {
  std::vector<int> sums(static_cast<std::size_t>(n_items), 0);
  for (int u = 0; u < n_users; ++u) {
    const auto* row = rel.data() + static_cast<std::size_t>(u) * n_items;
    for (int i = 0; i < n_items; ++i) sums[i] += row[i];
  }
  return sums;
}

std::vector<int> row_sums(int n_users, int n_items, std::span<const std::uint8_t> rel) {
  std::vector<int> sums(static_cast<std::size_t>(n_users), 0);
  for (int u = 0; u < n_users; ++u) {
    const auto* row = rel.data() + static_cast<std::size_t>(u) * n_items;
    sums[u] = std::accumulate(row, row + n_items, 0);
  }
  return sums;
}

double gini_of_sizes(std::span<const int> sizes) {
  std::vector<double> v(sizes.begin(), sizes.end());
  return gini_of(v, sizes);
}

}  // namespace

RatingsDataset load_ratings(const std::filesystem::path& path, const RatingsFormat& format) {
  if (format.delimiter.empty()) throw Error("load_ratings: empty delimiter");
  std::ifstream in(path);
  if (!in) throw Error("load_ratings: cannot open " + path.string());

  RatingsDataset ds;
  std::map<long long, int> user_ids;
  std::map<long long, int> item_ids;
  std::set<std::pair<int, int>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, format.delimiter);
    long long raw_user = 0;
    long long raw_item = 0;
    double rating = 0.0;
    const bool ok = fields.size() >= 3 && parse_number(fields[0], raw_user) &&
                    parse_number(fields[1], raw_item) && parse_number(fields[2], rating);
    if (!ok) {
      if (first_content && format.allow_header) {
        first_content = false;
        continue;
      }
      throw ParseError("expected user" + format.delimiter + "item" + format.delimiter +
                           "rating, got '" + line + "'",
                       line_no);
    }
    first_content = false;

    auto [uit, unew] = user_ids.try_emplace(raw_user, static_cast<int>(user_ids.size()));
    auto [iit, inew] = item_ids.try_emplace(raw_item, static_cast<int>(item_ids.size()));
    if (!seen.emplace(uit->second, iit->second).second) {
      throw ParseError("duplicate rating for (user " + std::to_string(raw_user) + ", item " +
                           std::to_string(raw_item) + ")",
                       line_no);
    }
    ds.triples.push_back({uit->second, iit->second, rating});
  }
  if (ds.triples.empty()) throw Error("load_ratings: no ratings in " + path.string());
  ds.n_users = static_cast<int>(user_ids.size());
  ds.n_items = static_cast<int>(item_ids.size());
  return ds;
}

GroundTruth::GroundTruth(int n_users, int n_items, std::vector<std::uint8_t> relevance,
                         std::uint64_t seed)
    : n_users_(n_users), n_items_(n_items), seed_(seed), relevance_(std::move(relevance)) {
  if (n_users < 1 || n_items < 1) throw Error("GroundTruth: empty shape");
  if (relevance_.size() != static_cast<std::size_t>(n_users) * n_items) {
    throw Error("GroundTruth: relevance size does not match shape");
  }
  for (auto& v : relevance_) v = v != 0 ? 1 : 0;
  audience_ = column_sums(n_users, n_items, relevance_);
  for (int i = 0; i < n_items; ++i) {
    if (audience_[i] < 1) throw Error("GroundTruth: item " + std::to_string(i) + " has no audience");
  }
  const auto rows = row_sums(n_users, n_items, relevance_);
  for (int u = 0; u < n_users; ++u) {
    if (rows[u] < 1) throw Error("GroundTruth: user " + std::to_string(u) + " likes nothing");
  }
  total_likes_ = std::accumulate(audience_.begin(), audience_.end(), std::int64_t{0});
  density_ = static_cast<double>(total_likes_) / (static_cast<double>(n_users) * n_items);
  audience_gini_ = gini_of_sizes(audience_);
}

std::vector<std::pair<int, int>> GroundTruth::positives() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(total_likes_));
  for (int u = 0; u < n_users_; ++u) {
    for (int i = 0; i < n_items_; ++i) {
      if (likes(u, i)) out.emplace_back(u, i);
    }
  }
  return out;
}

void GroundTruth::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kGroundTruthMagic.data(), static_cast<std::streamsize>(kGroundTruthMagic.size()));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n_users_));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(n_items_));
  detail::write_pod<std::uint64_t>(out, seed_);
  detail::write_pod<double>(out, density_);
  detail::write_pod<double>(out, audience_gini_);
  std::vector<std::uint8_t> packed((relevance_.size() + 7) / 8, 0);
  for (std::size_t j = 0; j < relevance_.size(); ++j) {
    if (relevance_[j]) packed[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
  }
  detail::write_array<std::uint8_t>(out, packed);
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  detail::expect_magic(in, kGroundTruthMagic);
  const auto n = detail::read_pod<std::uint32_t>(in);
  const auto m = detail::read_pod<std::uint32_t>(in);
  const auto seed = detail::read_pod<std::uint64_t>(in);
  (void)detail::read_pod<double>(in);  // density, recomputed
  (void)detail::read_pod<double>(in);  // audience gini, recomputed
  const std::size_t cells = static_cast<std::size_t>(n) * m;
  std::vector<std::uint8_t> packed((cells + 7) / 8);
  detail::read_array<std::uint8_t>(in, packed);
  std::vector<std::uint8_t> rel(cells);
  for (std::size_t j = 0; j < cells; ++j) rel[j] = (packed[j / 8] >> (j % 8)) & 1u;
  return GroundTruth(static_cast<int>(n), static_cast<int>(m), std::move(rel), seed);
}

GroundTruth complete_and_binarize(const RatingsDataset& ratings, const CompletionConfig& cfg,
                                  double target_density, int user_cap) {
  if (!(target_density > 0.0 && target_density < 1.0)) {
    throw Error("complete_and_binarize: target density must be in (0, 1)");
  }
  if (user_cap < 1 || user_cap > ratings.n_users) {
    throw Error("complete_and_binarize: user_cap must be in [1, n_users]");
  }

  // Uniform user subsample, kept in original id order.
  std::vector<int> users(static_cast<std::size_t>(ratings.n_users));
  std::iota(users.begin(), users.end(), 0);
  Rng rng = Rng::stream(cfg.seed, Stream::kSubsample);
  rng.partial_shuffle(std::span<int>(users), static_cast<std::size_t>(user_cap));
  users.resize(static_cast<std::size_t>(user_cap));
  std::sort(users.begin(), users.end());
  std::vector<int> user_map(static_cast<std::size_t>(ratings.n_users), -1);
  for (std::size_t j = 0; j < users.size(); ++j) user_map[users[j]] = static_cast<int>(j);

  std::vector<int> item_map(static_cast<std::size_t>(ratings.n_items), -1);
  for (const auto& r : ratings.triples) {
    if (user_map[r.user] >= 0) item_map[r.item] = 0;
  }
  int n_items = 0;
  for (auto& id : item_map) {
    if (id == 0) id = n_items++;
  }
  const int n_users = user_cap;
  if (n_items == 0) throw Error("complete_and_binarize: sampled users rated nothing");

  InteractionLog observed(n_users, n_items);
  for (const auto& r : ratings.triples) {
    const int u = user_map[r.user];
    if (u < 0) continue;
    observed.append(ExposureRecord{.user = u,
                                   .item = item_map[r.item],
                                   .position = 1,
                                   .clicked = r.rating >= cfg.positive_min_rating});
  }
  if (observed.total_clicks() == 0) throw Error("complete_and_binarize: no positive ratings");

  TrainConfig tc = cfg.trainer;
  tc.seed = derive_seed(cfg.seed, Stream::kTrain);
  const ModelParams model = train(observed, PhaseMask::all(), tc);

  const std::size_t cells = static_cast<std::size_t>(n_users) * n_items;
  std::vector<double> scores(cells);
  for (int u = 0; u < n_users; ++u) {
    for (int i = 0; i < n_items; ++i) scores[static_cast<std::size_t>(u) * n_items + i] = model.logit(u, i);
  }
  const auto [min_it, max_it] = std::minmax_element(scores.begin(), scores.end());
  if (*min_it == *max_it) throw Error("complete_and_binarize: all scores identical, no threshold separates");

  // Global threshold: the score whose ">=" set is closest in size to the target.
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto target_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(target_density * static_cast<double>(cells))), 1, cells);
  double threshold = sorted[target_count - 1];
  {
    auto count_at_least = [&](double t) {
      return static_cast<std::size_t>(
          std::upper_bound(sorted.begin(), sorted.end(), t, std::greater<>()) - sorted.begin());
    };
    const std::size_t at = count_at_least(threshold);
    // With ties the next-higher distinct score may land closer.
    auto higher = std::lower_bound(sorted.begin(), sorted.end(), threshold, std::greater<>());
    if (higher != sorted.begin()) {
      const double alt = *(higher - 1);
      const std::size_t alt_count = count_at_least(alt);
      const auto dist = [&](std::size_t c) {
        return c > target_count ? c - target_count : target_count - c;
      };
      if (dist(alt_count) < dist(at)) threshold = alt;
    }
  }

  std::vector<std::uint8_t> rel(cells);
  for (std::size_t j = 0; j < cells; ++j) rel[j] = scores[j] >= threshold ? 1 : 0;

  // Dropping empty items never empties a user row and vice versa, so one pass each.
  const auto cols = column_sums(n_users, n_items, rel);
  const auto rows = row_sums(n_users, n_items, rel);
  std::vector<int> keep_items;
  std::vector<int> keep_users;
  for (int i = 0; i < n_items; ++i) {
    if (cols[i] > 0) keep_items.push_back(i);
  }
  for (int u = 0; u < n_users; ++u) {
    if (rows[u] > 0) keep_users.push_back(u);
  }
  if (keep_items.empty() || keep_users.empty()) throw Error("complete_and_binarize: empty result");
  const int n2 = static_cast<int>(keep_users.size());
  const int m2 = static_cast<int>(keep_items.size());
  std::vector<std::uint8_t> rel2(static_cast<std::size_t>(n2) * m2);
  for (int a = 0; a < n2; ++a) {
    for (int b = 0; b < m2; ++b) {
      rel2[static_cast<std::size_t>(a) * m2 + b] =
          rel[static_cast<std::size_t>(keep_users[a]) * n_items + keep_items[b]];
    }
  }
  GroundTruth gt(n2, m2, std::move(rel2), cfg.seed);
  if (std::abs(gt.density() - target_density) > 0.1 * target_density) {
    throw Error("complete_and_binarize: realized density " + std::to_string(gt.density()) +
                " is not within 10% of " + std::to_string(target_density));
  }
  return gt;
}

std::vector<int> zipf_audience_sizes(int n_users, int n_items, double exponent,
                                     std::int64_t target_total) {
  std::vector<double> weights(static_cast<std::size_t>(n_items));
  for (int j = 0; j < n_items; ++j) weights[j] = std::pow(static_cast<double>(j + 1), -exponent);

  auto sizes_for = [&](double scale) {
    std::vector<int> sizes(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
      const double raw = std::round(scale * weights[j]);
      sizes[j] = static_cast<int>(std::clamp(raw, 1.0, static_cast<double>(n_users)));
    }
    return sizes;
  };
  auto total_of = [](const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::int64_t{0});
  };

  // Total is non-decreasing in scale; bisect for the closest.
  double lo = 0.0;
  double hi = static_cast<double>(n_users) / weights.back() + 1.0;
  std::vector<int> best = sizes_for(lo);
  std::int64_t best_gap = std::llabs(total_of(best) - target_total);
  for (int iter = 0; iter < 200 && best_gap > 0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    auto sizes = sizes_for(mid);
    const std::int64_t total = total_of(sizes);
    const std::int64_t gap = std::llabs(total - target_total);
    if (gap < best_gap) {
      best_gap = gap;
      best = std::move(sizes);
    }
    if (total < target_total) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

namespace {

// Chooses which users like each item: the top-A_i users by a low-rank
// affinity plus Gumbel noise (sampling without replacement proportional to
// exp(affinity)). Then gives every user with no likes one like taken from a
// user who has at least two, preserving audience sizes.
std::vector<std::uint8_t> assign_likers(int n_users, int n_items, std::span<const int> sizes,
                                        const SynthesisOptions& options, Rng& rng) {
  const int r = std::max(1, options.latent_dim);
  std::vector<double> uf(static_cast<std::size_t>(n_users) * r);
  std::vector<double> vf(static_cast<std::size_t>(n_items) * r);
  for (auto& x : uf) x = rng.normal();
  for (auto& x : vf) x = rng.normal();
  const double scale = options.affinity / std::sqrt(static_cast<double>(r));
  auto affinity = [&](int u, int i) {
    double s = 0.0;
    for (int f = 0; f < r; ++f) s += uf[static_cast<std::size_t>(u) * r + f] * vf[static_cast<std::size_t>(i) * r + f];
    return scale * s;
  };

  std::vector<std::uint8_t> rel(static_cast<std::size_t>(n_users) * n_items, 0);
  std::vector<double> key(static_cast<std::size_t>(n_users));
  std::vector<int> order(static_cast<std::size_t>(n_users));
  for (int i = 0; i < n_items; ++i) {
    for (int u = 0; u < n_users; ++u) key[u] = affinity(u, i) + rng.gumbel();
    std::iota(order.begin(), order.end(), 0);
    const auto take = static_cast<std::size_t>(sizes[i]);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](int a, int b) { return key[a] != key[b] ? key[a] > key[b] : a < b; });
    for (std::size_t j = 0; j < take; ++j) rel[static_cast<std::size_t>(order[j]) * n_items + i] = 1;
  }

  auto rows = row_sums(n_users, n_items, rel);
  for (int u = 0; u < n_users; ++u) {
    if (rows[u] > 0) continue;
    std::vector<int> items(static_cast<std::size_t>(n_items));
    std::iota(items.begin(), items.end(), 0);
    std::vector<double> aff(static_cast<std::size_t>(n_items));
    for (int i = 0; i < n_items; ++i) aff[i] = affinity(u, i);
    std::stable_sort(items.begin(), items.end(), [&](int a, int b) { return aff[a] > aff[b]; });
    bool moved = false;
    for (int i : items) {
      int donor = -1;
      double donor_aff = 0.0;
      for (int v = 0; v < n_users; ++v) {
        if (!rel[static_cast<std::size_t>(v) * n_items + i] || rows[v] < 2) continue;
        const double a = affinity(v, i);
        if (donor < 0 || a < donor_aff) {
          donor = v;
          donor_aff = a;
        }
      }
      if (donor < 0) continue;
      rel[static_cast<std::size_t>(donor) * n_items + i] = 0;
      rel[static_cast<std::size_t>(u) * n_items + i] = 1;
      --rows[donor];
      ++rows[u];
      moved = true;
      break;
    }
    if (!moved) throw Error("synthesize_ground_truth: cannot give user " + std::to_string(u) + " a like");
  }
  return rel;
}

}  // namespace

GroundTruth synthesize_ground_truth(int n_users, int n_items, double target_gini,
                                    double target_density, std::uint64_t seed,
                                    const SynthesisOptions& options) {
  if (n_users < 1 || n_items < 1) throw Error("synthesize_ground_truth: empty shape");
  if (!(target_gini >= 0.0 && target_gini < 1.0)) {
    throw Error("synthesize_ground_truth: target gini must be in [0, 1)");
  }
  if (!(target_density > 0.0 && target_density < 1.0)) {
    throw Error("synthesize_ground_truth: target density must be in (0, 1)");
  }
  const double cells = static_cast<double>(n_users) * n_items;
  const auto target_total = static_cast<std::int64_t>(std::llround(target_density * cells));
  if (target_total < std::max(n_users, n_items)) {
    throw Error("synthesize_ground_truth: density too low to give every user and item a like");
  }

  // Audience Gini grows with the exponent; bisect it.
  std::vector<int> sizes = zipf_audience_sizes(n_users, n_items, 0.0, target_total);
  double gini = gini_of_sizes(sizes);
  if (target_gini > 0.0) {
    double lo = 0.0;
    double hi = 8.0;
    const auto sizes_hi = zipf_audience_sizes(n_users, n_items, hi, target_total);
    if (gini_of_sizes(sizes_hi) < target_gini - 0.01) {
      throw Error("synthesize_ground_truth: audience gini " + std::to_string(target_gini) +
                  " unreachable at density " + std::to_string(target_density));
    }
    double best_gap = std::abs(gini - target_gini);
    for (int iter = 0; iter < options.max_iterations && best_gap > 1e-4; ++iter) {
      const double mid = 0.5 * (lo + hi);
      auto s = zipf_audience_sizes(n_users, n_items, mid, target_total);
      const double g = gini_of_sizes(s);
      if (std::abs(g - target_gini) < best_gap) {
        best_gap = std::abs(g - target_gini);
        sizes = s;
        gini = g;
      }
      if (g < target_gini) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  const auto total = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  if (std::abs(gini - target_gini) > 0.01 ||
      std::abs(static_cast<double>(total - target_total)) > 0.05 * static_cast<double>(target_total)) {
    throw Error("synthesize_ground_truth: infeasible (gini " + std::to_string(target_gini) +
                ", density " + std::to_string(target_density) + ")");
  }

  Rng rng = Rng::stream(seed, Stream::kGroundTruth);
  rng.shuffle(std::span<int>(sizes));  // decouple audience size from item index
  auto rel = assign_likers(n_users, n_items, sizes, options, rng);
  return GroundTruth(n_users, n_items, std::move(rel), seed);
}

std::vector<TrainingSet> make_density_variants(const GroundTruth& gt,
                                               std::span<const double> densities,
                                               std::uint64_t seed) {
  auto positives = gt.positives();
  Rng rng = Rng::stream(seed, Stream::kSubsample);
  rng.shuffle(std::span<std::pair<int, int>>(positives));
  const double cells = static_cast<double>(gt.n_users()) * gt.n_items();

  std::vector<TrainingSet> out;
  for (double d : densities) {
    if (!(d > 0.0)) throw Error("make_density_variants: density must be positive");
    const auto count = std::max<std::int64_t>(1, std::llround(d * cells));
    if (count > static_cast<std::int64_t>(positives.size())) {
      throw Error("make_density_variants: density " + std::to_string(d) +
                  " exceeds the ground truth density " + std::to_string(gt.density()));
    }
    TrainingSet ts;
    ts.density = d;
    ts.positives.assign(positives.begin(), positives.begin() + count);
    out.push_back(std::move(ts));
  }
  return out;
}

double audience_gini(const GroundTruth& gt) { return gini_of_sizes(gt.audience_sizes()); }

}  // namespace popdyn
