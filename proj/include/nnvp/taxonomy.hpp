#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nnvp {

// V1: argmax class.
// V2: argmax, split by whether the maximum output reaches theta.
// V3: argmax, split by whether the second-highest output reaches theta.
// V4: argmax, split by whether (max - second max) reaches theta.
// V5: the set of classes whose outputs reach theta.
enum class TaxonomyKind { V1, V2, V3, V4, V5 };

inline constexpr TaxonomyKind kAllTaxonomies[] = {TaxonomyKind::V1, TaxonomyKind::V2, TaxonomyKind::V3,
                                                  TaxonomyKind::V4, TaxonomyKind::V5};

// Largest class count representable by a V5 key.
inline constexpr int kMaxTaxonomyClasses = 64;

inline std::string_view to_string(TaxonomyKind k) {
  switch (k) {
    case TaxonomyKind::V1: return "V1";
    case TaxonomyKind::V2: return "V2";
    case TaxonomyKind::V3: return "V3";
    case TaxonomyKind::V4: return "V4";
    case TaxonomyKind::V5: return "V5";
  }
  return "?";
}

inline std::optional<TaxonomyKind> parse_taxonomy_kind(std::string_view s) {
  if (s.size() != 2 || (s[0] != 'v' && s[0] != 'V')) return std::nullopt;
  switch (s[1]) {
    case '1': return TaxonomyKind::V1;
    case '2': return TaxonomyKind::V2;
    case '3': return TaxonomyKind::V3;
    case '4': return TaxonomyKind::V4;
    case '5': return TaxonomyKind::V5;
    default: return std::nullopt;
  }
}

inline double default_theta(TaxonomyKind k) {
  switch (k) {
    case TaxonomyKind::V1: return 0.0;
    case TaxonomyKind::V2: return 0.75;
    case TaxonomyKind::V3: return 0.25;
    case TaxonomyKind::V4: return 0.5;
    case TaxonomyKind::V5: return 0.25;
  }
  return 0.0;
}

struct TaxonomyRule {
  TaxonomyKind kind = TaxonomyKind::V1;
  double theta = 0.0;  // ignored by V1

  static TaxonomyRule standard(TaxonomyKind k) { return {k, default_theta(k)}; }

  std::string name() const { return std::string(to_string(kind)); }

  // Throws std::invalid_argument if theta is outside the meaningful range
  // for this kind and class count.
  void validate(int num_classes) const {
    if (num_classes < 2) throw std::invalid_argument("taxonomy: need at least two classes");
    if (num_classes > kMaxTaxonomyClasses)
      throw std::invalid_argument("taxonomy: at most 64 classes supported");
    auto require = [&](bool ok, const char* range) {
      if (!ok)
        throw std::invalid_argument(name() + ": theta " + std::to_string(theta) + " outside " + range);
    };
    switch (kind) {
      case TaxonomyKind::V1: break;
      case TaxonomyKind::V2: require(theta > 1.0 / num_classes && theta < 1.0, "(1/c, 1)"); break;
      case TaxonomyKind::V3: require(theta > 0.0 && theta < 0.5, "(0, 0.5)"); break;
      case TaxonomyKind::V4: require(theta > 0.0 && theta < 1.0, "(0, 1)"); break;
      case TaxonomyKind::V5: require(theta > 0.0 && theta < 0.5, "(0, 0.5)"); break;
    }
  }

  friend bool operator==(const TaxonomyRule&, const TaxonomyRule&) = default;
};

inline std::vector<TaxonomyRule> standard_taxonomies() {
  std::vector<TaxonomyRule> out;
  for (TaxonomyKind k : kAllTaxonomies) out.push_back(TaxonomyRule::standard(k));
  return out;
}

// Category of one example under a taxonomy. Unused fields stay at their
// defaults so that keys compare equal iff they denote the same category.
struct CategoryKey {
  TaxonomyKind kind = TaxonomyKind::V1;
  int top = -1;               // argmax class (V1-V4)
  bool above = false;         // threshold flag (V2-V4)
  std::uint64_t members = 0;  // bit j set iff o_j >= theta (V5)

  auto operator<=>(const CategoryKey&) const = default;

  // Stable text form: "V1:1", "V3:2/above", "V5:{0,1}".
  std::string to_string() const {
    std::string s(nnvp::to_string(kind));
    s += ':';
    if (kind == TaxonomyKind::V5) {
      s += '{';
      bool first = true;
      for (int j = 0; j < kMaxTaxonomyClasses; ++j)
        if (members >> j & 1U) {
          if (!first) s += ',';
          s += std::to_string(j);
          first = false;
        }
      s += '}';
    } else {
      s += std::to_string(top);
      if (kind != TaxonomyKind::V1) s += above ? "/above" : "/below";
    }
    return s;
  }
};

// Maximum number of distinct categories a rule can produce for c classes.
inline std::uint64_t category_bound(TaxonomyKind kind, int num_classes) {
  switch (kind) {
    case TaxonomyKind::V1: return static_cast<std::uint64_t>(num_classes);
    case TaxonomyKind::V5:
      return num_classes >= 64 ? ~std::uint64_t{0} : std::uint64_t{1} << num_classes;
    default: return 2 * static_cast<std::uint64_t>(num_classes);
  }
}

inline constexpr double kProbabilitySumTolerance = 1e-6;

// Threshold comparisons accept values this far below theta, so that exact
// decimal ties (0.7 - 0.2 vs 0.5) land on the "above" side despite rounding.
inline constexpr double kThresholdSlack = 1e-12;

namespace detail {

inline void require_probability_vector(std::span<const double> o) {
  if (o.size() < 2) throw std::invalid_argument("taxonomy: output vector needs >= 2 entries");
  if (o.size() > static_cast<std::size_t>(kMaxTaxonomyClasses))
    throw std::invalid_argument("taxonomy: at most 64 classes supported");
  double sum = 0.0;
  for (double v : o) {
    if (!(v >= 0.0) || v > 1.0) throw std::invalid_argument("taxonomy: output entry outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
    throw std::invalid_argument("taxonomy: outputs sum to " + std::to_string(sum) + ", not 1");
}

}  // namespace detail

// Threshold comparisons are closed (>= theta counts as above, up to
// kThresholdSlack); argmax ties go to the lowest class index.
inline CategoryKey category_of(const TaxonomyRule& rule, std::span<const double> outputs) {
  detail::require_probability_vector(outputs);
  CategoryKey key;
  key.kind = rule.kind;
  const double cut = rule.theta - kThresholdSlack;

  if (rule.kind == TaxonomyKind::V5) {
    for (std::size_t j = 0; j < outputs.size(); ++j)
      if (outputs[j] >= cut) key.members |= std::uint64_t{1} << j;
    return key;
  }

  int top = 0;
  for (int j = 1; j < static_cast<int>(outputs.size()); ++j)
    if (outputs[j] > outputs[top]) top = j;
  key.top = top;
  if (rule.kind == TaxonomyKind::V1) return key;

  double second = -1.0;
  for (int j = 0; j < static_cast<int>(outputs.size()); ++j)
    if (j != top) second = std::max(second, outputs[j]);

  switch (rule.kind) {
    case TaxonomyKind::V2: key.above = outputs[top] >= cut; break;
    case TaxonomyKind::V3: key.above = second >= cut; break;
    case TaxonomyKind::V4: key.above = outputs[top] - second >= cut; break;
    default: break;
  }
  return key;
}

}  // namespace nnvp
