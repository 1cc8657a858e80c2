// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace caplab {

/// Per-item, per-system values: reward scores or ranks (1 = best).
struct RankTable {
  std::vector<std::string> systems;
  std::vector<std::string> items;
  std::vector<std::vector<double>> values;  // [item][system]

  /// CSV with header "item,<system>..." and one row per item.
  static RankTable read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;
};

/// Competition ranking of one item's scores: higher score is better,
/// rank = 1 + number of strictly better systems, ties share the smaller
/// rank. All scores must be finite.
std::vector<int> scores_to_ranks(const std::vector<double>& scores);

/// Converts a table of scores into a table of ranks, item by item.
RankTable scores_table_to_ranks(const RankTable& scores);

/// Enforces that every item's ranks are a strict permutation of 1..k.
void validate_strict_ranks(const RankTable& ranks);

struct PairAgreement {
  std::vector<std::string> systems;
  /// agreement percentage per unordered pair, [i][j] = [j][i], 100 on the
  /// diagonal.
  std::vector<std::vector<double>> matrix;
  /// mean over the k(k-1)/2 unordered pairs.
  double mean;

  void write_csv(std::ostream& out) const;
};

/// For each unordered system pair, the percentage of items where
/// sign(rank_a - rank_b) matches between the two tables, a tie on either
/// side counting as agreement.
PairAgreement pairwise_agreement(const RankTable& reward_ranks,
                                 const RankTable& human_ranks);

struct RankSummary {
  std::string system;
  double mean_rank;
  double median_rank;  // lower median for even item counts
};

std::vector<RankSummary> rank_summaries(const RankTable& ranks);

/// One two-step proposition label. step2 is present exactly when step1
/// returned 1 (consistent); codes outside 1..3 are invalid.
struct AnnotationRecord {
  std::string item;
  std::string system;
  std::string proposition;
  enum class Kind { missing, inconsistent } kind;
  int step1;
  std::optional<int> step2;
};

/// Human-confirmed counts per system. A record contributes to M_hat
/// (missing) or I_hat (inconsistent) exactly when step1 = 1 and
/// step2 = 2; every other code combination contributes nothing.
struct ConfirmedCounts {
  uint64_t m_hat = 0;
  uint64_t i_hat = 0;
};

std::map<std::string, ConfirmedCounts> ingest_annotations(
    const std::vector<AnnotationRecord>& records);

/// CSV lines "item,system,proposition,kind,step1,step2-or-empty" with
/// strict code validation; errors name the offending line.
std::vector<AnnotationRecord> read_annotations_csv(std::istream& in);

void write_confirmed_counts_csv(
    std::ostream& out, const std::map<std::string, ConfirmedCounts>& counts);

}  // namespace caplab
