// SPDX-License-Identifier: Apache-2.0
#include "caplab/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace caplab {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

}  // namespace

RankTable RankTable::read_csv(std::istream& in) {
  RankTable table;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("rank table: empty file");
  }
  auto header = split_csv_line(strip_cr(line));
  if (header.size() < 2 || header[0] != "item") {
    throw std::runtime_error(
        "rank table: header must be 'item,<system>,...'");
  }
  table.systems.assign(header.begin() + 1, header.end());
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("rank table line " + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " cells, found " +
                               std::to_string(fields.size()));
    }
    table.items.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(table.systems.size());
    for (size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        throw std::runtime_error("rank table line " + std::to_string(line_no) +
                                 ": missing cell for system '" +
                                 table.systems[i - 1] + "'");
      }
      row.push_back(std::stod(fields[i]));
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

void RankTable::write_csv(std::ostream& out) const {
  out << "item";
  for (const auto& system : systems) {
    out << ',' << system;
  }
  out << '\n';
  out << std::fixed << std::setprecision(6);
  for (size_t i = 0; i < items.size(); ++i) {
    out << items[i];
    for (double v : values[i]) {
      out << ',' << v;
    }
    out << '\n';
  }
}

std::vector<int> scores_to_ranks(const std::vector<double>& scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("scores_to_ranks: scores must be finite");
    }
  }
  std::vector<int> ranks(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    int better = 0;
    for (size_t j = 0; j < scores.size(); ++j) {
      better += scores[j] > scores[i] ? 1 : 0;
    }
    ranks[i] = 1 + better;
  }
  return ranks;
}

RankTable scores_table_to_ranks(const RankTable& scores) {
  RankTable ranks;
  ranks.systems = scores.systems;
  ranks.items = scores.items;
  ranks.values.reserve(scores.values.size());
  for (const auto& row : scores.values) {
    const auto r = scores_to_ranks(row);
    ranks.values.emplace_back(r.begin(), r.end());
  }
  return ranks;
}

void validate_strict_ranks(const RankTable& ranks) {
  const size_t k = ranks.systems.size();
  for (size_t i = 0; i < ranks.values.size(); ++i) {
    std::vector<bool> seen(k, false);
    for (double v : ranks.values[i]) {
      const double rounded = std::round(v);
      if (v != rounded || rounded < 1 || rounded > static_cast<double>(k) ||
          seen[static_cast<size_t>(rounded) - 1]) {
        throw std::invalid_argument(
            "rank table: item '" + ranks.items[i] +
            "' is not a strict permutation of 1.." + std::to_string(k));
      }
      seen[static_cast<size_t>(rounded) - 1] = true;
    }
  }
}

PairAgreement pairwise_agreement(const RankTable& reward_ranks,
                                 const RankTable& human_ranks) {
  if (reward_ranks.systems != human_ranks.systems) {
    std::string missing;
    for (const auto& system : reward_ranks.systems) {
      if (std::find(human_ranks.systems.begin(), human_ranks.systems.end(),
                    system) == human_ranks.systems.end()) {
        missing += missing.empty() ? system : ", " + system;
      }
    }
    for (const auto& system : human_ranks.systems) {
      if (std::find(reward_ranks.systems.begin(), reward_ranks.systems.end(),
                    system) == reward_ranks.systems.end()) {
        missing += missing.empty() ? system : ", " + system;
      }
    }
    throw std::invalid_argument(
        "pairwise_agreement: system columns differ between tables" +
        (missing.empty() ? std::string(" (ordering mismatch)")
                         : ": " + missing));
  }
  if (reward_ranks.items != human_ranks.items) {
    throw std::invalid_argument(
        "pairwise_agreement: tables cover different items");
  }
  const size_t k = reward_ranks.systems.size();
  const size_t n_items = reward_ranks.items.size();
  if (n_items == 0) {
    throw std::invalid_argument("pairwise_agreement: no items");
  }
  PairAgreement out;
  out.systems = reward_ranks.systems;
  out.matrix.assign(k, std::vector<double>(k, 100.0));
  double pair_sum = 0.0;
  size_t pair_count = 0;
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a + 1; b < k; ++b) {
      size_t agreements = 0;
      for (size_t item = 0; item < n_items; ++item) {
        const int reward_sign = sign_of(reward_ranks.values[item][a] -
                                        reward_ranks.values[item][b]);
        const int human_sign = sign_of(human_ranks.values[item][a] -
                                       human_ranks.values[item][b]);
        // a tie on either side counts as agreement
        if (reward_sign == 0 || human_sign == 0 ||
            reward_sign == human_sign) {
          ++agreements;
        }
      }
      const double pct =
          100.0 * static_cast<double>(agreements) / static_cast<double>(n_items);
      out.matrix[a][b] = pct;
      out.matrix[b][a] = pct;
      pair_sum += pct;
      ++pair_count;
    }
  }
  out.mean = pair_count == 0 ? 100.0 : pair_sum / static_cast<double>(pair_count);
  return out;
}

void PairAgreement::write_csv(std::ostream& out) const {
  out << "pair_agreement_pct";
  for (const auto& system : systems) {
    out << ',' << system;
  }
  out << '\n';
  out << std::fixed << std::setprecision(6);
  for (size_t i = 0; i < systems.size(); ++i) {
    out << systems[i];
    for (double v : matrix[i]) {
      out << ',' << v;
    }
    out << '\n';
  }
  out << "mean," << mean << '\n';
}

std::vector<RankSummary> rank_summaries(const RankTable& ranks) {
  std::vector<RankSummary> out;
  const size_t n_items = ranks.items.size();
  if (n_items == 0) {
    throw std::invalid_argument("rank_summaries: no items");
  }
  for (size_t s = 0; s < ranks.systems.size(); ++s) {
    std::vector<double> column;
    column.reserve(n_items);
    double sum = 0.0;
    for (size_t item = 0; item < n_items; ++item) {
      column.push_back(ranks.values[item][s]);
      sum += column.back();
    }
    std::sort(column.begin(), column.end());
    // lower median for even counts
    const double median = column[(n_items - 1) / 2];
    out.push_back(RankSummary{ranks.systems[s],
                              sum / static_cast<double>(n_items), median});
  }
  return out;
}

std::map<std::string, ConfirmedCounts> ingest_annotations(
    const std::vector<AnnotationRecord>& records) {
  std::map<std::string, ConfirmedCounts> counts;
  for (const auto& record : records) {
    const std::string id =
        record.item + "/" + record.system + "/" + record.proposition;
    if (record.step1 < 1 || record.step1 > 3) {
      throw std::invalid_argument("annotation " + id +
                                  ": step1 code must be 1, 2, or 3");
    }
    if (record.step2.has_value() != (record.step1 == 1)) {
      throw std::invalid_argument(
          "annotation " + id +
          ": step2 must be present exactly when step1 = 1");
    }
    if (record.step2 && (*record.step2 < 1 || *record.step2 > 3)) {
      throw std::invalid_argument("annotation " + id +
                                  ": step2 code must be 1, 2, or 3");
    }
    auto& entry = counts[record.system];
    if (record.step1 == 1 && record.step2 == 2) {
      if (record.kind == AnnotationRecord::Kind::missing) {
        ++entry.m_hat;
      } else {
        ++entry.i_hat;
      }
    }
  }
  return counts;
}

std::vector<AnnotationRecord> read_annotations_csv(std::istream& in) {
  std::vector<AnnotationRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw std::invalid_argument(
          "annotation line " + std::to_string(line_no) +
          ": expected item,system,proposition,kind,step1,step2");
    }
    AnnotationRecord record;
    record.item = fields[0];
    record.system = fields[1];
    record.proposition = fields[2];
    if (fields[3] == "missing") {
      record.kind = AnnotationRecord::Kind::missing;
    } else if (fields[3] == "inconsistent") {
      record.kind = AnnotationRecord::Kind::inconsistent;
    } else {
      throw std::invalid_argument("annotation line " + std::to_string(line_no) +
                                  ": kind must be missing or inconsistent");
    }
    try {
      record.step1 = std::stoi(fields[4]);
      if (!fields[5].empty()) {
        record.step2 = std::stoi(fields[5]);
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("annotation line " + std::to_string(line_no) +
                                  ": step codes must be integers");
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_confirmed_counts_csv(
    std::ostream& out, const std::map<std::string, ConfirmedCounts>& counts) {
  out << "system,m_hat,i_hat\n";
  for (const auto& [system, entry] : counts) {
    out << system << ',' << entry.m_hat << ',' << entry.i_hat << '\n';
  }
}

}  // namespace caplab
