// SPDX-License-Identifier: Apache-2.0
#include "caplab/fact_space.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

namespace caplab {

namespace {

std::vector<uint32_t> sorted_intersection(const std::vector<uint32_t>& a,
                                          const std::vector<uint32_t>& b) {
  std::vector<uint32_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

}  // namespace

FactSubset FactSubset::from_indices(const FactSpace& space,
                                    const std::vector<uint32_t>& indices) {
  FactSubset s(space);
  for (uint32_t idx : indices) {
    s.add(idx);
  }
  return s;
}

FactSubset FactSubset::from_mask(const FactSpace& space, uint64_t mask) {
  if (!space.exact_mode()) {
    throw std::invalid_argument("FactSubset::from_mask requires exact mode");
  }
  if (space.n_slots() < 64 && (mask >> space.n_slots()) != 0) {
    throw std::out_of_range("FactSubset::from_mask: mask exceeds the space");
  }
  return FactSubset(space.n_slots(), mask, {},
                    static_cast<uint32_t>(std::popcount(mask)));
}

FactSubset FactSubset::full(const FactSpace& space) {
  if (space.exact_mode()) {
    const uint64_t mask = (uint64_t{1} << space.n_slots()) - 1;
    return FactSubset(space.n_slots(), mask, {}, space.n_slots());
  }
  std::vector<uint32_t> all(space.n_slots());
  std::iota(all.begin(), all.end(), 0U);
  return FactSubset(space.n_slots(), 0, std::move(all), space.n_slots());
}

bool FactSubset::contains(uint32_t slot) const {
  if (slot >= n_slots_) {
    return false;
  }
  if (dense()) {
    return ((mask_ >> slot) & 1U) != 0;
  }
  return std::binary_search(sparse_.begin(), sparse_.end(), slot);
}

void FactSubset::add(uint32_t slot) {
  if (slot >= n_slots_) {
    throw std::out_of_range("FactSubset::add: slot " + std::to_string(slot) +
                            " outside space of " + std::to_string(n_slots_) +
                            " slots");
  }
  if (dense()) {
    const uint64_t bit = uint64_t{1} << slot;
    if ((mask_ & bit) == 0) {
      mask_ |= bit;
      ++size_;
    }
    return;
  }
  auto it = std::lower_bound(sparse_.begin(), sparse_.end(), slot);
  if (it == sparse_.end() || *it != slot) {
    sparse_.insert(it, slot);
    ++size_;
  }
}

void FactSubset::check_same_space(const FactSubset& other) const {
  if (n_slots_ != other.n_slots_) {
    throw DomainMismatchError("FactSubset: operands live in different spaces (" +
                              std::to_string(n_slots_) + " vs " +
                              std::to_string(other.n_slots_) + " slots)");
  }
}

bool FactSubset::is_subset_of(const FactSubset& other) const {
  check_same_space(other);
  if (dense()) {
    return (mask_ & ~other.mask_) == 0;
  }
  return std::includes(other.sparse_.begin(), other.sparse_.end(),
                       sparse_.begin(), sparse_.end());
}

uint32_t FactSubset::intersection_size(const FactSubset& other) const {
  check_same_space(other);
  if (dense()) {
    return static_cast<uint32_t>(std::popcount(mask_ & other.mask_));
  }
  uint32_t count = 0;
  auto a = sparse_.begin();
  auto b = other.sparse_.begin();
  while (a != sparse_.end() && b != other.sparse_.end()) {
    if (*a < *b) {
      ++a;
    } else if (*b < *a) {
      ++b;
    } else {
      ++count;
      ++a;
      ++b;
    }
  }
  return count;
}

FactSubset FactSubset::intersect(const FactSubset& other) const {
  check_same_space(other);
  if (dense()) {
    const uint64_t mask = mask_ & other.mask_;
    return FactSubset(n_slots_, mask, {},
                      static_cast<uint32_t>(std::popcount(mask)));
  }
  auto out = sorted_intersection(sparse_, other.sparse_);
  const auto size = static_cast<uint32_t>(out.size());
  return FactSubset(n_slots_, 0, std::move(out), size);
}

FactSubset FactSubset::set_difference(const FactSubset& other) const {
  check_same_space(other);
  if (dense()) {
    const uint64_t mask = mask_ & ~other.mask_;
    return FactSubset(n_slots_, mask, {},
                      static_cast<uint32_t>(std::popcount(mask)));
  }
  std::vector<uint32_t> out;
  std::set_difference(sparse_.begin(), sparse_.end(), other.sparse_.begin(),
                      other.sparse_.end(), std::back_inserter(out));
  const auto size = static_cast<uint32_t>(out.size());
  return FactSubset(n_slots_, 0, std::move(out), size);
}

FactSubset FactSubset::set_union(const FactSubset& other) const {
  check_same_space(other);
  if (dense()) {
    const uint64_t mask = mask_ | other.mask_;
    return FactSubset(n_slots_, mask, {},
                      static_cast<uint32_t>(std::popcount(mask)));
  }
  std::vector<uint32_t> out;
  std::set_union(sparse_.begin(), sparse_.end(), other.sparse_.begin(),
                 other.sparse_.end(), std::back_inserter(out));
  const auto size = static_cast<uint32_t>(out.size());
  return FactSubset(n_slots_, 0, std::move(out), size);
}

FactSubset FactSubset::restrict_to_range(uint32_t lo, uint32_t hi) const {
  if (lo > hi || hi > n_slots_) {
    throw std::out_of_range("FactSubset::restrict_to_range: bad interval");
  }
  if (dense()) {
    uint64_t window = hi == 64 ? ~uint64_t{0} : (uint64_t{1} << hi) - 1;
    window &= ~((lo == 64) ? ~uint64_t{0} : ((uint64_t{1} << lo) - 1));
    const uint64_t mask = mask_ & window;
    return FactSubset(n_slots_, mask, {},
                      static_cast<uint32_t>(std::popcount(mask)));
  }
  std::vector<uint32_t> out;
  for (uint32_t idx : sparse_) {
    if (idx >= lo && idx < hi) {
      out.push_back(idx);
    }
  }
  const auto size = static_cast<uint32_t>(out.size());
  return FactSubset(n_slots_, 0, std::move(out), size);
}

std::vector<uint32_t> FactSubset::indices() const {
  if (!dense()) {
    return sparse_;
  }
  std::vector<uint32_t> out;
  out.reserve(size_);
  uint64_t bits = mask_;
  while (bits != 0) {
    const auto slot = static_cast<uint32_t>(std::countr_zero(bits));
    out.push_back(slot);
    bits &= bits - 1;
  }
  return out;
}

uint64_t FactSubset::mask() const {
  if (!dense()) {
    throw std::domain_error("FactSubset::mask: space is not in exact mode");
  }
  return mask_;
}

bool FactSubset::operator==(const FactSubset& other) const {
  check_same_space(other);
  return dense() ? mask_ == other.mask_ : sparse_ == other.sparse_;
}

SubsetRelations subset_relations(const FactSubset& a, const FactSubset& b) {
  return SubsetRelations{a.is_subset_of(b), a.intersection_size(b)};
}

CaptionFacts::CaptionFacts(FactSubset correct_slots, FactSubset error_slots)
    : correct(std::move(correct_slots)), errors(std::move(error_slots)) {
  if (correct.intersection_size(errors) != 0) {
    throw std::invalid_argument(
        "CaptionFacts: correct and error slots must be disjoint");
  }
}

Witness::Witness(FactSubset r, WitnessMode m)
    : slots(std::move(r)), tainted(FactSpace(slots.n_slots())), mode(m) {}

Witness::Witness(FactSubset r, FactSubset tainted_slots, WitnessMode m)
    : slots(std::move(r)), tainted(std::move(tainted_slots)), mode(m) {
  if (!tainted.is_subset_of(slots)) {
    throw std::invalid_argument("Witness: tainted slots must be armed slots");
  }
  if (mode == WitnessMode::ideal && !tainted.empty()) {
    throw std::invalid_argument(
        "Witness: ideal mode carries true facts only; tainted must be empty");
  }
}

FactSubset sample_subset(const FactSpace& space, uint32_t k, Rng& rng) {
  const uint32_t n = space.n_slots();
  if (k > n) {
    throw std::invalid_argument("sample_subset: k = " + std::to_string(k) +
                                " exceeds n_slots = " + std::to_string(n));
  }
  // Partial Fisher-Yates: after i swaps the prefix holds a uniform
  // i-subset in uniform order; we keep the first k entries.
  std::vector<uint32_t> scratch(n);
  std::iota(scratch.begin(), scratch.end(), 0U);
  FactSubset out{space};
  for (uint32_t i = 0; i < k; ++i) {
    const uint64_t j = i + rng.uniform_below(n - i);
    std::swap(scratch[i], scratch[j]);
    out.add(scratch[i]);
  }
  return out;
}

uint64_t binomial(uint32_t n, uint32_t k) {
  if (n > FactSpace::kMaxExactSlots) {
    throw std::invalid_argument("binomial: n must be <= 63");
  }
  if (k > n) {
    return 0;
  }
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (uint32_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
  }
  return static_cast<uint64_t>(result);
}

SubsetEnumerator::SubsetEnumerator(const FactSpace& space, uint32_t k,
                                   uint64_t cap)
    : space_(space), total_(0), mask_(0) {
  if (!space.exact_mode()) {
    throw std::invalid_argument(
        "SubsetEnumerator: enumeration requires exact mode (n_slots <= 63)");
  }
  if (k > space.n_slots()) {
    throw std::invalid_argument("SubsetEnumerator: k exceeds n_slots");
  }
  total_ = binomial(space.n_slots(), k);
  if (total_ > cap) {
    throw EnumerationTooLargeError(
        "SubsetEnumerator: binomial(" + std::to_string(space.n_slots()) + ", " +
        std::to_string(k) + ") = " + std::to_string(total_) +
        " exceeds the enumeration cap of " + std::to_string(cap));
  }
  mask_ = k == 0 ? 0 : (uint64_t{1} << k) - 1;
}

bool SubsetEnumerator::next(FactSubset& out) {
  if (emitted_ >= total_) {
    return false;
  }
  out = FactSubset::from_mask(space_, mask_);
  ++emitted_;
  if (emitted_ < total_ && mask_ != 0) {
    // Gosper's hack: next-larger bit pattern with equal popcount.
    const uint64_t c = mask_ & (~mask_ + 1);
    const uint64_t r = mask_ + c;
    mask_ = (((r ^ mask_) >> 2) / c) | r;
  }
  return true;
}

void for_each_subset(const FactSpace& space, uint32_t k,
                     const std::function<void(const FactSubset&)>& visit,
                     uint64_t cap) {
  SubsetEnumerator en(space, k, cap);
  FactSubset subset{space};
  while (en.next(subset)) {
    visit(subset);
  }
}

}  // namespace caplab
