// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "caplab/errors.hpp"
#include "caplab/rng.hpp"

namespace caplab {

/// The latent fact universe: N anonymous, exchangeable slots.
///
/// Slot content is deliberately absent — only the combinatorics of the
/// index set matters. Spaces compare equal iff their slot counts do.
class FactSpace {
 public:
  /// Largest slot count for which subsets are stored as one 64-bit word
  /// and exact enumeration is available.
  static constexpr uint32_t kMaxExactSlots = 63;

  explicit FactSpace(uint32_t n_slots) : n_slots_(n_slots) {
    if (n_slots == 0) {
      throw std::invalid_argument("FactSpace: n_slots must be >= 1");
    }
  }

  uint32_t n_slots() const noexcept { return n_slots_; }

  /// Exact mode: subsets are bit patterns and enumeration is supported.
  bool exact_mode() const noexcept { return n_slots_ <= kMaxExactSlots; }

  friend bool operator==(const FactSpace&, const FactSpace&) = default;

 private:
  uint32_t n_slots_;
};

/// A subset of one FactSpace's slots.
///
/// Stored as a single 64-bit mask when the space has at most 63 slots
/// (exact mode), and as a sorted index vector otherwise (Monte Carlo
/// mode). Cardinality is cached. Immutable value semantics except for
/// add(), which exists for incremental construction.
class FactSubset {
 public:
  explicit FactSubset(const FactSpace& space)
      : n_slots_(space.n_slots()), mask_(0) {}

  static FactSubset from_indices(const FactSpace& space,
                                 const std::vector<uint32_t>& indices);
  /// Exact mode only.
  static FactSubset from_mask(const FactSpace& space, uint64_t mask);
  static FactSubset full(const FactSpace& space);

  uint32_t n_slots() const noexcept { return n_slots_; }
  uint32_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool contains(uint32_t slot) const;

  /// Inserts a slot; no-op if already present. Throws std::out_of_range
  /// for slots outside the space.
  void add(uint32_t slot);

  /// True iff *this is a subset of `other` (same space required).
  bool is_subset_of(const FactSubset& other) const;
  uint32_t intersection_size(const FactSubset& other) const;
  FactSubset intersect(const FactSubset& other) const;
  FactSubset set_difference(const FactSubset& other) const;
  FactSubset set_union(const FactSubset& other) const;

  /// Restriction to the half-open slot interval [lo, hi), in the same space.
  FactSubset restrict_to_range(uint32_t lo, uint32_t hi) const;

  /// Present slots in ascending order.
  std::vector<uint32_t> indices() const;

  /// Raw bit pattern (exact mode only).
  uint64_t mask() const;

  bool operator==(const FactSubset& other) const;

 private:
  FactSubset(uint32_t n_slots, uint64_t mask, std::vector<uint32_t> sparse,
             uint32_t size)
      : n_slots_(n_slots), mask_(mask), sparse_(std::move(sparse)), size_(size) {}

  bool dense() const noexcept { return n_slots_ <= FactSpace::kMaxExactSlots; }
  void check_same_space(const FactSubset& other) const;

  uint32_t n_slots_;
  uint64_t mask_ = 0;              // dense representation
  std::vector<uint32_t> sparse_;   // sorted indices, large spaces only
  uint32_t size_ = 0;
};

struct SubsetRelations {
  bool is_subset;               // a ⊆ b
  uint32_t intersection_size;   // |a ∩ b|
};

/// Relations between two subsets of the same space; DomainMismatchError
/// when the spaces differ.
SubsetRelations subset_relations(const FactSubset& a, const FactSubset& b);

/// A policy caption decomposed into correct slots C and error slots E.
/// C and E are disjoint subsets of one space with |C| + |E| <= N.
struct CaptionFacts {
  FactSubset correct;
  FactSubset errors;

  CaptionFacts(FactSubset correct_slots, FactSubset error_slots);

  uint32_t n_slots() const noexcept { return correct.n_slots(); }
  FactSubset emitted() const { return correct.set_union(errors); }
};

/// How a reference caption's fact set is read.
///   ideal        — witness slots are true facts (R ⊆ F); tainted is empty.
///   override_all — witness slots are everything the reference emitted,
///                  including its own errors; `tainted` marks those error
///                  slots so adjudication (or its absence) can act on them.
enum class WitnessMode { ideal, override_all };

/// The reference caption's fact subset R, read as a random probe of the
/// fact space rather than an imitation target. m = size() may be zero,
/// which downstream scoring treats as "nothing armed".
struct Witness {
  FactSubset slots;
  FactSubset tainted;   // subset of `slots` carrying wrong reference facts
  WitnessMode mode = WitnessMode::ideal;

  explicit Witness(FactSubset r, WitnessMode m = WitnessMode::ideal);
  Witness(FactSubset r, FactSubset tainted_slots, WitnessMode m);

  uint32_t size() const noexcept { return slots.size(); }
  /// Armed slots whose reference facts are true.
  FactSubset clean() const { return slots.set_difference(tainted); }
};

/// Uniform k-subset drawn without replacement. Deterministic given the
/// rng state; throws std::invalid_argument when k exceeds the slot count.
FactSubset sample_subset(const FactSpace& space, uint32_t k, Rng& rng);

/// Default cap on |enumerate_subsets| results.
inline constexpr uint64_t kDefaultEnumerationCap = 10'000'000;

/// binomial(n, k) for n <= 63 (all values fit in uint64_t).
uint64_t binomial(uint32_t n, uint32_t k);

/// Streams every k-subset of an exact-mode space exactly once, in
/// ascending order of the bit pattern.
///
/// Construction throws EnumerationTooLargeError when binomial(n, k)
/// exceeds the cap, and std::invalid_argument outside exact mode.
class SubsetEnumerator {
 public:
  SubsetEnumerator(const FactSpace& space, uint32_t k,
                   uint64_t cap = kDefaultEnumerationCap);

  /// Number of subsets the stream will yield in total.
  uint64_t total() const noexcept { return total_; }

  /// Yields the next subset, or false when exhausted.
  bool next(FactSubset& out);

 private:
  FactSpace space_;
  uint64_t total_;
  uint64_t emitted_ = 0;
  uint64_t mask_;
};

/// Visits every k-subset; convenience wrapper over SubsetEnumerator.
void for_each_subset(const FactSpace& space, uint32_t k,
                     const std::function<void(const FactSubset&)>& visit,
                     uint64_t cap = kDefaultEnumerationCap);

}  // namespace caplab
