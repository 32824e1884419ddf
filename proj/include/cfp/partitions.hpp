#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cfp {

/// Hard limit of the dense count representation.
inline constexpr int kMaxDenseN = 64;
/// Default upper bound on N for code paths that enumerate the whole state space.
inline constexpr int kDefaultExactMaxN = 30;

/// Exact-mode cap: kDefaultExactMaxN unless the CFP_MAX_N environment variable overrides it.
int exactMaxN();

/// An integer partition of n in multiplicity form: counts()[i-1] is the number of blocks of size i.
class Partition {
 public:
  Partition() = default;
  /// Takes (n_1, ..., n_N); N is the length of the vector and must equal sum i*n_i.
  explicit Partition(std::vector<int> counts);

  static Partition singleBlock(int n);
  static Partition singletons(int n);
  /// Builds the partition with the given block sizes (any order).
  static Partition fromParts(int n, std::span<const int> parts);

  int n() const { return static_cast<int>(counts_.size()); }
  /// Number of blocks of size i; zero for i outside 1..n.
  int count(int i) const { return (i >= 1 && i <= n()) ? counts_[i - 1] : 0; }
  const std::vector<int>& counts() const { return counts_; }
  int blockCount() const { return blocks_; }
  int largestBlock() const;
  /// Block sizes in nonincreasing order.
  std::vector<int> parts() const;

  friend bool operator==(const Partition&, const Partition&) = default;
  friend std::strong_ordering operator<=>(const Partition& x, const Partition& y) {
    return x.counts_ <=> y.counts_;
  }

 private:
  std::vector<int> counts_;
  int blocks_ = 0;
};

struct PartitionHash {
  std::size_t operator()(const Partition& p) const noexcept;
};

/// Compact text form, e.g. "1^1 3^1" for the partition 3+1 of 4.
std::string toCompactString(const Partition& p);
/// Inverse of toCompactString; `n` is inferred from the parts.
Partition parseCompact(std::string_view text);

/// All partitions of n. Order: block count descending, then count vectors lexicographically
/// descending within a level. Throws CapacityError unless 1 <= n <= maxN.
std::vector<Partition> enumerate(int n, int maxN = exactMaxN());

/// Partitions of n with exactly r blocks, in the same order as enumerate().
std::vector<Partition> levelSlice(int n, int r, int maxN = exactMaxN());

enum class MoveKind { Coagulate, Fragment };

/// A single coagulation of blocks (i, j) or fragmentation of a block i+j into (i, j).
struct Move {
  MoveKind kind;
  int i;
  int j;
  Partition source;
  Partition target;
};

bool isValidMove(MoveKind kind, int i, int j, const Partition& source);
/// Throws DomainError if the move is not available from `source`.
Partition applyMove(MoveKind kind, int i, int j, const Partition& source);
Move makeMove(MoveKind kind, int i, int j, const Partition& source);

/// Every coagulation and fragmentation available from eta, each unordered pair once (i <= j).
/// Coagulations come first, ordered by (i, j); then fragmentations ordered by (i+j, i).
std::vector<Move> moves(const Partition& eta);

/// Omega_N materialized once: stable state indices and level ranges.
class StateSpace {
 public:
  explicit StateSpace(int n, int maxN = exactMaxN());

  int n() const { return n_; }
  std::size_t size() const { return states_.size(); }
  const Partition& operator[](std::size_t index) const { return states_[index]; }
  const std::vector<Partition>& states() const { return states_; }
  /// Throws DomainError for a partition of a different integer.
  std::size_t indexOf(const Partition& p) const;
  /// Half-open index range [first, last) of the level with r blocks.
  std::pair<std::size_t, std::size_t> levelRange(int r) const;
  int levelOf(std::size_t index) const { return states_[index].blockCount(); }

 private:
  int n_;
  std::vector<Partition> states_;
  std::unordered_map<Partition, std::size_t, PartitionHash> index_;
  std::vector<std::size_t> levelStart_;  // indexed by r, size n+2
};

}  // namespace cfp
