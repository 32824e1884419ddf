#include "cfp/partitions.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "cfp/errors.hpp"

namespace cfp {

int exactMaxN() {
  if (const char* env = std::getenv("CFP_MAX_N")) {
    int value = 0;
    std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || value < 1)
      throw ValidationError("CFP_MAX_N must be a positive integer, got '" + std::string(s) + "'");
    return std::min(value, kMaxDenseN);
  }
  return kDefaultExactMaxN;
}

Partition::Partition(std::vector<int> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw DomainError("partition of 0 is not a state");
  if (n() > kMaxDenseN) throw CapacityError("partition size exceeds dense limit 64");
  long mass = 0;
  for (int i = 1; i <= n(); ++i) {
    int c = counts_[i - 1];
    if (c < 0) throw DomainError("negative block count");
    mass += static_cast<long>(i) * c;
    blocks_ += c;
  }
  if (mass != n())
    throw DomainError("counts describe mass " + std::to_string(mass) + ", expected " +
                      std::to_string(n()));
}

Partition Partition::singleBlock(int n) {
  if (n < 1) throw DomainError("n must be positive");
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  c.back() = 1;
  return Partition(std::move(c));
}

Partition Partition::singletons(int n) {
  if (n < 1) throw DomainError("n must be positive");
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  c.front() = n;
  return Partition(std::move(c));
}

Partition Partition::fromParts(int n, std::span<const int> parts) {
  if (n < 1) throw DomainError("n must be positive");
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  for (int part : parts) {
    if (part < 1 || part > n) throw DomainError("block size out of range");
    ++c[part - 1];
  }
  return Partition(std::move(c));
}

int Partition::largestBlock() const {
  for (int i = n(); i >= 1; --i)
    if (counts_[i - 1] > 0) return i;
  return 0;
}

std::vector<int> Partition::parts() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(blocks_));
  for (int i = n(); i >= 1; --i) out.insert(out.end(), counts_[i - 1], i);
  return out;
}

std::size_t PartitionHash::operator()(const Partition& p) const noexcept {
  // FNV-1a over the counts.
  std::uint64_t h = 1469598103934665603ull;
  for (int c : p.counts()) {
    h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

std::string toCompactString(const Partition& p) {
  std::ostringstream os;
  bool first = true;
  for (int i = 1; i <= p.n(); ++i) {
    if (p.count(i) == 0) continue;
    if (!first) os << ' ';
    os << i << '^' << p.count(i);
    first = false;
  }
  return os.str();
}

Partition parseCompact(std::string_view text) {
  std::vector<std::pair<int, int>> terms;
  long total = 0;
  std::size_t pos = 0;
  auto number = [&](std::string_view token) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || v < 1)
      throw ValidationError("malformed partition term '" + std::string(token) + "'");
    return v;
  };
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(pos, end - pos);
    pos = end;
    std::size_t caret = token.find('^');
    int size = number(token.substr(0, caret));
    int mult = caret == std::string_view::npos ? 1 : number(token.substr(caret + 1));
    terms.emplace_back(size, mult);
    total += static_cast<long>(size) * mult;
  }
  if (total < 1) throw ValidationError("empty partition text");
  if (total > kMaxDenseN) throw CapacityError("partition size exceeds dense limit 64");
  std::vector<int> counts(static_cast<std::size_t>(total), 0);
  for (auto [size, mult] : terms) counts[size - 1] += mult;
  return Partition(std::move(counts));
}

namespace {

// Generates partitions as nonincreasing part lists, largest part first.
void generateParts(int remaining, int maxPart, std::vector<int>& current, int n,
                   std::vector<Partition>& out) {
  if (remaining == 0) {
    out.push_back(Partition::fromParts(n, current));
    return;
  }
  for (int part = std::min(remaining, maxPart); part >= 1; --part) {
    current.push_back(part);
    generateParts(remaining - part, part, current, n, out);
    current.pop_back();
  }
}

bool enumerationOrder(const Partition& x, const Partition& y) {
  if (x.blockCount() != y.blockCount()) return x.blockCount() > y.blockCount();
  return x.counts() > y.counts();
}

}  // namespace

std::vector<Partition> enumerate(int n, int maxN) {
  if (n < 1) throw CapacityError("enumerate: N must be at least 1");
  if (n > maxN || n > kMaxDenseN)
    throw CapacityError("enumerate: N=" + std::to_string(n) + " exceeds exact-mode cap " +
                        std::to_string(std::min(maxN, kMaxDenseN)) + " (set CFP_MAX_N to raise it)");
  std::vector<Partition> out;
  std::vector<int> current;
  generateParts(n, n, current, n, out);
  std::sort(out.begin(), out.end(), enumerationOrder);
  return out;
}

std::vector<Partition> levelSlice(int n, int r, int maxN) {
  if (r < 1 || r > n) throw DomainError("levelSlice: r must lie in 1..N");
  std::vector<Partition> all = enumerate(n, maxN);
  std::vector<Partition> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out),
               [r](const Partition& p) { return p.blockCount() == r; });
  return out;
}

bool isValidMove(MoveKind kind, int i, int j, const Partition& source) {
  if (i < 1 || j < 1 || i + j > source.n()) return false;
  if (kind == MoveKind::Coagulate) {
    if (i == j) return source.count(i) >= 2;
    return source.count(i) >= 1 && source.count(j) >= 1;
  }
  return source.count(i + j) >= 1;
}

Partition applyMove(MoveKind kind, int i, int j, const Partition& source) {
  if (!isValidMove(kind, i, j, source))
    throw DomainError(std::string(kind == MoveKind::Coagulate ? "coagulation" : "fragmentation") +
                      " (" + std::to_string(i) + "," + std::to_string(j) + ") unavailable from " +
                      toCompactString(source));
  std::vector<int> c = source.counts();
  int delta = kind == MoveKind::Coagulate ? -1 : 1;
  c[i - 1] += delta;
  c[j - 1] += delta;
  c[i + j - 1] -= delta;
  return Partition(std::move(c));
}

Move makeMove(MoveKind kind, int i, int j, const Partition& source) {
  return Move{kind, i, j, source, applyMove(kind, i, j, source)};
}

std::vector<Move> moves(const Partition& eta) {
  std::vector<Move> out;
  const int n = eta.n();
  for (int i = 1; i <= n; ++i) {
    if (eta.count(i) == 0) continue;
    for (int j = i; i + j <= n; ++j)
      if (isValidMove(MoveKind::Coagulate, i, j, eta)) out.push_back(makeMove(MoveKind::Coagulate, i, j, eta));
  }
  for (int k = 2; k <= n; ++k) {
    if (eta.count(k) == 0) continue;
    for (int i = 1; i <= k / 2; ++i) out.push_back(makeMove(MoveKind::Fragment, i, k - i, eta));
  }
  return out;
}

StateSpace::StateSpace(int n, int maxN) : n_(n), states_(enumerate(n, maxN)) {
  index_.reserve(states_.size());
  for (std::size_t k = 0; k < states_.size(); ++k) index_.emplace(states_[k], k);
  // Levels appear in descending r order.
  levelStart_.assign(static_cast<std::size_t>(n) + 2, 0);
  for (int r = 1; r <= n; ++r) {
    auto it = std::find_if(states_.begin(), states_.end(),
                           [r](const Partition& p) { return p.blockCount() <= r; });
    levelStart_[r] = static_cast<std::size_t>(it - states_.begin());
  }
}

std::size_t StateSpace::indexOf(const Partition& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) throw DomainError("partition " + toCompactString(p) + " is not in Omega_" + std::to_string(n_));
  return it->second;
}

std::pair<std::size_t, std::size_t> StateSpace::levelRange(int r) const {
  if (r < 1 || r > n_) throw DomainError("level r must lie in 1..N");
  std::size_t first = levelStart_[r];
  std::size_t last = r == 1 ? states_.size() : levelStart_[r - 1];
  return {first, last};
}

}  // namespace cfp
