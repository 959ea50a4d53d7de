// Convex-cost assignment solver behind the joint decision rules.
//
// Rows are many and classes few, so the residual graph is condensed onto the
// K class nodes plus the source S. A residual edge b -> a stands for "move the
// cheapest row of class a over to class b"; its cost is the smallest
// score(i, a) - score(i, b) over rows i currently in a, kept in one lazy heap
// per ordered class pair. Edges S -> b and b -> S add or remove one unit of
// class b at the convex marginal cost. Starting from the per-row argmax, every
// negative cycle found by Bellman-Ford is cancelled until none remains; that
// is the min-cost flow optimality condition.
//
// The shortest-path distances at termination are optimal dual prices. Every
// optimal assignment gives each row a class maximizing score - price and keeps
// each count inside the interval where the marginal cost brackets the price,
// so a greedy pass with a small bounded-flow feasibility check picks the
// lexicographically smallest optimum.

#include <algorithm>
#include <bit>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "discretize/joint.hpp"

namespace discretize {
namespace {

struct HeapEntry {
  WideInt key;
  std::uint32_t row;
  bool operator>(const HeapEntry& o) const { return key != o.key ? key > o.key : row > o.row; }
};
using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

enum class EdgeKind { AddUnit, RemoveUnit, MoveRow };

struct Edge {
  int from;
  int to;
  WideInt cost;
  EdgeKind kind;
};

class CycleCanceller {
 public:
  CycleCanceller(const FlowNetwork& net, const TieOrder& ties)
      : net_(net), k_(net.classes), n_(static_cast<std::int64_t>(net.rows)), source_(static_cast<int>(net.classes)) {
    assign_.resize(net.rows);
    counts_.assign(k_, 0);
    heaps_.resize(k_ * k_);
    for (std::size_t i = 0; i < net.rows; ++i) {
      ClassIndex best = ties.order().front();
      for (ClassIndex y : ties.order())
        if (net.score_at(i, static_cast<std::size_t>(y)) > net.score_at(i, static_cast<std::size_t>(best)))
          best = y;
      place(i, best);
    }
  }

  void run() {
    while (true) {
      build_edges();
      auto cycle = find_negative_cycle();
      if (cycle.empty()) break;
      apply(cycle);
    }
  }

  const std::vector<ClassIndex>& assignment() const { return assign_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  /// Shortest-path distances from the last (cycle-free) Bellman-Ford pass.
  const std::vector<WideInt>& potentials() const { return dist_; }
  int source() const { return source_; }

 private:
  void place(std::size_t i, ClassIndex y) {
    assign_[i] = y;
    ++counts_[static_cast<std::size_t>(y)];
    const auto a = static_cast<std::size_t>(y);
    for (std::size_t b = 0; b < k_; ++b) {
      if (b == a) continue;
      heaps_[a * k_ + b].push({net_.score_at(i, a) - net_.score_at(i, b), static_cast<std::uint32_t>(i)});
    }
  }

  void build_edges() {
    edges_.clear();
    for (std::size_t b = 0; b < k_; ++b) {
      const std::int64_t nb = counts_[b];
      if (nb < n_) edges_.push_back({source_, static_cast<int>(b), net_.fidelity[b].marginal(nb + 1), EdgeKind::AddUnit});
      if (nb > 0) edges_.push_back({static_cast<int>(b), source_, -net_.fidelity[b].marginal(nb), EdgeKind::RemoveUnit});
    }
    for (std::size_t a = 0; a < k_; ++a) {
      for (std::size_t b = 0; b < k_; ++b) {
        if (a == b) continue;
        auto& heap = heaps_[a * k_ + b];
        while (!heap.empty() && assign_[heap.top().row] != static_cast<ClassIndex>(a)) heap.pop();
        if (!heap.empty())
          edges_.push_back({static_cast<int>(b), static_cast<int>(a), heap.top().key, EdgeKind::MoveRow});
      }
    }
  }

  // Returns edge indices of a negative cycle, or empty when none exists; in
  // the latter case dist_ holds feasible potentials.
  std::vector<std::size_t> find_negative_cycle() {
    const std::size_t v = k_ + 1;
    dist_.assign(v, 0);
    std::vector<int> pred(v, -1);
    int touched = -1;
    for (std::size_t pass = 0; pass < v; ++pass) {
      touched = -1;
      for (std::size_t e = 0; e < edges_.size(); ++e) {
        const Edge& edge = edges_[e];
        const WideInt candidate = dist_[static_cast<std::size_t>(edge.from)] + edge.cost;
        if (candidate < dist_[static_cast<std::size_t>(edge.to)]) {
          dist_[static_cast<std::size_t>(edge.to)] = candidate;
          pred[static_cast<std::size_t>(edge.to)] = static_cast<int>(e);
          touched = edge.to;
        }
      }
      if (touched < 0) return {};
    }
    int node = touched;
    for (std::size_t step = 0; step < v; ++step) node = edges_[static_cast<std::size_t>(pred[static_cast<std::size_t>(node)])].from;
    std::vector<std::size_t> cycle;
    int cur = node;
    do {
      const auto e = static_cast<std::size_t>(pred[static_cast<std::size_t>(cur)]);
      cycle.push_back(e);
      cur = edges_[e].from;
    } while (cur != node);
    return cycle;
  }

  void apply(const std::vector<std::size_t>& cycle) {
    struct Move {
      std::size_t row;
      ClassIndex to;
    };
    std::vector<Move> moves;
    for (std::size_t e : cycle) {
      const Edge& edge = edges_[e];
      if (edge.kind != EdgeKind::MoveRow) continue;
      const auto a = static_cast<std::size_t>(edge.to);
      const auto b = static_cast<std::size_t>(edge.from);
      auto& heap = heaps_[a * k_ + b];
      moves.push_back({heap.top().row, static_cast<ClassIndex>(b)});
      heap.pop();
    }
    for (const Move& m : moves) {
      --counts_[static_cast<std::size_t>(assign_[m.row])];
      place(m.row, m.to);
    }
  }

  const FlowNetwork& net_;
  std::size_t k_;
  std::int64_t n_;
  int source_;
  std::vector<ClassIndex> assign_;
  std::vector<std::int64_t> counts_;
  std::vector<MinHeap> heaps_;
  std::vector<Edge> edges_;
  std::vector<WideInt> dist_;
};

// Dinic max-flow on a handful of nodes; used to test whether the rows still
// unassigned can meet every class's count interval.
class SmallMaxFlow {
 public:
  explicit SmallMaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), it_(nodes) {}

  void add(std::size_t u, std::size_t v, std::int64_t cap) {
    adj_[u].push_back({v, adj_[v].size(), cap});
    adj_[v].push_back({u, adj_[u].size() - 1, 0});
  }

  std::int64_t run(std::size_t s, std::size_t t) {
    std::int64_t flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (std::int64_t f = dfs(s, t, std::numeric_limits<std::int64_t>::max())) flow += f;
    }
    return flow;
  }

 private:
  struct Arc {
    std::size_t to;
    std::size_t rev;
    std::int64_t cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (const Arc& a : adj_[u]) {
        if (a.cap > 0 && level_[a.to] < 0) {
          level_[a.to] = level_[u] + 1;
          q.push(a.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  std::int64_t dfs(std::size_t u, std::size_t t, std::int64_t pushed) {
    if (u == t) return pushed;
    for (std::size_t& idx = it_[u]; idx < adj_[u].size(); ++idx) {
      Arc& a = adj_[u][idx];
      if (a.cap <= 0 || level_[a.to] != level_[u] + 1) continue;
      const std::int64_t got = dfs(a.to, t, std::min(pushed, a.cap));
      if (got > 0) {
        a.cap -= got;
        adj_[a.to][a.rev].cap += got;
        return got;
      }
    }
    return 0;
  }

  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
};

// Can `remaining[t]` rows of each allowed-set type be placed so that class b
// receives between need_lo[b] and need_hi[b] more rows?
bool completion_feasible(const std::vector<std::uint64_t>& masks,
                         const std::vector<std::int64_t>& remaining,
                         const std::vector<std::int64_t>& need_lo,
                         const std::vector<std::int64_t>& need_hi) {
  const std::size_t k = need_lo.size();
  std::int64_t rows_left = 0;
  for (std::int64_t r : remaining) rows_left += r;
  std::int64_t lo_sum = 0;
  std::int64_t hi_sum = 0;
  for (std::size_t b = 0; b < k; ++b) {
    if (need_hi[b] < 0) return false;
    lo_sum += std::max<std::int64_t>(need_lo[b], 0);
    hi_sum += need_hi[b];
  }
  if (lo_sum > rows_left || hi_sum < rows_left) return false;

  // Circulation with lower bounds: s -> type [m, m], type -> class [0, m],
  // class -> t [lo, hi], t -> s [0, inf]; reduced to max-flow between a
  // super source and super sink.
  const std::size_t s = 0, t = 1, ss = 2, tt = 3, first_type = 4;
  const std::size_t first_class = first_type + masks.size();
  SmallMaxFlow flow(first_class + k);
  std::vector<std::int64_t> excess(first_class + k, 0);
  for (std::size_t ty = 0; ty < masks.size(); ++ty) {
    if (remaining[ty] == 0) continue;
    excess[first_type + ty] += remaining[ty];
    excess[s] -= remaining[ty];
    for (std::size_t b = 0; b < k; ++b)
      if (masks[ty] & (std::uint64_t{1} << b)) flow.add(first_type + ty, first_class + b, remaining[ty]);
  }
  for (std::size_t b = 0; b < k; ++b) {
    const std::int64_t lo = std::max<std::int64_t>(need_lo[b], 0);
    flow.add(first_class + b, t, need_hi[b] - lo);
    excess[t] += lo;
    excess[first_class + b] -= lo;
  }
  flow.add(t, s, rows_left);
  std::int64_t demand = 0;
  for (std::size_t v = 0; v < excess.size(); ++v) {
    if (excess[v] > 0) {
      flow.add(ss, v, excess[v]);
      demand += excess[v];
    } else if (excess[v] < 0) {
      flow.add(v, tt, -excess[v]);
    }
  }
  return flow.run(ss, tt) == demand;
}

// Number of arcs j in [1, n] whose marginal satisfies pred(marginal).
template <class Pred>
std::int64_t count_prefix(const ConvexTerm& term, std::int64_t n, Pred pred) {
  std::int64_t lo = 0, hi = n;  // answer in [0, n]; pred holds on a prefix
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo + 1) / 2;
    if (pred(term.marginal(mid))) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

std::vector<ClassIndex> lexicographic_optimum(const FlowNetwork& net, const TieOrder& ties,
                                              const CycleCanceller& solved) {
  const std::size_t k = net.classes;
  const auto n = static_cast<std::int64_t>(net.rows);
  const auto& dist = solved.potentials();
  const WideInt source_dist = dist[static_cast<std::size_t>(solved.source())];

  std::vector<std::int64_t> lo(k), hi(k);
  for (std::size_t b = 0; b < k; ++b) {
    const WideInt price = dist[b] - source_dist;
    lo[b] = count_prefix(net.fidelity[b], n, [&](WideInt m) { return m < price; });
    hi[b] = count_prefix(net.fidelity[b], n, [&](WideInt m) { return m <= price; });
  }

  std::vector<std::uint64_t> row_mask(net.rows);
  std::vector<std::uint64_t> masks;
  std::unordered_map<std::uint64_t, std::size_t> type_of;
  std::vector<std::int64_t> remaining;
  std::vector<std::size_t> row_type(net.rows);
  for (std::size_t i = 0; i < net.rows; ++i) {
    WideInt best = net.score_at(i, 0) - dist[0];
    for (std::size_t b = 1; b < k; ++b) best = std::max(best, net.score_at(i, b) - dist[b]);
    std::uint64_t mask = 0;
    for (std::size_t b = 0; b < k; ++b)
      if (net.score_at(i, b) - dist[b] == best) mask |= std::uint64_t{1} << b;
    row_mask[i] = mask;
    auto [it, inserted] = type_of.try_emplace(mask, masks.size());
    if (inserted) {
      masks.push_back(mask);
      remaining.push_back(0);
    }
    row_type[i] = it->second;
    ++remaining[it->second];
  }

  std::vector<std::int64_t> assigned(k, 0);
  std::vector<ClassIndex> labels(net.rows, kUncoded);
  std::vector<std::int64_t> need_lo(k), need_hi(k);
  for (std::size_t i = 0; i < net.rows; ++i) {
    --remaining[row_type[i]];
    const std::uint64_t mask = row_mask[i];
    ClassIndex chosen = kUncoded;
    if ((mask & (mask - 1)) == 0) {
      chosen = static_cast<ClassIndex>(std::countr_zero(mask));
    } else {
      for (ClassIndex y : ties.order()) {
        if (!(mask & (std::uint64_t{1} << y))) continue;
        for (std::size_t b = 0; b < k; ++b) {
          const std::int64_t extra = (static_cast<ClassIndex>(b) == y) ? 1 : 0;
          need_lo[b] = lo[b] - assigned[b] - extra;
          need_hi[b] = hi[b] - assigned[b] - extra;
        }
        if (completion_feasible(masks, remaining, need_lo, need_hi)) {
          chosen = y;
          break;
        }
      }
    }
    if (chosen == kUncoded) throw std::logic_error("joint solver: no optimal completion found");
    labels[i] = chosen;
    ++assigned[static_cast<std::size_t>(chosen)];
  }
  return labels;
}

}  // namespace

WideInt ConvexTerm::value(std::int64_t n) const {
  const WideInt d = static_cast<WideInt>(n) * unit - target;
  return weight * (d < 0 ? -d : d);
}

WideInt ConvexTerm::marginal(std::int64_t n) const { return value(n) - value(n - 1); }

WideInt FlowNetwork::objective(std::span<const ClassIndex> labels) const {
  std::vector<std::int64_t> counts(classes, 0);
  WideInt total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    total += score_at(i, y);
    ++counts[y];
  }
  for (std::size_t y = 0; y < classes; ++y) total -= fidelity[y].value(counts[y]);
  return total;
}

std::vector<ClassIndex> solve_flow(const FlowNetwork& net, const TieOrder& ties) {
  if (net.classes < 2 || net.classes > 64) throw std::invalid_argument("joint solver supports 2..64 classes");
  if (ties.classes() != net.classes) throw std::invalid_argument("tie order size does not match class count");
  if (net.rows == 0) return {};
  if (net.rows > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("batch too large");
  CycleCanceller solver(net, ties);
  solver.run();
  return lexicographic_optimum(net, ties, solver);
}

}  // namespace discretize
