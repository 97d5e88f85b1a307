#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace vortexlab::detail {

// Dinic max-flow on real capacities; used for the binary steps of the
// flat-norm descent.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), it_(nodes) {}

  void add_edge(std::size_t u, std::size_t v, double cap, double rev_cap = 0.0) {
    if (cap <= 0.0 && rev_cap <= 0.0) return;
    adj_[u].push_back({v, adj_[v].size(), cap});
    adj_[v].push_back({u, adj_[u].size() - 1, rev_cap});
  }

  double solve(std::size_t s, std::size_t t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      for (double f = augment(s, t); f > 0.0; f = augment(s, t)) flow += f;
    }
    return flow;
  }

  // After solve(): true for nodes on the source side of a minimum cut.
  std::vector<bool> source_side(std::size_t s) const {
    std::vector<bool> seen(adj_.size(), false);
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const Edge& e : adj_[u])
        if (e.cap > eps_ && !seen[e.to]) {
          seen[e.to] = true;
          stack.push_back(e.to);
        }
    }
    return seen;
  }

 private:
  struct Edge {
    std::size_t to;
    std::size_t rev;
    double cap;
  };
  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
  double eps_ = 1e-14;

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<std::size_t> queue{s};
    level_[s] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t u = queue[head];
      for (const Edge& e : adj_[u])
        if (e.cap > eps_ && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          queue.push_back(e.to);
        }
    }
    return level_[t] >= 0;
  }

  // One augmenting path in the level graph, found iteratively.
  double augment(std::size_t s, std::size_t t) {
    std::vector<std::size_t> path;  // node stack
    std::vector<std::size_t> via;   // edge index used to leave each node on the path
    path.push_back(s);
    while (!path.empty()) {
      const std::size_t u = path.back();
      if (u == t) {
        double f = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < path.size(); ++i) f = std::min(f, adj_[path[i]][via[i]].cap);
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
          Edge& e = adj_[path[i]][via[i]];
          e.cap -= f;
          adj_[e.to][e.rev].cap += f;
        }
        return f;
      }
      bool advanced = false;
      for (std::size_t& i = it_[u]; i < adj_[u].size(); ++i) {
        const Edge& e = adj_[u][i];
        if (e.cap > eps_ && level_[e.to] == level_[u] + 1) {
          via.push_back(i);
          path.push_back(e.to);
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        level_[u] = -1;  // dead end
        path.pop_back();
        if (!via.empty()) {
          ++it_[path.back()];
          via.pop_back();
        }
      }
    }
    return 0.0;
  }
};

}  // namespace vortexlab::detail
