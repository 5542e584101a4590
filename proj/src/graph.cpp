#include "coopmpc/graph.hpp"

#include <algorithm>
#include <queue>

#include "coopmpc/errors.hpp"

namespace coopmpc {

Graph::Graph(int vertex_count, const std::vector<std::pair<int, int>>& edges) {
  if (vertex_count < 1) throw ConfigError("graph: needs at least one vertex");
  adj_.resize(vertex_count);
  for (auto [a, b] : edges) {
    if (a == b) throw ConfigError("graph: self-loop");
    if (a < 0 || b < 0 || a >= vertex_count || b >= vertex_count)
      throw ConfigError("graph: edge endpoint out of range");
    if (a > b) std::swap(a, b);
    edges_.emplace_back(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (auto [a, b] : edges_) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  for (auto& list : adj_) std::sort(list.begin(), list.end());

  std::vector<char> seen(vertex_count, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : adj_[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        frontier.push(w);
      }
  }
  if (reached != vertex_count) throw ConfigError("graph: not connected");
}

bool Graph::adjacent(int i, int j) const {
  const auto& list = adj_.at(i);
  return std::binary_search(list.begin(), list.end(), j);
}

std::vector<std::vector<int>> parallel_groups(const Graph& graph) {
  const int m = graph.size();
  std::vector<int> layer(m, 0);
  int depth = 0;
  for (int i = 0; i < m; ++i) {
    for (int j : graph.neighbors(i))
      if (j < i) layer[i] = std::max(layer[i], layer[j] + 1);
    depth = std::max(depth, layer[i]);
  }
  std::vector<std::vector<int>> groups(depth + 1);
  for (int i = 0; i < m; ++i) groups[layer[i]].push_back(i);
  return groups;
}

}  // namespace coopmpc
