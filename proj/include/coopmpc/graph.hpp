#pragma once

#include <utility>
#include <vector>

namespace coopmpc {

// undirected communication graph, required connected; neighbor lists kept sorted
class Graph {
 public:
  Graph() = default;  // empty graph placeholder
  Graph(int vertex_count, const std::vector<std::pair<int, int>>& edges);

  int size() const { return static_cast<int>(adj_.size()); }
  const std::vector<int>& neighbors(int i) const { return adj_.at(i); }
  bool adjacent(int i, int j) const;
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

 private:
  std::vector<std::vector<int>> adj_;
  std::vector<std::pair<int, int>> edges_;  // normalized i < j, sorted, deduplicated
};

// independent groups that reproduce the sequential mailbox reads when processed in
// order: every agent's smaller-indexed neighbors land in strictly earlier groups
std::vector<std::vector<int>> parallel_groups(const Graph& graph);

}  // namespace coopmpc
