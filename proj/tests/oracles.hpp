// Exhaustive reference implementations shared by the unit and acceptance tests.
#pragma once

#include <functional>
#include <map>
#include <queue>
#include <vector>

#include "sfperc/percolation.hpp"
#include "sfperc/tree.hpp"

namespace oracle {

using sfperc::Tree;
using sfperc::Vertex;

// Calls fn(parents) for every recursive tree with n edges (n! of them).
inline void for_each_tree(std::uint32_t n, const std::function<void(const std::vector<Vertex>&)>& fn) {
  std::vector<Vertex> parents(n, 0);
  std::function<void(std::uint32_t)> rec = [&](std::uint32_t j) {
    if (j > n) return fn(parents);
    for (Vertex p = 0; p < j; ++p) {
      parents[j - 1] = p;
      rec(j + 1);
    }
  };
  rec(1);
}

// Probability of each tree under the attachment chain, keyed by parent array.
inline std::map<std::vector<Vertex>, double> tree_law(std::uint32_t n, double beta) {
  std::map<std::vector<Vertex>, double> law;
  for_each_tree(n, [&](const std::vector<Vertex>& parents) {
    if (parents[0] != 0) return;
    Tree t;
    double prob = 1.0;
    for (std::uint32_t j = 2; j <= n; ++j) {
      prob *= sfperc::attach_prob(t, parents[j - 1], beta);
      t.add_vertex(parents[j - 1]);
    }
    law[parents] = prob;
  });
  return law;
}

struct Component {
  std::vector<Vertex> members;  // sorted
  std::uint32_t half_edges = 0;
  std::uint32_t generation = 0;
};

// Components of the intact forest by breadth-first search on the undirected
// edge list, with cut-edge stubs and cut counts to the root computed directly.
inline std::vector<Component> components(const Tree& tree, const std::vector<bool>& intact) {
  const std::uint32_t v = tree.vertices();
  std::vector<std::vector<std::pair<Vertex, bool>>> adj(v);
  for (Vertex j = 1; j < v; ++j) {
    adj[j].push_back({tree.parent(j), intact[j - 1]});
    adj[tree.parent(j)].push_back({j, intact[j - 1]});
  }
  std::vector<int> comp(v, -1);
  std::vector<Component> out;
  for (Vertex s = 0; s < v; ++s) {
    if (comp[s] >= 0) continue;
    Component c;
    std::queue<Vertex> q;
    q.push(s);
    comp[s] = static_cast<int>(out.size());
    while (!q.empty()) {
      const Vertex x = q.front();
      q.pop();
      c.members.push_back(x);
      for (auto [y, ok] : adj[x]) {
        if (!ok) {
          ++c.half_edges;
          continue;
        }
        if (comp[y] < 0) {
          comp[y] = comp[s];
          q.push(y);
        }
      }
    }
    std::sort(c.members.begin(), c.members.end());
    for (Vertex x = c.members.front(); x != 0; x = tree.parent(x))
      if (!intact[x - 1]) ++c.generation;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace oracle
