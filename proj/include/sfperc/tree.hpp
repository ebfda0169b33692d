#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sfperc/rng.hpp"

namespace sfperc {

using Vertex = std::uint32_t;

// Parameters of the degree-plus-beta preferential attachment rule.
struct GrowthParams {
  double beta = 0.0;
  std::uint32_t n = 1;  // number of non-root vertices

  // Throws std::domain_error unless beta > -1 + 1e-9 and n >= 1.
  void validate() const;
};

// Labeled tree on {0..n}; vertex j >= 1 is attached to parent(j) < j, so the
// edge e_j = {j, parent(j)} is created when j arrives.
class Tree {
 public:
  Tree();  // the two-vertex tree {0-1}
  explicit Tree(std::vector<Vertex> parents);  // parents[j-1] = parent of j

  std::uint32_t edges() const noexcept { return static_cast<std::uint32_t>(parent_.size() - 1); }
  std::uint32_t vertices() const noexcept { return static_cast<std::uint32_t>(parent_.size()); }

  Vertex parent(Vertex j) const { return parent_[j]; }
  std::uint32_t degree(Vertex i) const { return degree_[i]; }
  const std::vector<std::uint32_t>& degrees() const noexcept { return degree_; }

  void add_vertex(Vertex parent);

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<Vertex> parent_;  // parent_[0] is unused
  std::vector<std::uint32_t> degree_;
};

struct TimedTree {
  Tree tree;
  // birth_time[j] is the arrival time of vertex j; vertices 0 and 1 exist at time 0.
  std::vector<double> birth_time;

  // Number of vertices present at time t.
  std::uint32_t size_at(double t) const;
};

// P(next vertex attaches to i | tree) = (d(i) + beta) / (2m + beta (m + 1)).
double attach_prob(const Tree& tree, Vertex i, double beta);

Tree grow_tree(const GrowthParams& params, Rng& rng);

// Same jump chain as grow_tree for the same rng state; holding times are drawn
// from a derived stream, Exp(2m + beta (m + 1)) when the tree has m edges.
TimedTree grow_timed_tree(const GrowthParams& params, Rng& rng);

// Continuous-time growth up to a time horizon instead of a vertex count.
// Throws std::runtime_error if more than max_vertices would be needed.
TimedTree grow_timed_tree_until(double beta, double horizon, std::uint32_t max_vertices, Rng& rng);

// Y = 2(size - 1) + beta size for a tree with `size` vertices.
double yule_value(std::uint64_t size, double beta);

// One line per non-root vertex j holding parent(j); timed trees append the
// birth time with 17 significant digits.
void write_tree(std::ostream& out, const Tree& tree);
void write_tree(std::ostream& out, const TimedTree& timed);
Tree read_tree(std::istream& in);

}  // namespace sfperc
