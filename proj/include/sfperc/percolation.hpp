#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sfperc/rng.hpp"
#include "sfperc/tree.hpp"

namespace sfperc {

// Retention probability p(n) = 1 - c / ln n of the supercritical regime.
// Throws std::domain_error unless c > 0, n >= 2 and ln n > c.
double p_of_n(double c, std::uint64_t n);

// Intact/cut state of the edges e_1..e_n of a tree.
class EdgeMarks {
 public:
  EdgeMarks() = default;
  explicit EdgeMarks(std::vector<std::uint8_t> intact) : intact_(std::move(intact)) {}

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(intact_.size()); }
  bool intact(Vertex j) const { return intact_[j - 1] != 0; }
  std::uint32_t cut_count() const;

 private:
  std::vector<std::uint8_t> intact_;
};

// Keeps e_j iff U_j <= p, with one uniform U_j per edge in label order.
EdgeMarks percolate(const Tree& tree, double p, Rng& rng);

struct Cluster {
  std::uint32_t size = 0;
  std::uint32_t half_edges = 0;
  double y_value = 0.0;
  std::uint32_t birth_rank = 0;
  std::uint32_t generation = 0;
  Vertex root_vertex = 0;
};

// Clusters are indexed by birth rank: cluster 0 holds vertex 0, and cluster
// i >= 1 is the one created by the i-th cut edge in label order.
struct ClusterDecomposition {
  std::vector<std::uint32_t> cluster_of;
  std::vector<Cluster> clusters;
  double beta = 0.0;
  std::uint32_t n_clusters_nonroot = 0;  // N
  std::uint32_t n_generation1 = 0;       // M

  std::uint32_t tree_edges() const noexcept {
    return cluster_of.empty() ? 0 : static_cast<std::uint32_t>(cluster_of.size() - 1);
  }
  // N - M: clusters at distance two or more from the root cluster.
  std::uint32_t delta() const noexcept { return n_clusters_nonroot - n_generation1; }
};

ClusterDecomposition decompose(const Tree& tree, const EdgeMarks& marks, double beta);

// Delta restricted to the subtree spanned by vertices 0..last_vertex, i.e. the
// tree as it stood when last_vertex arrived.
std::uint32_t delta_up_to(const ClusterDecomposition& decomp, Vertex last_vertex);

struct RankedSize {
  std::uint32_t size;
  std::uint32_t birth_rank;
  friend bool operator==(const RankedSize&, const RankedSize&) = default;
};

// All cluster sizes, largest first; ties broken by birth rank.
std::vector<RankedSize> sorted_cluster_sizes(const ClusterDecomposition& decomp);

// Same ordering restricted to non-root clusters, truncated to the first k.
std::vector<RankedSize> top_nonroot_clusters(const ClusterDecomposition& decomp, std::size_t k);

// CSV with columns cluster_index,birth_rank,generation,size,half_edges,y_value,root_vertex.
void write_clusters_csv(std::ostream& out, const ClusterDecomposition& decomp);

}  // namespace sfperc
