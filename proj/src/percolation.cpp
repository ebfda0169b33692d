#include "sfperc/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace sfperc {

double p_of_n(double c, std::uint64_t n) {
  if (!(c > 0.0)) throw std::domain_error("c must be positive");
  if (n < 2) throw std::domain_error("n must be at least 2");
  const double log_n = std::log(static_cast<double>(n));
  if (!(log_n > c))
    throw std::domain_error(fmt::format("ln n = {:.4f} does not exceed c = {}; p(n) would leave (0,1)", log_n, c));
  return 1.0 - c / log_n;
}

std::uint32_t EdgeMarks::cut_count() const {
  return static_cast<std::uint32_t>(std::count(intact_.begin(), intact_.end(), std::uint8_t{0}));
}

EdgeMarks percolate(const Tree& tree, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("retention probability must lie in [0, 1]");
  std::vector<std::uint8_t> intact(tree.edges());
  for (auto& mark : intact) mark = rng.bernoulli(p) ? 1 : 0;
  return EdgeMarks(std::move(intact));
}

ClusterDecomposition decompose(const Tree& tree, const EdgeMarks& marks, double beta) {
  if (marks.size() != tree.edges())
    throw std::domain_error(fmt::format("{} marks for a tree with {} edges", marks.size(), tree.edges()));

  ClusterDecomposition out;
  out.beta = beta;
  out.cluster_of.assign(tree.vertices(), 0);
  out.clusters.reserve(marks.cut_count() + 1);
  out.clusters.push_back(Cluster{.size = 1});

  // Parents precede children, so one pass in label order sees every parent's
  // cluster before the child needs it.
  for (Vertex j = 1; j < tree.vertices(); ++j) {
    const std::uint32_t up = out.cluster_of[tree.parent(j)];
    if (marks.intact(j)) {
      out.cluster_of[j] = up;
      ++out.clusters[up].size;
      continue;
    }
    const auto rank = static_cast<std::uint32_t>(out.clusters.size());
    out.clusters.push_back(Cluster{.size = 1,
                                   .half_edges = 1,
                                   .birth_rank = rank,
                                   .generation = out.clusters[up].generation + 1,
                                   .root_vertex = j});
    ++out.clusters[up].half_edges;
    out.cluster_of[j] = rank;
  }

  for (auto& cl : out.clusters) {
    cl.y_value = 2.0 * (cl.size - 1.0) + cl.half_edges + beta * cl.size;
    if (cl.generation == 1) ++out.n_generation1;
  }
  out.n_clusters_nonroot = static_cast<std::uint32_t>(out.clusters.size() - 1);
  return out;
}

std::uint32_t delta_up_to(const ClusterDecomposition& decomp, Vertex last_vertex) {
  std::uint32_t deep = 0;
  for (std::size_t i = 1; i < decomp.clusters.size(); ++i) {
    const auto& cl = decomp.clusters[i];
    if (cl.root_vertex > last_vertex) break;  // clusters are in root-label order
    if (cl.generation >= 2) ++deep;
  }
  return deep;
}

namespace {

bool larger_first(const RankedSize& a, const RankedSize& b) {
  return a.size != b.size ? a.size > b.size : a.birth_rank < b.birth_rank;
}

}  // namespace

std::vector<RankedSize> sorted_cluster_sizes(const ClusterDecomposition& decomp) {
  std::vector<RankedSize> out;
  out.reserve(decomp.clusters.size());
  for (const auto& cl : decomp.clusters) out.push_back({cl.size, cl.birth_rank});
  std::sort(out.begin(), out.end(), larger_first);
  return out;
}

std::vector<RankedSize> top_nonroot_clusters(const ClusterDecomposition& decomp, std::size_t k) {
  std::vector<RankedSize> all;
  all.reserve(decomp.clusters.size());
  for (std::size_t i = 1; i < decomp.clusters.size(); ++i)
    all.push_back({decomp.clusters[i].size, decomp.clusters[i].birth_rank});
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), larger_first);
  all.resize(keep);
  return all;
}

void write_clusters_csv(std::ostream& out, const ClusterDecomposition& decomp) {
  out << "cluster_index,birth_rank,generation,size,half_edges,y_value,root_vertex\r\n";
  for (std::size_t i = 0; i < decomp.clusters.size(); ++i) {
    const auto& cl = decomp.clusters[i];
    fmt::print(out, "{},{},{},{},{},{:.17g},{}\r\n", i, cl.birth_rank, cl.generation, cl.size, cl.half_edges,
               cl.y_value, cl.root_vertex);
  }
}

}  // namespace sfperc
