#include "sfperc/tree.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace sfperc {

namespace {

constexpr double kBetaMargin = 1e-9;

double total_weight(std::uint32_t edges, double beta) {
  return 2.0 * edges + beta * (edges + 1.0);
}

// Draws the attachment vertex for a tree with m edges. `endpoints` lists both
// ends of every edge, so a uniform entry is a vertex picked proportionally to
// its degree.
class AttachmentSampler {
 public:
  AttachmentSampler(double beta, std::uint32_t n) : beta_(beta) {
    endpoints_.reserve(2 * static_cast<std::size_t>(n));
  }

  void record_edge(Vertex child, Vertex parent) {
    endpoints_.push_back(child);
    endpoints_.push_back(parent);
  }

  Vertex draw(const Tree& tree, Rng& rng) {
    const std::uint32_t m = tree.edges();
    if (beta_ >= 0.0) {
      const double degree_mass = 2.0 * m;
      if (rng.uniform() * total_weight(m, beta_) <= degree_mass) return by_degree(rng);
      return static_cast<Vertex>(rng.below(m + 1));
    }
    // Negative beta: thin the degree-proportional proposal by (d + beta) / d >= 1 + beta.
    for (;;) {
      const Vertex v = by_degree(rng);
      const double d = tree.degree(v);
      if (rng.uniform() * d <= d + beta_) return v;
    }
  }

 private:
  Vertex by_degree(Rng& rng) const { return endpoints_[rng.below(endpoints_.size())]; }

  double beta_;
  std::vector<Vertex> endpoints_;
};

template <typename OnAttach>
Tree grow(const GrowthParams& params, Rng& rng, OnAttach&& on_attach) {
  Tree tree;
  AttachmentSampler sampler(params.beta, params.n);
  sampler.record_edge(1, 0);
  while (tree.edges() < params.n) {
    if (!on_attach(tree)) break;
    const Vertex v = sampler.draw(tree, rng);
    const Vertex child = tree.vertices();
    tree.add_vertex(v);
    sampler.record_edge(child, v);
  }
  return tree;
}

}  // namespace

void GrowthParams::validate() const {
  if (!(beta > -1.0 + kBetaMargin))
    throw std::domain_error(fmt::format("beta must exceed -1 (got {})", beta));
  if (n < 1) throw std::domain_error("n must be at least 1");
}

Tree::Tree() : parent_{0, 0}, degree_{1, 1} {}

Tree::Tree(std::vector<Vertex> parents) : Tree() {
  if (parents.empty() || parents[0] != 0)
    throw std::domain_error("vertex 1 must be attached to the root");
  parent_.reserve(parents.size() + 1);
  degree_.reserve(parents.size() + 1);
  for (std::size_t j = 1; j < parents.size(); ++j) {
    if (parents[j] > j) throw std::domain_error(fmt::format("vertex {} attached to a later vertex", j + 1));
    add_vertex(parents[j]);
  }
}

void Tree::add_vertex(Vertex parent) {
  parent_.push_back(parent);
  degree_.push_back(1);
  ++degree_[parent];
}

std::uint32_t TimedTree::size_at(double t) const {
  auto it = std::upper_bound(birth_time.begin(), birth_time.end(), t);
  return static_cast<std::uint32_t>(it - birth_time.begin());
}

double attach_prob(const Tree& tree, Vertex i, double beta) {
  if (i >= tree.vertices())
    throw std::domain_error(fmt::format("vertex {} not in a tree on {} vertices", i, tree.vertices()));
  return (tree.degree(i) + beta) / total_weight(tree.edges(), beta);
}

Tree grow_tree(const GrowthParams& params, Rng& rng) {
  params.validate();
  return grow(params, rng, [](const Tree&) { return true; });
}

TimedTree grow_timed_tree(const GrowthParams& params, Rng& rng) {
  params.validate();
  Rng clock = rng.derive(1);
  TimedTree out;
  out.birth_time.reserve(static_cast<std::size_t>(params.n) + 1);
  out.birth_time = {0.0, 0.0};
  double now = 0.0;
  out.tree = grow(params, rng, [&](const Tree& tree) {
    now += clock.exponential(total_weight(tree.edges(), params.beta));
    out.birth_time.push_back(now);
    return true;
  });
  return out;
}

TimedTree grow_timed_tree_until(double beta, double horizon, std::uint32_t max_vertices, Rng& rng) {
  if (max_vertices < 2) throw std::domain_error("max_vertices must be at least 2");
  GrowthParams params{beta, max_vertices - 1};
  params.validate();
  Rng clock = rng.derive(1);
  TimedTree out;
  out.birth_time = {0.0, 0.0};
  double now = 0.0;
  bool reached = false;
  out.tree = grow(params, rng, [&](const Tree& tree) {
    now += clock.exponential(total_weight(tree.edges(), beta));
    if (now > horizon) {
      reached = true;
      return false;
    }
    out.birth_time.push_back(now);
    return true;
  });
  if (!reached)
    throw std::runtime_error(fmt::format("tree reached {} vertices before time {}", max_vertices, horizon));
  return out;
}

double yule_value(std::uint64_t size, double beta) {
  if (size < 2) throw std::domain_error("yule_value needs a tree with at least two vertices");
  return 2.0 * static_cast<double>(size - 1) + beta * static_cast<double>(size);
}

void write_tree(std::ostream& out, const Tree& tree) {
  for (Vertex j = 1; j < tree.vertices(); ++j) fmt::print(out, "{}\n", tree.parent(j));
}

void write_tree(std::ostream& out, const TimedTree& timed) {
  const Tree& tree = timed.tree;
  for (Vertex j = 1; j < tree.vertices(); ++j)
    fmt::print(out, "{} {:.17g}\n", tree.parent(j), timed.birth_time[j]);
}

Tree read_tree(std::istream& in) {
  std::vector<Vertex> parents;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    parents.push_back(static_cast<Vertex>(std::stoul(line)));
  }
  return Tree(std::move(parents));
}

}  // namespace sfperc
