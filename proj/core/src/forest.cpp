#include "forest_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emuval::regress {

double Tree::predict(std::span<const double> x) const {
  std::int32_t i = 0;
  while (true) {
    const Node& node = nodes[static_cast<std::size_t>(i)];
    if (node.feature < 0) return node.value;
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

namespace detail {

struct ForestBuilder::Scratch {
  std::vector<std::uint32_t> weight;   // bootstrap multiplicity per point
  std::vector<std::int64_t> mark;      // node serial owning each point
  std::vector<std::uint32_t> members;  // unique in-bag points, partitioned per node
  std::vector<std::uint32_t> features;
  struct Item {
    double x;
    std::uint32_t idx;
  };
  std::vector<Item> items;
  std::int64_t serial = 0;
};

ForestBuilder::ForestBuilder(const Sample& points) : n_(points.size()), dim_(points.dim()) {
  columns_.resize(n_ * dim_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t f = 0; f < dim_; ++f) columns_[f * n_ + i] = points.at(i, f);
  }
  order_.resize(n_ * dim_);
  for (std::size_t f = 0; f < dim_; ++f) {
    auto first = order_.begin() + static_cast<std::ptrdiff_t>(f * n_);
    std::iota(first, first + static_cast<std::ptrdiff_t>(n_), 0u);
    const double* col = columns_.data() + f * n_;
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n_),
                     [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
}

std::vector<Tree> ForestBuilder::grow(std::span<const std::uint32_t> train,
                                      std::span<const std::uint8_t> labels,
                                      const ForestParams& params, RngStream rng) const {
  params.validate(dim_);
  Scratch scratch;
  scratch.weight.assign(n_, 0);
  scratch.mark.assign(n_, -1);
  scratch.features.resize(dim_);
  std::vector<Tree> trees;
  trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng gen(derive_substream(rng, t));
    trees.push_back(grow_tree(train, labels, params, gen, scratch));
  }
  return trees;
}

Tree ForestBuilder::grow_tree(std::span<const std::uint32_t> train,
                              std::span<const std::uint8_t> labels, const ForestParams& params,
                              Rng& rng, Scratch& s) const {
  Tree tree;
  if (train.empty()) {
    tree.nodes.push_back(Tree::Node{});
    return tree;
  }

  s.members.clear();
  if (params.bootstrap) {
    for (std::size_t j = 0; j < train.size(); ++j) {
      ++s.weight[train[static_cast<std::size_t>(rng.below(train.size()))]];
    }
    for (std::uint32_t i : train) {
      if (s.weight[i] > 0) {
        s.members.push_back(i);
      }
    }
    std::sort(s.members.begin(), s.members.end());
    s.members.erase(std::unique(s.members.begin(), s.members.end()), s.members.end());
  } else {
    for (std::uint32_t i : train) s.weight[i] = 1;
    s.members.assign(train.begin(), train.end());
    std::sort(s.members.begin(), s.members.end());
    s.members.erase(std::unique(s.members.begin(), s.members.end()), s.members.end());
  }

  const std::size_t mtry = params.resolved_mtry(dim_);
  const double min_leaf = static_cast<double>(params.min_leaf);

  struct Pending {
    std::int32_t node;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Pending> stack;
  tree.nodes.push_back(Tree::Node{});
  stack.push_back({0, 0, s.members.size()});

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const std::size_t count = cur.end - cur.begin;

    double w_total = 0.0;
    double s_total = 0.0;
    for (std::size_t j = cur.begin; j < cur.end; ++j) {
      const std::uint32_t i = s.members[j];
      w_total += s.weight[i];
      s_total += s.weight[i] * labels[i];
    }
    auto& leaf = tree.nodes[static_cast<std::size_t>(cur.node)];
    leaf.value = s_total / w_total;
    if (w_total < 2.0 * min_leaf || s_total == 0.0 || s_total == w_total) continue;

    const std::int64_t serial = ++s.serial;
    const bool scan = static_cast<double>(count) * std::log2(static_cast<double>(count) + 1.0) * 4.0 >
                      static_cast<double>(n_);
    if (scan) {
      for (std::size_t j = cur.begin; j < cur.end; ++j) s.mark[s.members[j]] = serial;
    }

    std::iota(s.features.begin(), s.features.end(), 0u);
    const double parent_score = s_total * s_total / w_total;
    double best_score = parent_score + 1e-9;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    for (std::size_t c = 0; c < mtry; ++c) {
      const std::size_t pick = c + static_cast<std::size_t>(rng.below(dim_ - c));
      std::swap(s.features[c], s.features[pick]);
      const std::uint32_t f = s.features[c];
      const double* col = columns_.data() + static_cast<std::size_t>(f) * n_;

      s.items.clear();
      if (scan) {
        const std::uint32_t* ord = order_.data() + static_cast<std::size_t>(f) * n_;
        for (std::size_t r = 0; r < n_; ++r) {
          const std::uint32_t i = ord[r];
          if (s.mark[i] == serial) s.items.push_back({col[i], i});
        }
      } else {
        for (std::size_t j = cur.begin; j < cur.end; ++j) {
          const std::uint32_t i = s.members[j];
          s.items.push_back({col[i], i});
        }
        std::sort(s.items.begin(), s.items.end(),
                  [](const auto& a, const auto& b) { return a.x < b.x; });
      }
      if (s.items.front().x == s.items.back().x) continue;

      double wl = 0.0;
      double sl = 0.0;
      for (std::size_t p = 0; p + 1 < s.items.size(); ++p) {
        const std::uint32_t i = s.items[p].idx;
        wl += s.weight[i];
        sl += s.weight[i] * labels[i];
        if (s.items[p].x == s.items[p + 1].x) continue;
        const double wr = w_total - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double sr = s_total - sl;
        const double score = sl * sl / wl + sr * sr / wr;
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<std::int32_t>(f);
          const double lo = s.items[p].x;
          const double hi = s.items[p + 1].x;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) continue;

    const double* col = columns_.data() + static_cast<std::size_t>(best_feature) * n_;
    auto first = s.members.begin() + static_cast<std::ptrdiff_t>(cur.begin);
    auto last = s.members.begin() + static_cast<std::ptrdiff_t>(cur.end);
    auto mid = std::partition(first, last,
                              [&](std::uint32_t i) { return col[i] <= best_threshold; });
    const std::size_t split = static_cast<std::size_t>(mid - s.members.begin());

    const auto left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(Tree::Node{});
    const auto right = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(Tree::Node{});
    auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    stack.push_back({right, split, cur.end});
    stack.push_back({left, cur.begin, split});
  }

  for (std::uint32_t i : train) s.weight[i] = 0;
  return tree;
}

}  // namespace detail
}  // namespace emuval::regress
