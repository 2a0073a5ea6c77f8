#pragma once

#include "emuval/regress.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace emuval::regress::detail {

/// Grows CART regression trees over a fixed point set. Keeps feature-major
/// columns and each feature's global sort order so large nodes can be
/// ordered by a linear scan instead of a sort.
class ForestBuilder {
 public:
  explicit ForestBuilder(const Sample& points);

  std::vector<Tree> grow(std::span<const std::uint32_t> train,
                         std::span<const std::uint8_t> labels, const ForestParams& params,
                         RngStream rng) const;

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }

 private:
  struct Scratch;
  Tree grow_tree(std::span<const std::uint32_t> train, std::span<const std::uint8_t> labels,
                 const ForestParams& params, Rng& rng, Scratch& scratch) const;

  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> columns_;         // columns_[f * n_ + i]
  std::vector<std::uint32_t> order_;    // order_[f * n_ + r]: r-th smallest point on f
};

}  // namespace emuval::regress::detail
