#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cibs {

/// Square boolean matrix with 64-bit rows; used for reachability.
class BitMatrix {
 public:
  BitMatrix() = default;
  explicit BitMatrix(size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  size_t size() const { return n_; }
  bool get(size_t i, size_t j) const { return (bits_[i * words_ + j / 64] >> (j % 64)) & 1u; }
  void set(size_t i, size_t j) { bits_[i * words_ + j / 64] |= uint64_t{1} << (j % 64); }
  void or_row(size_t dst, size_t src) {
    for (size_t w = 0; w < words_; ++w) bits_[dst * words_ + w] |= bits_[src * words_ + w];
  }
  size_t row_count(size_t i) const {
    size_t c = 0;
    for (size_t w = 0; w < words_; ++w) c += static_cast<size_t>(__builtin_popcountll(bits_[i * words_ + w]));
    return c;
  }

  /// Transitive closure of the adjacency relation in place. Returns false on a cycle.
  bool close() {
    std::vector<int> indeg(n_, 0);
    for (size_t i = 0; i < n_; ++i)
      for (size_t j = 0; j < n_; ++j)
        if (get(i, j)) ++indeg[j];
    std::vector<size_t> order;
    std::vector<size_t> stack;
    for (size_t i = 0; i < n_; ++i)
      if (indeg[i] == 0) stack.push_back(i);
    while (!stack.empty()) {
      size_t i = stack.back();
      stack.pop_back();
      order.push_back(i);
      for (size_t j = 0; j < n_; ++j)
        if (get(i, j) && --indeg[j] == 0) stack.push_back(j);
    }
    if (order.size() != n_) return false;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      size_t i = *it;
      for (size_t j = 0; j < n_; ++j)
        if (j != i && get(i, j)) or_row(i, j);
    }
    return true;
  }

 private:
  size_t n_ = 0;
  size_t words_ = 0;
  std::vector<uint64_t> bits_;
};

}  // namespace cibs
