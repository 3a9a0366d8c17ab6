#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include <cereal/types/vector.hpp>

#include "anf/error.hpp"

namespace anf::dst {

// Binary existence map over an [out x in] weight matrix. Positions are
// addressed by row-major flat index: flat = row * cols + col.
class TopologyMask {
 public:
  TopologyMask() = default;

  // Full (dense) mask.
  TopologyMask(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), bits_(rows * cols, 1), count_(rows * cols), target_density_(1.0) {}

  static TopologyMask empty(std::size_t rows, std::size_t cols, double target_density) {
    TopologyMask m(rows, cols);
    std::fill(m.bits_.begin(), m.bits_.end(), std::uint8_t{0});
    m.count_ = 0;
    m.target_density_ = target_density;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return bits_.size(); }
  std::size_t count() const { return count_; }
  double target_density() const { return target_density_; }
  double density() const { return size() == 0 ? 0.0 : static_cast<double>(count_) / static_cast<double>(size()); }

  bool test(std::size_t row, std::size_t col) const { return bits_[row * cols_ + col] != 0; }
  bool test_flat(std::size_t flat) const { return bits_[flat] != 0; }

  void set_flat(std::size_t flat, bool on) {
    if (flat >= bits_.size()) throw UsageError("TopologyMask: flat index out of range");
    const bool was = bits_[flat] != 0;
    if (was == on) return;
    bits_[flat] = on ? 1 : 0;
    if (on) ++count_; else --count_;
  }

  std::size_t flat(std::size_t row, std::size_t col) const { return row * cols_ + col; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // Flat indices of existing connections, ascending.
  std::vector<std::size_t> existing() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> vacant() const {
    std::vector<std::size_t> out;
    out.reserve(bits_.size() - count_);
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (!bits_[i]) out.push_back(i);
    return out;
  }

  bool operator==(const TopologyMask& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && bits_ == o.bits_;
  }

  template <class Archive>
  void serialize(Archive& ar) {
    ar(rows_, cols_, bits_, count_, target_density_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
  double target_density_ = 1.0;
};

}  // namespace anf::dst
