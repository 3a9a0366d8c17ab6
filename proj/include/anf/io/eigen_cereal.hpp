#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <cereal/cereal.hpp>

// Raw-byte cereal support for dense Eigen matrices; binary archives keep
// every value bit-exact.
namespace cereal {

template <class Archive, class S, int R, int C, int O, int MR, int MC>
void save(Archive& ar, const Eigen::Matrix<S, R, C, O, MR, MC>& m) {
  const std::int64_t rows = m.rows(), cols = m.cols();
  ar(rows, cols);
  ar(binary_data(m.data(), static_cast<std::size_t>(m.size()) * sizeof(S)));
}

template <class Archive, class S, int R, int C, int O, int MR, int MC>
void load(Archive& ar, Eigen::Matrix<S, R, C, O, MR, MC>& m) {
  std::int64_t rows = 0, cols = 0;
  ar(rows, cols);
  m.resize(rows, cols);
  ar(binary_data(m.data(), static_cast<std::size_t>(m.size()) * sizeof(S)));
}

}  // namespace cereal
