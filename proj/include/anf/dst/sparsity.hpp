#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "anf/dst/set.hpp"
#include "anf/nn/mlp.hpp"

namespace anf::dst {

// 1 - existing / possible weights over every layer. Biases are excluded.
template <class S>
double global_sparsity(const nn::Mlp<S>& net) {
  const auto total = net.total_weights();
  if (total == 0) return 0.0;
  return 1.0 - static_cast<double>(net.existing_weights()) / static_cast<double>(total);
}

// Shape-only counterpart used for parameter accounting without building a net.
struct LayerShape {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t size() const { return out * in; }
};

inline std::vector<LayerShape> layer_shapes(const nn::MlpSpec& spec) {
  std::vector<LayerShape> shapes;
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    auto [out, in] = spec.layer_shape(i);
    shapes.push_back({out, in});
  }
  return shapes;
}

// Single sparsity for every layer but the output so the whole network lands
// at `target` global sparsity. Output layer stays dense (sparsity 0) when
// dense_output is set, otherwise it shares the uniform level.
inline std::vector<double> uniform_allocation(double target, const std::vector<LayerShape>& shapes, bool dense_output) {
  if (shapes.empty()) throw ConfigError("uniform_allocation: no layers");
  if (!(target >= 0.0 && target < 1.0)) throw ConfigError("uniform_allocation: target sparsity must be in [0, 1)");
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.size();
  const std::size_t out_size = dense_output ? shapes.back().size() : 0;
  const std::size_t sparse_total = total - out_size;
  const double budget = (1.0 - target) * static_cast<double>(total);
  std::vector<double> result(shapes.size(), 0.0);
  if (target == 0.0) return result;
  if (static_cast<double>(out_size) >= budget || sparse_total == 0) {
    std::ostringstream msg;
    msg << "uniform_allocation: global sparsity " << target << " is infeasible with a dense output layer ("
        << out_size << " output weights, budget " << budget << ")";
    throw ConfigError(msg.str());
  }
  const double density = (budget - static_cast<double>(out_size)) / static_cast<double>(sparse_total);
  for (std::size_t i = 0; i < shapes.size(); ++i)
    result[i] = (dense_output && i + 1 == shapes.size()) ? 0.0 : 1.0 - density;
  return result;
}

// Existing weights implied by per-layer sparsities (same rounding as init_mask).
inline std::size_t allocated_weights(const std::vector<LayerShape>& shapes, const std::vector<double>& sparsity) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) n += kept_connections(shapes[i].out, shapes[i].in, sparsity[i]);
  return n;
}

// Mask snapshot as CSV: header "rows,cols" line then one "row,col" per connection.
inline void write_mask_csv(const TopologyMask& mask, std::ostream& os) {
  os << "rows,cols\n" << mask.rows() << ',' << mask.cols() << "\nrow,col\n";
  for (auto f : mask.existing()) os << f / mask.cols() << ',' << f % mask.cols() << '\n';
}

inline TopologyMask read_mask_csv(std::istream& is) {
  std::string line;
  std::size_t rows = 0, cols = 0;
  char comma = 0;
  if (!std::getline(is, line) || line != "rows,cols") throw IoError("mask csv: bad header");
  if (!std::getline(is, line)) throw IoError("mask csv: missing shape");
  {
    std::istringstream ls(line);
    if (!(ls >> rows >> comma >> cols)) throw IoError("mask csv: bad shape line");
  }
  if (!std::getline(is, line) || line != "row,col") throw IoError("mask csv: bad connection header");
  auto mask = TopologyMask::empty(rows, cols, 0.0);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t r = 0, c = 0;
    if (!(ls >> r >> comma >> c) || r >= rows || c >= cols) throw IoError("mask csv: bad entry '" + line + "'");
    mask.set_flat(r * cols + c, true);
  }
  return mask;
}

}  // namespace anf::dst
