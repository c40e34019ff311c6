#pragma once

#include <vector>

#include "openintent/common.hpp"

namespace openintent {

struct Assignment {
  std::vector<std::size_t> column_of_row;  // a permutation
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (O(n^3) potentials
/// method). Rejects non-square and non-finite input.
Assignment hungarian(const Eigen::MatrixXd& cost);

}  // namespace openintent
