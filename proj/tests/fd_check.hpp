#pragma once

// Finite-difference gradient oracle used across the test suites. Central
// differences with step h; independent of the library's backward pass.

#include "microt/net.hpp"
#include "microt/tensor.hpp"

#include <cmath>
#include <functional>

namespace microt::testing {

inline double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / (std::max(std::abs(analytic), std::abs(fd)) + 1e-4);
}

/// Central difference d(loss)/d(value at *slot).
template <typename LossFn>
double fd_at(double* slot, LossFn&& loss, double h = 1e-4) {
  const double saved = *slot;
  *slot = saved + h;
  const double up = loss();
  *slot = saved - h;
  const double down = loss();
  *slot = saved;
  return (up - down) / (2.0 * h);
}

/// Max relative error between an analytic tape and finite differences over
/// every trainable parameter of the net. `loss` re-evaluates the full loss
/// with the net's current parameters.
template <typename LossFn>
double fd_check_params(BlockNet& net, const GradientTape& tape, LossFn&& loss, double h = 1e-4) {
  double worst = 0.0;
  auto scan = [&](Tensor& param, const Tensor& grad) {
    for (Eigen::Index i = 0; i < param.data.size(); ++i) {
      const double fd = fd_at(&param.data[i], loss, h);
      worst = std::max(worst, rel_err(grad.data[i], fd));
    }
  };
  for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
    if (!net.blocks[bi].has_params()) continue;
    scan(net.blocks[bi].weight, tape.blocks[bi].weight);
    scan(net.blocks[bi].bias, tape.blocks[bi].bias);
  }
  if (net.head) {
    scan(net.head->dense.weight, tape.head->weight);
    scan(net.head->dense.bias, tape.head->bias);
  }
  return worst;
}

/// Max relative error for d(loss)/d(input) against finite differences.
template <typename LossFn>
double fd_check_input(Tensor& input, const Tensor& input_grad, LossFn&& loss, double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < input.data.size(); ++i) {
    const double fd = fd_at(&input.data[i], loss, h);
    worst = std::max(worst, rel_err(input_grad.data[i], fd));
  }
  return worst;
}

}  // namespace microt::testing
