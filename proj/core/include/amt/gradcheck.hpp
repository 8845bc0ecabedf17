#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "amt/graph.hpp"
#include "amt/rng.hpp"

namespace amt::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_param;
  int64_t worst_index = -1;
  int64_t coords_checked = 0;
};

/// Compares reverse-mode gradients against central differences
/// (f(x+eps) - f(x-eps)) / 2eps on a sampled subset of coordinates per
/// parameter (all coordinates when a tensor has <= max_coords entries).
///
/// eval(with_grad) must rebuild the graph from scratch, return the scalar
/// loss, and populate parameter gradients when with_grad is true. It must be
/// deterministic; two forward passes that disagree bitwise are an error.
template <typename S>
GradCheckReport gradcheck(const std::function<double(bool)>& eval,
                          const std::vector<Parameter<S>*>& params, double eps, double tol,
                          int64_t max_coords = 16, uint64_t seed = 0x6ead5) {
  const double l1 = eval(false);
  const double l2 = eval(false);
  if (std::memcmp(&l1, &l2, sizeof(double)) != 0)
    throw NumericError("gradcheck: forward pass is not deterministic");

  for (Parameter<S>* p : params) p->zero_grad();
  eval(true);
  std::vector<Tensor<S>> analytic;
  analytic.reserve(params.size());
  for (Parameter<S>* p : params) analytic.push_back(p->grad);

  GradCheckReport rep;
  Rng rng(seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<S>& p = *params[pi];
    const int64_t n = p.value.size();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int64_t i = 0; i < max_coords; ++i) coords.push_back(rng.uniform_int(n));
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    }
    for (int64_t c : coords) {
      const S orig = p.value[c];
      p.value[c] = orig + static_cast<S>(eps);
      const double fp = eval(false);
      p.value[c] = orig - static_cast<S>(eps);
      const double fm = eval(false);
      p.value[c] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double ad = static_cast<double>(analytic[pi][c]);
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
      const double rel = std::abs(fd - ad) / denom;
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_index = c;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace amt::nn
