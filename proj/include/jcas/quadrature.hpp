#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <vector>

namespace jcas {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> gk15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> gk15_kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gk15_gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double lo, hi, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double lo, double hi, int& evals) {
  const double centre = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(centre);
  double kronrod = fc * gk15_kronrod_weights[7];
  double gauss = fc * gk15_gauss_weights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * gk15_nodes[j];
    const double sum = f(centre - dx) + f(centre + dx);
    kronrod += gk15_kronrod_weights[j] * sum;
    if (j % 2 == 1) gauss += gk15_gauss_weights[j / 2] * sum;
  }
  evals += 15;
  kronrod *= half;
  gauss *= half;
  return {lo, hi, kronrod, std::abs(kronrod - gauss)};
}

} // namespace detail

/// Panels of a globally adaptive Gauss-Kronrod (7/15) refinement of f on
/// [lo, hi], sorted by position. Optional interior breakpoints seed the split.
template <class F>
std::vector<detail::Panel> adaptive_partition(F&& f, double lo, double hi, double abs_tol,
                                              std::span<const double> breakpoints, int max_panels,
                                              int& evaluations) {
  std::vector<detail::Panel> out;
  if (!(hi > lo)) return out;

  std::vector<double> edges{lo};
  for (double b : breakpoints)
    if (b > lo && b < hi) edges.push_back(b);
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::priority_queue<detail::Panel> heap;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto p = detail::gk15(f, edges[i], edges[i + 1], evaluations);
    total_err += p.error;
    heap.push(p);
  }

  while (total_err > abs_tol && static_cast<int>(heap.size()) < max_panels) {
    auto worst = heap.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) break;
    heap.pop();
    auto left = detail::gk15(f, worst.lo, mid, evaluations);
    auto right = detail::gk15(f, mid, worst.hi, evaluations);
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::sort(out.begin(), out.end(), [](const detail::Panel& a, const detail::Panel& b) { return a.lo < b.lo; });
  return out;
}

/// Kronrod and embedded Gauss weights at the 15 nodes of [lo, hi].
struct Gk15Node {
  double x, kronrod, gauss;
};

inline std::array<Gk15Node, 15> gk15_rule(double lo, double hi) {
  std::array<Gk15Node, 15> out{};
  const double centre = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  out[0] = {centre, half * detail::gk15_kronrod_weights[7], half * detail::gk15_gauss_weights[3]};
  for (int j = 0; j < 7; ++j) {
    const double dx = half * detail::gk15_nodes[j];
    const double g = (j % 2 == 1) ? half * detail::gk15_gauss_weights[j / 2] : 0.0;
    const double k = half * detail::gk15_kronrod_weights[j];
    out[1 + 2 * j] = {centre - dx, k, g};
    out[2 + 2 * j] = {centre + dx, k, g};
  }
  return out;
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [lo, hi] with an
/// absolute error target. Optional interior breakpoints seed the panel list.
template <class F>
QuadratureResult integrate(F&& f, double lo, double hi, double abs_tol = 1e-8,
                           std::span<const double> breakpoints = {}, int max_panels = 4000) {
  QuadratureResult out;
  auto panels = adaptive_partition(f, lo, hi, abs_tol, breakpoints, max_panels, out.evaluations);
  for (const auto& p : panels) {
    out.value += p.value;
    out.abs_error += p.error;
  }
  out.converged = out.abs_error <= abs_tol;
  return out;
}

} // namespace jcas
