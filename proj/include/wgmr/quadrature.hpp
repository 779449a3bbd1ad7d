#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace wgmr {

template <typename Scalar>
struct QuadratureResult {
  Scalar value = 0;
  Scalar error = 0;
  int intervals = 0;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar>
struct Segment {
  Scalar a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename Scalar, typename F>
Segment<Scalar> gauss_kronrod_15(const F& f, Scalar a, Scalar b) {
  const Scalar center = (a + b) / 2;
  const Scalar half = (b - a) / 2;
  const Scalar fc = f(center);
  Scalar kronrod = fc * Scalar(kKronrodWeights[7]);
  Scalar gauss = fc * Scalar(kGaussWeights[3]);
  for (std::size_t j = 0; j < 7; ++j) {
    const Scalar dx = half * Scalar(kKronrodNodes[j]);
    const Scalar sum = f(center - dx) + f(center + dx);
    kronrod += Scalar(kKronrodWeights[j]) * sum;
    if (j % 2 == 1) gauss += Scalar(kGaussWeights[j / 2]) * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature of f over [a, b].
///
/// `breakpoints` lists interior points where f has a kink; they seed the
/// initial partition so no panel straddles them. Refinement bisects the panel
/// with the largest error estimate until the total estimate drops below
/// max(abs_tol, rel_tol * |I|) or the panel budget is exhausted. The result is
/// a deterministic function of the inputs.
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate(const F& f, Scalar a, Scalar b,
                                   Scalar abs_tol, Scalar rel_tol = 0,
                                   std::vector<Scalar> breakpoints = {},
                                   int max_intervals = 4000) {
  std::vector<Scalar> edges{a};
  std::sort(breakpoints.begin(), breakpoints.end());
  for (Scalar p : breakpoints)
    if (p > a && p < b) edges.push_back(p);
  edges.push_back(b);

  std::priority_queue<detail::Segment<Scalar>> queue;
  Scalar total = 0;
  Scalar total_error = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto seg = detail::gauss_kronrod_15(f, edges[i], edges[i + 1]);
    total += seg.value;
    total_error += seg.error;
    queue.push(seg);
  }

  int intervals = static_cast<int>(queue.size());
  while (total_error > std::max(abs_tol, rel_tol * std::abs(total)) &&
         intervals < max_intervals) {
    auto worst = queue.top();
    queue.pop();
    const Scalar mid = (worst.a + worst.b) / 2;
    auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++intervals;
  }

  // Re-sum from the final partition to shed the drift of incremental updates.
  std::vector<detail::Segment<Scalar>> final_segments;
  final_segments.reserve(queue.size());
  while (!queue.empty()) {
    final_segments.push_back(queue.top());
    queue.pop();
  }
  std::sort(final_segments.begin(), final_segments.end(),
            [](const auto& l, const auto& r) { return l.a < r.a; });
  Scalar value = 0;
  Scalar error = 0;
  for (const auto& s : final_segments) {
    value += s.value;
    error += s.error;
  }
  return {value, error, intervals};
}

}  // namespace wgmr
