#pragma once

// Dense linear assignment (min-cost perfect matching) on an n x n cost matrix.
//
// Small problems go straight to shortest augmenting paths (Dijkstra on reduced
// costs, Jonker-Volgenant style). Large problems get column prices from an
// epsilon-scaling auction (or from a warm start), solve the assignment
// restricted to the k cheapest reduced-cost columns of every row, then check
// every row against the full matrix and re-augment the ones that are not
// tight, which makes the result exact.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

namespace procwass::detail {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Assignment {
  std::vector<Eigen::Index> row_to_col;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_potential;  // u
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> col_potential;  // v, u_i + v_j <= c_ij
};

inline constexpr Eigen::Index kAuctionThreshold = 300;

inline constexpr Eigen::Index kCandidates = 32;

/// Forward auction with epsilon scaling from eps_start down to eps_final,
/// starting from the given column prices.
template <typename Scalar>
void auction_prices(const RowMat<Scalar>& c, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& price, Scalar eps_start,
                    Scalar eps_final) {
  const Eigen::Index n = c.rows();
  constexpr Scalar kFactor = 8;
  std::vector<Eigen::Index> col_to_row(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> row_to_col(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> unassigned;
  Scalar* p = price.data();

  for (Scalar eps = std::max(eps_start, eps_final);; eps = std::max(eps / kFactor, eps_final)) {
    std::fill(col_to_row.begin(), col_to_row.end(), -1);
    std::fill(row_to_col.begin(), row_to_col.end(), -1);
    unassigned.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) unassigned[i] = n - 1 - i;
    while (!unassigned.empty()) {
      const Eigen::Index i = unassigned.back();
      unassigned.pop_back();
      const Scalar* row = c.data() + i * n;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      Scalar second = best;
      Eigen::Index arg = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const Scalar val = row[j] + p[j];
        if (val < best) {
          second = best;
          best = val;
          arg = j;
        } else if (val < second) {
          second = val;
        }
      }
      p[arg] += (second - best) + eps;
      const Eigen::Index previous = col_to_row[arg];
      col_to_row[arg] = i;
      row_to_col[i] = arg;
      if (previous >= 0) {
        row_to_col[previous] = -1;
        unassigned.push_back(previous);
      }
    }
    if (eps <= eps_final) break;
  }
}

/// Shortest augmenting paths on the graph keeping, for every row, the k
/// columns of smallest reduced cost c_ij - v_j. Rows with no augmenting path
/// in that graph stay unassigned. `v` is updated in place.
template <typename Scalar>
void sparse_augment(const RowMat<Scalar>& c, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v, Eigen::Index k,
                    std::vector<Eigen::Index>& row_to_col, std::vector<Eigen::Index>& col_to_row) {
  const Eigen::Index n = c.rows();
  k = std::min(k, n);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(n * k));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reduced(n);
  std::vector<Scalar> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    reduced = c.row(i).transpose() - v;
    std::copy(reduced.data(), reduced.data() + n, order.begin());
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end());
    const Scalar kth = order[static_cast<std::size_t>(k - 1)];
    Eigen::Index* out = cols.data() + i * k;
    Eigen::Index filled = 0;
    for (Eigen::Index j = 0; j < n && filled < k; ++j)
      if (reduced(j) < kth) out[filled++] = j;
    for (Eigen::Index j = 0; j < n && filled < k; ++j)
      if (reduced(j) == kth) out[filled++] = j;
  }

  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> dist(static_cast<std::size_t>(n), kInf);
  std::vector<Eigen::Index> pred(static_cast<std::size_t>(n));
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> touched, scanned;
  using Item = std::pair<Scalar, Eigen::Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;

  for (Eigen::Index start = 0; start < n; ++start) {
    if (row_to_col[start] >= 0) continue;
    for (const Eigen::Index j : touched) {
      dist[j] = kInf;
      done[j] = 0;
    }
    touched.clear();
    scanned.clear();
    heap = {};
    const auto relax = [&](Eigen::Index r, Scalar base) {
      const Scalar* row = c.data() + r * n;
      for (Eigen::Index t = 0; t < k; ++t) {
        const Eigen::Index q = cols[r * k + t];
        if (done[q]) continue;
        const Scalar cand = base + row[q] - v(q);
        if (cand < dist[q]) {
          if (dist[q] == kInf) touched.push_back(q);
          dist[q] = cand;
          pred[q] = r;
          heap.push({cand, q});
        }
      }
    };
    relax(start, 0);
    Eigen::Index sink = -1;
    Scalar reached = 0;
    while (!heap.empty()) {
      const auto [d, j] = heap.top();
      heap.pop();
      if (done[j] || d > dist[j]) continue;
      done[j] = 1;
      scanned.push_back(j);
      reached = d;
      const Eigen::Index r = col_to_row[j];
      if (r < 0) {
        sink = j;
        break;
      }
      relax(r, d - (c(r, j) - v(j)));
    }
    if (sink < 0) continue;
    for (const Eigen::Index j : scanned) v(j) += dist[j] - reached;
    Eigen::Index j = sink;
    while (true) {
      const Eigen::Index r = pred[j];
      col_to_row[j] = r;
      std::swap(row_to_col[r], j);
      if (r == start) break;
    }
  }
}

/// Completes a partial matching by shortest augmenting paths. `v` must be
/// (near) dual feasible and every matched edge tight under it.
template <typename Scalar>
void augment_free_rows(const RowMat<Scalar>& c, std::vector<Eigen::Index>& row_to_col,
                       std::vector<Eigen::Index>& col_to_row,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  const Eigen::Index n = c.rows();
  std::vector<Scalar> dist(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> pred(static_cast<std::size_t>(n));
  std::vector<char> done(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> scanned;
  scanned.reserve(static_cast<std::size_t>(n));

  for (Eigen::Index start = 0; start < n; ++start) {
    if (row_to_col[start] >= 0) continue;
    scanned.clear();
    const Scalar* row = c.data() + start * n;
    for (Eigen::Index j = 0; j < n; ++j) {
      dist[j] = row[j] - v(j);
      pred[j] = start;
      done[j] = 0;
    }
    Eigen::Index sink = -1;
    Scalar reached = 0;
    while (sink < 0) {
      Eigen::Index jmin = -1;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!done[j] && dist[j] < best) {
          best = dist[j];
          jmin = j;
        }
      }
      reached = best;
      done[jmin] = 1;
      scanned.push_back(jmin);
      const Eigen::Index r = col_to_row[jmin];
      if (r < 0) {
        sink = jmin;
        break;
      }
      const Scalar* rrow = c.data() + r * n;
      const Scalar base = reached - (rrow[jmin] - v(jmin));
      for (Eigen::Index j = 0; j < n; ++j) {
        if (done[j]) continue;
        const Scalar cand = base + rrow[j] - v(j);
        if (cand < dist[j]) {
          dist[j] = cand;
          pred[j] = r;
        }
      }
    }
    for (const Eigen::Index j : scanned) v(j) += dist[j] - reached;
    Eigen::Index j = sink;
    while (true) {
      const Eigen::Index r = pred[j];
      col_to_row[j] = r;
      std::swap(row_to_col[r], j);
      if (r == start) break;
    }
  }
}

/// Drops matched pairs that are not tight against the full matrix under `v`;
/// returns how many rows are left unassigned.
template <typename Scalar>
Eigen::Index drop_loose_pairs(const RowMat<Scalar>& c, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v,
                              std::vector<Eigen::Index>& row_to_col, std::vector<Eigen::Index>& col_to_row) {
  const Eigen::Index n = c.rows();
  const Scalar tight = Scalar(1e-13) * std::max(c.cwiseAbs().maxCoeff(), Scalar(1));
  Eigen::Index loose = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = row_to_col[i];
    if (j >= 0 && c(i, j) - v(j) - (c.row(i).transpose() - v).minCoeff() > tight) {
      col_to_row[j] = -1;
      row_to_col[i] = -1;
    }
    loose += row_to_col[i] < 0;
  }
  return loose;
}

/// Solves the assignment problem exactly. `warm_v`, the column potentials of
/// a previous solve (possibly for a slightly different cost matrix), replaces
/// the auction as the source of starting prices for large problems.
template <typename Scalar>
Assignment<Scalar> solve_assignment(const RowMat<Scalar>& c,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* warm_v = nullptr) {
  using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = c.rows();
  Assignment<Scalar> out;
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> col_to_row(static_cast<std::size_t>(n), -1);
  VecS v;

  if (n > kAuctionThreshold) {
    const auto restricted = [&](VecS start) {
      std::fill(out.row_to_col.begin(), out.row_to_col.end(), -1);
      std::fill(col_to_row.begin(), col_to_row.end(), -1);
      v = std::move(start);
      sparse_augment<Scalar>(c, v, kCandidates, out.row_to_col, col_to_row);
      return drop_loose_pairs<Scalar>(c, v, out.row_to_col, col_to_row);
    };
    const Eigen::Index budget = std::max<Eigen::Index>(kCandidates, n / 20);
    if (!(warm_v && warm_v->size() == n && restricted(*warm_v) <= budget)) {
      VecS price = VecS::Zero(n);
      const Scalar scale = std::max(c.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
      auction_prices<Scalar>(c, price, scale / Scalar(4), Scalar(1e-4) * scale);
      restricted(-price);
    }
  } else {
    v = (warm_v && warm_v->size() == n) ? VecS(*warm_v) : VecS(c.colwise().minCoeff().transpose());
  }

  augment_free_rows<Scalar>(c, out.row_to_col, col_to_row, v);

  out.col_potential = v;
  out.row_potential.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Smallest reduced row value keeps (u, v) dual feasible after rounding.
    out.row_potential(i) = (c.row(i).transpose() - v).minCoeff();
  }
  return out;
}

}  // namespace procwass::detail
