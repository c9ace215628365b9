#pragma once

// Primal network simplex on the bipartite transportation graph (rows are
// sources, columns are sinks). The basis is a spanning tree of n + m - 1
// cells; potentials are recomputed by a tree walk after every pivot.
// Block-search pricing, with Bland's rule after long runs of degenerate
// pivots to rule out cycling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "procwass/error.hpp"

namespace procwass::detail {

template <typename Scalar>
struct TransportSolution {
  struct Cell {
    Eigen::Index row;
    Eigen::Index col;
    Scalar flow;
  };
  std::vector<Cell> basis;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_potential;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> col_potential;
  long pivots = 0;
};

template <typename Scalar, typename CostRows>
class TransportSimplex {
 public:
  using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  TransportSimplex(const VecS& supply, const VecS& demand, const CostRows& cost)
      : n_(supply.size()), m_(demand.size()), supply_(supply), demand_(demand), cost_(cost) {}

  TransportSolution<Scalar> run() {
    initial_basis();
    const Eigen::Index nodes = n_ + m_;
    adjacency_.assign(static_cast<std::size_t>(nodes), {});
    for (std::size_t k = 0; k < cells_.size(); ++k) link(k);

    const Scalar scale = std::max(cost_.cwiseAbs().maxCoeff(), Scalar(1));
    const Scalar tol = Scalar(1e-12) * scale;
    const Eigen::Index total = n_ * m_;
    const Eigen::Index block = std::max<Eigen::Index>(
        std::min<Eigen::Index>(total, 16), Eigen::Index(std::sqrt(double(total))));
    const long max_pivots = 50L * long(total) + 10000L;

    Eigen::Index cursor = 0;
    long degenerate_run = 0;
    long pivots = 0;
    for (;;) {
      compute_potentials();
      const bool bland = degenerate_run > long(nodes);
      Eigen::Index enter = -1;
      Scalar best = -tol;
      if (bland) {
        for (Eigen::Index idx = 0; idx < total; ++idx) {
          if (reduced(idx) < -tol) {
            enter = idx;
            break;
          }
        }
      } else {
        Eigen::Index scanned = 0;
        while (scanned < total) {
          const Eigen::Index stop = std::min(total, scanned + block);
          for (; scanned < stop; ++scanned) {
            const Scalar r = reduced(cursor);
            if (r < best) {
              best = r;
              enter = cursor;
            }
            if (++cursor == total) cursor = 0;
          }
          if (enter >= 0) break;
        }
      }
      if (enter < 0) break;
      if (++pivots > max_pivots) {
        throw Error(Errc::NotConverged, "network simplex exceeded pivot limit");
      }
      const bool moved = pivot(enter / m_, enter % m_, bland);
      degenerate_run = moved ? 0 : degenerate_run + 1;
    }

    TransportSolution<Scalar> out;
    out.pivots = pivots;
    out.row_potential = u_;
    out.col_potential = v_;
    for (const auto& c : cells_) out.basis.push_back({c.row, c.col, std::max(c.flow, Scalar(0))});
    return out;
  }

 private:
  struct BasicCell {
    Eigen::Index row;
    Eigen::Index col;
    Scalar flow;
  };
  struct Edge {
    Eigen::Index node;
    std::size_t cell;
  };

  Scalar reduced(Eigen::Index idx) const {
    const Eigen::Index i = idx / m_;
    const Eigen::Index j = idx % m_;
    return cost_(i, j) - u_(i) - v_(j);
  }

  // Northwest-corner start; ties advance the row so the tree has n + m - 1 cells.
  void initial_basis() {
    VecS a = supply_;
    VecS b = demand_;
    Eigen::Index i = 0;
    Eigen::Index j = 0;
    cells_.clear();
    for (;;) {
      const Scalar x = std::min(a(i), b(j));
      cells_.push_back({i, j, x});
      a(i) -= x;
      b(j) -= x;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (i == n_ - 1) {
        ++j;
      } else if (j == m_ - 1) {
        ++i;
      } else if (a(i) <= b(j)) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void link(std::size_t k) {
    const Eigen::Index r = cells_[k].row;
    const Eigen::Index c = n_ + cells_[k].col;
    adjacency_[r].push_back({c, k});
    adjacency_[c].push_back({r, k});
  }

  void unlink(std::size_t k) {
    const Eigen::Index r = cells_[k].row;
    const Eigen::Index c = n_ + cells_[k].col;
    auto drop = [k](std::vector<Edge>& list) {
      list.erase(std::find_if(list.begin(), list.end(), [k](const Edge& e) { return e.cell == k; }));
    };
    drop(adjacency_[r]);
    drop(adjacency_[c]);
  }

  void compute_potentials() {
    const Eigen::Index nodes = n_ + m_;
    u_.setZero(n_);
    v_.setZero(m_);
    parent_.assign(static_cast<std::size_t>(nodes), -1);
    parent_cell_.assign(static_cast<std::size_t>(nodes), 0);
    depth_.assign(static_cast<std::size_t>(nodes), -1);
    stack_.clear();
    stack_.push_back(0);
    depth_[0] = 0;
    while (!stack_.empty()) {
      const Eigen::Index node = stack_.back();
      stack_.pop_back();
      for (const Edge& e : adjacency_[node]) {
        if (depth_[e.node] >= 0) continue;
        depth_[e.node] = depth_[node] + 1;
        parent_[e.node] = node;
        parent_cell_[e.node] = e.cell;
        const BasicCell& c = cells_[e.cell];
        const Scalar cij = cost_(c.row, c.col);
        if (e.node >= n_) {
          v_(e.node - n_) = cij - u_(node);
        } else {
          u_(e.node) = cij - v_(node - n_);
        }
        stack_.push_back(e.node);
      }
    }
  }

  // Returns true when flow actually moved (non-degenerate pivot).
  bool pivot(Eigen::Index row, Eigen::Index col, bool bland) {
    // Cycle: entering cell (+), then tree path from the column node back to the
    // row node with alternating -, +, -, ...
    path_from_col_.clear();
    path_from_row_.clear();
    Eigen::Index a = n_ + col;
    Eigen::Index b = row;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        path_from_col_.push_back(parent_cell_[a]);
        a = parent_[a];
      } else {
        path_from_row_.push_back(parent_cell_[b]);
        b = parent_[b];
      }
    }
    cycle_.assign(path_from_col_.begin(), path_from_col_.end());
    cycle_.insert(cycle_.end(), path_from_row_.rbegin(), path_from_row_.rend());

    Scalar theta = std::numeric_limits<Scalar>::infinity();
    std::size_t leave = cycle_.size();
    for (std::size_t k = 0; k < cycle_.size(); k += 2) {
      const BasicCell& c = cells_[cycle_[k]];
      const bool better = c.flow < theta ||
                          (bland && c.flow == theta && leave < cycle_.size() &&
                           c.row * m_ + c.col < cells_[cycle_[leave]].row * m_ + cells_[cycle_[leave]].col);
      if (better) {
        theta = c.flow;
        leave = k;
      }
    }
    theta = std::max(theta, Scalar(0));
    for (std::size_t k = 0; k < cycle_.size(); ++k) {
      cells_[cycle_[k]].flow += (k % 2 == 0) ? -theta : theta;
    }
    const std::size_t slot = cycle_[leave];
    unlink(slot);
    cells_[slot] = {row, col, theta};
    link(slot);
    return theta > Scalar(0);
  }

  Eigen::Index n_;
  Eigen::Index m_;
  const VecS& supply_;
  const VecS& demand_;
  const CostRows& cost_;

  std::vector<BasicCell> cells_;
  std::vector<std::vector<Edge>> adjacency_;
  VecS u_;
  VecS v_;
  std::vector<Eigen::Index> parent_;
  std::vector<std::size_t> parent_cell_;
  std::vector<Eigen::Index> depth_;
  std::vector<Eigen::Index> stack_;
  std::vector<std::size_t> path_from_col_;
  std::vector<std::size_t> path_from_row_;
  std::vector<std::size_t> cycle_;
};

template <typename Scalar, typename CostRows>
TransportSolution<Scalar> solve_transport(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& supply,
                                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& demand,
                                          const CostRows& cost) {
  TransportSimplex<Scalar, CostRows> simplex(supply, demand, cost);
  return simplex.run();
}

}  // namespace procwass::detail
