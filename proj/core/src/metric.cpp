#include "btlab/metric.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab {

namespace {

using Mat = Eigen::MatrixXd;

Mat block(const std::vector<double>& data, std::size_t node, int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = data[node * n * n + i * n + j];
  return m;
}

}  // namespace

MetricField MetricField::euclidean(GridPtr grid) {
  MetricField m;
  m.n_ = grid->dim();
  m.grid_ = std::move(grid);
  m.euclidean_ = true;
  const std::size_t count = m.grid_->node_count();
  const int n = m.n_;
  m.g_.assign(count * n * n, 0.0);
  for (std::size_t k = 0; k < count; ++k)
    for (int i = 0; i < n; ++i) m.g_[k * n * n + i * n + i] = 1.0;
  m.inv_ = m.g_;
  m.sqrt_det_.assign(count, 1.0);
  return m;
}

MetricField MetricField::from_function(GridPtr grid, const Function& f) {
  const int n = grid->dim();
  std::vector<double> g(grid->node_count() * n * n);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < grid->node_count(); ++k) {
    grid->position(k, x.data());
    f(x.data(), g.data() + k * n * n);
  }
  return from_values(std::move(grid), std::move(g));
}

MetricField MetricField::from_values(GridPtr grid, std::vector<double> g) {
  MetricField m;
  m.n_ = grid->dim();
  if (g.size() != grid->node_count() * m.n_ * m.n_) {
    throw Error(ErrorCode::precondition, "metric values do not match grid size");
  }
  m.grid_ = std::move(grid);
  m.g_ = std::move(g);
  m.finalize();
  return m;
}

void MetricField::finalize() {
  const int n = n_;
  const std::size_t count = grid_->node_count();
  inv_.resize(count * n * n);
  sqrt_det_.resize(count);
  bool identity = true;
  for (std::size_t k = 0; k < count; ++k) {
    const Mat a = block(g_, k, n);
    const double scale = a.cwiseAbs().maxCoeff();
    if (!std::isfinite(scale) || (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
      std::ostringstream os;
      os << "metric not symmetric at node " << k;
      throw Error(ErrorCode::non_spd_metric, os.str());
    }
    Eigen::LLT<Mat> llt(a);
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (llt.info() != Eigen::Success || !(lmin > 0.0)) {
      std::ostringstream os;
      os << "metric not positive definite at node " << k << " (smallest eigenvalue " << lmin << ")";
      throw Error(ErrorCode::non_spd_metric, os.str());
    }
    const Mat inv = llt.solve(Mat::Identity(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) inv_[k * n * n + i * n + j] = 0.5 * (inv(i, j) + inv(j, i));
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
    sqrt_det_[k] = std::exp(logdet);
    identity = identity && (a - Mat::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0;
  }
  euclidean_ = identity;
}

double MetricField::min_eigenvalue(std::size_t node) const {
  const Mat a = block(g_, node, n_);
  return Eigen::SelfAdjointEigenSolver<Mat>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double MetricField::norm2(std::size_t node, const double* w, int d) const {
  const int n = n_;
  double s = 0.0;
  if (euclidean_) {
    for (int k = 0; k < n * d; ++k) s += w[k] * w[k];
    return s;
  }
  const double* gi = g_inv(node);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double gij = gi[i * n + j];
      if (gij == 0.0) continue;
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += w[i * d + c] * w[j * d + c];
      s += gij * dot;
    }
  return s;
}

}  // namespace btlab
