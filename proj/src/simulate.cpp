#include "rpost/simulate.hpp"

namespace rpost {

MatrixXd gaussian_design(Index n, Index p, double mean, double sd, bool intercept, Rng& rng) {
  if (n < 1 || p < 1) throw DomainError("design needs n >= 1 and p >= 1");
  std::normal_distribution<double> normal(mean, sd);
  MatrixXd z(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) z(i, j) = (intercept && j == 0) ? 1.0 : normal(rng);
  return z;
}

Dataset simulate_dataset(const ModelFamily& family, const MatrixXd& design,
                         const VectorXd& theta_g, Rng& rng) {
  family.check_parameter(theta_g, design.cols());
  Dataset data{VectorXd(design.rows()), design};
  for (Index i = 0; i < design.rows(); ++i) data.responses(i) = family.draw(design.row(i), theta_g, rng);
  return data;
}

void contaminate(Dataset& data, const std::vector<Index>& rows, double value) {
  for (Index i : rows) {
    if (i < 0 || i >= data.size()) throw DomainError("contaminated row out of range");
    data.responses(i) = value;
  }
}

unsigned worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace rpost
