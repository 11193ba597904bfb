#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace gpf {

// Origin of one supervised row: which subject and which anchor visit produced it.
struct RowProvenance {
  std::string subject_id;
  int visit_index = 0;  // 1-based anchor visit t
};

// Supervised regression rows in standardized space. Row i of `inputs` is
// u_t = [features_t, score_t]; row i of `targets` holds the scores at visits
// t+1..t+H. Only full windows are emitted, so every target cell is populated.
struct TrainingSet {
  Eigen::MatrixXd inputs;   // n x (d+1)
  Eigen::MatrixXd targets;  // n x H
  int horizon_count = 4;
  std::vector<RowProvenance> provenance;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index input_dim() const { return inputs.cols(); }
};

// The conditioning rows of one target subject up to its current visit, built
// with the same full-window rule as training rows (targets never reach past
// the current visit). May be empty at early visits.
struct TargetHistory {
  Eigen::MatrixXd inputs;   // m x (d+1), standardized
  Eigen::MatrixXd targets;  // m x H, standardized
  std::string subject_id;
  int current_visit = 0;  // 1-based anchor visit t

  Eigen::Index size() const { return inputs.rows(); }
  bool empty() const { return inputs.rows() == 0; }
};

}  // namespace gpf
