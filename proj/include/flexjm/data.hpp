#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace flexjm {

// One survival record per subject plus a long-format measurement table.
// Covariates are subject-level and live in the survival table; measurement
// rows only carry (subject, time, response).
struct Dataset {
  // survival table, indexed 0..n-1 in order of first appearance
  std::vector<std::string> ids;
  Eigen::VectorXd time;    // follow-up T_i > 0
  Eigen::VectorXd event;   // delta_i in {0, 1}
  std::map<std::string, Eigen::VectorXd> covars;

  // longitudinal table
  Eigen::VectorXi subj;    // row -> subject index
  Eigen::VectorXd t;       // measurement times, 0 <= t <= T_subj
  Eigen::VectorXd y;

  int n() const { return static_cast<int>(time.size()); }
  int n_obs() const { return static_cast<int>(y.size()); }

  const Eigen::VectorXd& covariate(const std::string& name) const;
  bool has_covariate(const std::string& name) const;

  // Consistency checks shared by the CSV loader and in-memory construction;
  // throws DataError with the offending subject/row spelled out.
  void validate() const;
};

// Strict CSV readers. survival: id,time,event,<covariates...>;
// longitudinal: id,time,y. Subjects are indexed by order of appearance in
// the survival file; every longitudinal id must exist there. Lines starting
// with '#' are provenance stamps and are skipped. Longitudinal rows are
// returned grouped by subject in ascending time order.
Dataset load_dataset(const std::string& survival_csv,
                     const std::string& longitudinal_csv);

// Writes the pair of CSVs; a nonempty stamp becomes a leading '#' line in
// both files.
void write_dataset(const Dataset& data, const std::string& survival_csv,
                   const std::string& longitudinal_csv,
                   const std::string& stamp = std::string());

}  // namespace flexjm
