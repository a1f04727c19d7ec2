#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ultratac::ml {

struct PcaProjection {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // k x d, rows orthonormal, sorted by eigenvalue
    Eigen::VectorXd eigenvalues; // all d eigenvalues of the sample covariance, descending
    std::vector<double> explained_variance_ratio;  // first k, descending
    bool degenerate = false;     // zero total variance

    int k() const { return static_cast<int>(components.rows()); }
};

/// Rows of `x` are samples. Needs at least two rows and 1 <= k <= columns.
/// Component signs are fixed so the largest-magnitude loading is positive.
PcaProjection pca_fit(const Eigen::MatrixXd& x, int k);

/// (x - mean) * components^T
Eigen::MatrixXd pca_transform(const PcaProjection& proj, const Eigen::MatrixXd& x);
/// y * components + mean
Eigen::MatrixXd pca_inverse_transform(const PcaProjection& proj, const Eigen::MatrixXd& y);

/// Column-wise z-score; zero-variance columns are only centred.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& x);

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows);

}  // namespace ultratac::ml
