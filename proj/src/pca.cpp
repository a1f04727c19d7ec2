#include "ultratac/pca.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace ultratac::ml {

PcaProjection pca_fit(const Eigen::MatrixXd& x, int k) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (n < 2) throw std::invalid_argument("pca_fit needs at least two rows");
    if (k < 1 || k > d) throw std::invalid_argument("pca_fit: k must be in [1, columns]");

    PcaProjection proj;
    proj.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - proj.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    const double total = cov.trace();
    if (!(total > 0.0)) {
        proj.degenerate = true;
        proj.eigenvalues = Eigen::VectorXd::Zero(d);
        proj.components = Eigen::MatrixXd::Identity(k, d);
        proj.explained_variance_ratio.assign(static_cast<std::size_t>(k), 0.0);
        return proj;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigen decomposition failed");
    // Eigen returns ascending order.
    const Eigen::VectorXd values = solver.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

    proj.eigenvalues = values.cwiseMax(0.0);
    proj.components.resize(k, d);
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd v = vectors.col(i);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        proj.components.row(i) = v.transpose();
        proj.explained_variance_ratio.push_back(proj.eigenvalues(i) / total);
    }
    return proj;
}

Eigen::MatrixXd pca_transform(const PcaProjection& proj, const Eigen::MatrixXd& x) {
    if (x.cols() != proj.mean.size()) throw std::invalid_argument("pca_transform: column count mismatch");
    return (x.rowwise() - proj.mean.transpose()) * proj.components.transpose();
}

Eigen::MatrixXd pca_inverse_transform(const PcaProjection& proj, const Eigen::MatrixXd& y) {
    if (y.cols() != proj.components.rows()) throw std::invalid_argument("pca_inverse_transform: column count mismatch");
    return (y * proj.components).rowwise() + proj.mean.transpose();
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = x.rowwise() - x.colwise().mean();
    if (x.rows() < 2) return out;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(x.rows() - 1));
        if (sd > 0.0) out.col(j) /= sd;
    }
    return out;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw std::invalid_argument("to_matrix: ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

}  // namespace ultratac::ml
