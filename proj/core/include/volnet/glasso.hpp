#pragma once

#include "volnet/network.hpp"
#include "volnet/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace volnet {

struct GlassoFit {
    Eigen::MatrixXd precision;   // sparse inverse covariance estimate
    Eigen::MatrixXd covariance;  // its inverse, the working matrix of the solver
    double rho = 0.0;
    int iterations = 0;
    bool converged = false;
    // log det(covariance) after each outer sweep; nondecreasing
    std::vector<double> objective_trace;
};

struct GlassoOptions {
    double tol = 1e-8;   // on the max elementwise change of the covariance per sweep
    int max_iter = 500;  // outer sweeps
    int max_inner_iter = 10000;
};

/**
 * Graphical lasso by block coordinate descent.
 *
 * Maximises log det(Theta) - tr(S Theta) - rho * sum_{i != j} |Theta_ij|.
 * Each column of the working covariance W is updated by a lasso on the
 * remaining block, solved with cyclic coordinate descent. The diagonal is not
 * penalised, so W_ii = S_ii throughout.
 *
 * Throws InputError if S is not square or not symmetric, or rho < 0.
 * Non-convergence is reported through `converged`, not thrown.
 */
GlassoFit glasso_fit(const Eigen::MatrixXd& sample_cov, double rho, const GlassoOptions& opts = {});

/// Per-column z-scores (sample mean, sample std with n-1). Throws on zero std.
Eigen::MatrixXd standardise_columns(const Eigen::MatrixXd& x);

/// Sample correlation matrix of the columns (covariance of the standardised data).
Eigen::MatrixXd standardised_covariance(const Eigen::MatrixXd& x);

/// 20 log-spaced values from 0.01 m to m, m = max off-diagonal |S|.
std::vector<double> default_rho_grid(const Eigen::MatrixXd& sample_cov, std::size_t n_points = 20);

struct RhoSelection {
    double rho = 0.0;
    std::vector<double> grid;
    std::vector<double> mean_scores;  // aligned with grid
};

/**
 * K-fold cross-validation for rho on contiguous row blocks.
 *
 * Each fold fits on the correlation matrix of the remaining rows and scores
 * log det(Theta) - tr(S_held Theta), where S_held is the second-moment matrix
 * of the held-out rows standardised with the training mean/std. An empty
 * `grid` means default_rho_grid on the whole window. Ties resolve to the
 * larger rho.
 */
RhoSelection select_rho(const Eigen::MatrixXd& returns_window, std::size_t n_folds = 10,
                        std::vector<double> grid = {}, const GlassoOptions& opts = {});

double select_rho(const TimeSeriesPanel& returns_window, std::size_t n_folds = 10,
                  std::vector<double> grid = {});

/// Edge (i,j) iff |precision_ij| > zero_tol.
Network to_network(const GlassoFit& fit, double zero_tol = 1e-8);

/// Correlation of the window, glasso at rho, thresholded into a network.
Network estimate_glasso_network(const Eigen::MatrixXd& returns_window, double rho,
                                const GlassoOptions& opts = {}, double zero_tol = 1e-8,
                                bool* converged = nullptr);

}  // namespace volnet
