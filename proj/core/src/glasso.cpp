#include "volnet/glasso.hpp"

#include "volnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace volnet {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

double log_det_spd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index k = 0; k < l.rows(); ++k) s += std::log(l(k, k));
    return 2.0 * s;
}

// Submatrix of `m` without row/column j.
Eigen::MatrixXd drop_index(const Eigen::MatrixXd& m, Eigen::Index j) {
    const Eigen::Index p = m.rows();
    Eigen::MatrixXd out(p - 1, p - 1);
    for (Eigen::Index a = 0, ra = 0; a < p; ++a) {
        if (a == j) continue;
        for (Eigen::Index b = 0, rb = 0; b < p; ++b) {
            if (b == j) continue;
            out(ra, rb++) = m(a, b);
        }
        ++ra;
    }
    return out;
}

Eigen::VectorXd drop_entry(const Eigen::VectorXd& v, Eigen::Index j) {
    Eigen::VectorXd out(v.size() - 1);
    for (Eigen::Index a = 0, r = 0; a < v.size(); ++a) {
        if (a != j) out(r++) = v(a);
    }
    return out;
}

// Cyclic coordinate descent for min 1/2 b'Wb - b's + rho |b|_1, warm-started from `beta`.
void lasso_cd(const Eigen::MatrixXd& w, const Eigen::VectorXd& s, double rho, double tol, int max_iter,
              Eigen::VectorXd& beta) {
    const Eigen::Index m = beta.size();
    Eigen::VectorXd wb = w * beta;
    for (int it = 0; it < max_iter; ++it) {
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            const double partial = s(k) - (wb(k) - w(k, k) * beta(k));
            const double updated = soft_threshold(partial, rho) / w(k, k);
            const double delta = updated - beta(k);
            if (delta != 0.0) {
                wb += w.col(k) * delta;
                beta(k) = updated;
                max_change = std::max(max_change, std::abs(delta) * w(k, k));
            }
        }
        if (max_change < tol) break;
    }
}

}  // namespace

GlassoFit glasso_fit(const Eigen::MatrixXd& sample_cov, double rho, const GlassoOptions& opts) {
    const Eigen::Index p = sample_cov.rows();
    if (p == 0 || sample_cov.cols() != p) throw InputError("glasso: covariance must be square and nonempty");
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw InputError("glasso: rho must be a nonnegative number");
    if (!sample_cov.allFinite()) throw InputError("glasso: covariance has non-finite entries");
    const double scale = std::max(1.0, sample_cov.cwiseAbs().maxCoeff());
    if ((sample_cov - sample_cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw InputError("glasso: covariance is not symmetric");
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        if (!(sample_cov(k, k) > 0.0)) throw InputError("glasso: covariance diagonal must be positive");
    }

    GlassoFit fit;
    fit.rho = rho;
    Eigen::MatrixXd w = sample_cov;
    if (p == 1) {
        fit.covariance = w;
        fit.precision = w.inverse();
        fit.converged = true;
        fit.objective_trace.push_back(log_det_spd(w));
        return fit;
    }

    // betas.col(j) holds the lasso solution for column j (length p-1)
    Eigen::MatrixXd betas = Eigen::MatrixXd::Zero(p - 1, p);
    const double inner_tol = std::min(opts.tol, 1e-6) * 1e-3 * scale;

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const Eigen::MatrixXd w11 = drop_index(w, j);
            const Eigen::VectorXd s12 = drop_entry(sample_cov.col(j), j);
            Eigen::VectorXd beta = betas.col(j);
            lasso_cd(w11, s12, rho, inner_tol, opts.max_inner_iter, beta);
            betas.col(j) = beta;
            const Eigen::VectorXd w12 = w11 * beta;
            for (Eigen::Index a = 0, r = 0; a < p; ++a) {
                if (a == j) continue;
                max_change = std::max(max_change, std::abs(w(a, j) - w12(r)));
                w(a, j) = w12(r);
                w(j, a) = w12(r);
                ++r;
            }
        }
        fit.iterations = iter;
        fit.objective_trace.push_back(log_det_spd(w));
        if (max_change < opts.tol) {
            fit.converged = true;
            break;
        }
    }

    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd beta = betas.col(j);
        const Eigen::VectorXd w12 = drop_entry(w.col(j), j);
        const double theta_jj = 1.0 / (w(j, j) - w12.dot(beta));
        theta(j, j) = theta_jj;
        for (Eigen::Index a = 0, r = 0; a < p; ++a) {
            if (a == j) continue;
            theta(a, j) = -beta(r++) * theta_jj;
        }
    }
    fit.precision = 0.5 * (theta + theta.transpose());
    fit.covariance = w;
    return fit;
}

Eigen::MatrixXd standardise_columns(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw EstimationError("standardisation needs at least two rows");
    Eigen::MatrixXd z(n, x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mean = x.col(c).mean();
        const double var = (x.col(c).array() - mean).square().sum() / static_cast<double>(n - 1);
        if (!(var > 0.0)) {
            throw EstimationError("column " + std::to_string(c) + " has zero standard deviation");
        }
        z.col(c) = (x.col(c).array() - mean) / std::sqrt(var);
    }
    return z;
}

Eigen::MatrixXd standardised_covariance(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd z = standardise_columns(x);
    Eigen::MatrixXd s = (z.transpose() * z) / static_cast<double>(x.rows() - 1);
    s = 0.5 * (s + s.transpose());
    s.diagonal().setOnes();
    return s;
}

std::vector<double> default_rho_grid(const Eigen::MatrixXd& sample_cov, std::size_t n_points) {
    const Eigen::Index p = sample_cov.rows();
    double m = 0.0;
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = 0; b < p; ++b) {
            if (a != b) m = std::max(m, std::abs(sample_cov(a, b)));
        }
    }
    if (!(m > 0.0)) throw InputError("rho grid: covariance has no off-diagonal mass");
    std::vector<double> grid(n_points);
    const double lo = std::log(0.01 * m);
    const double hi = std::log(m);
    for (std::size_t k = 0; k < n_points; ++k) {
        const double frac = n_points == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(n_points - 1);
        grid[k] = std::exp(lo + frac * (hi - lo));
    }
    grid.back() = m;
    return grid;
}

RhoSelection select_rho(const Eigen::MatrixXd& returns_window, std::size_t n_folds, std::vector<double> grid,
                        const GlassoOptions& opts) {
    const auto n = static_cast<std::size_t>(returns_window.rows());
    const auto p = static_cast<std::size_t>(returns_window.cols());
    if (n_folds < 2) throw InputError("select_rho: need at least two folds");
    if (n < n_folds * p || n < n_folds) {
        std::ostringstream msg;
        msg << "select_rho: window of " << n << " rows is too short for " << n_folds << " folds on " << p
            << " nodes";
        throw InputError(msg.str());
    }
    if (grid.empty()) grid = default_rho_grid(standardised_covariance(returns_window));
    for (double r : grid) {
        if (!(r >= 0.0)) throw InputError("select_rho: grid values must be nonnegative");
    }

    std::vector<double> totals(grid.size(), 0.0);
    const std::size_t base = n / n_folds;
    const std::size_t extra = n % n_folds;
    std::size_t start = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        const std::size_t stop = start + len;

        Eigen::MatrixXd train(static_cast<Eigen::Index>(n - len), static_cast<Eigen::Index>(p));
        Eigen::MatrixXd held(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(p));
        for (std::size_t r = 0, tr = 0, hr = 0; r < n; ++r) {
            if (r >= start && r < stop) {
                held.row(static_cast<Eigen::Index>(hr++)) = returns_window.row(static_cast<Eigen::Index>(r));
            } else {
                train.row(static_cast<Eigen::Index>(tr++)) = returns_window.row(static_cast<Eigen::Index>(r));
            }
        }

        const Eigen::RowVectorXd mean = train.colwise().mean();
        const Eigen::MatrixXd centred = train.rowwise() - mean;
        const Eigen::RowVectorXd sd =
            (centred.array().square().colwise().sum() / static_cast<double>(train.rows() - 1)).sqrt();
        if ((sd.array() <= 0.0).any()) throw EstimationError("select_rho: zero-variance column in a fold");
        const Eigen::MatrixXd s_train = standardised_covariance(train);
        const Eigen::MatrixXd z_held = (held.rowwise() - mean).array().rowwise() / sd.array();
        const Eigen::MatrixXd s_held = (z_held.transpose() * z_held) / static_cast<double>(len);

        for (std::size_t g = 0; g < grid.size(); ++g) {
            const GlassoFit fit = glasso_fit(s_train, grid[g], opts);
            totals[g] += log_det_spd(fit.precision) - (s_held * fit.precision).trace();
        }
        start = stop;
    }

    RhoSelection out;
    out.grid = grid;
    out.mean_scores.resize(grid.size());
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        out.mean_scores[g] = totals[g] / static_cast<double>(n_folds);
        const bool better = out.mean_scores[g] > out.mean_scores[best] ||
                            (out.mean_scores[g] == out.mean_scores[best] && grid[g] > grid[best]);
        if (better) best = g;
    }
    out.rho = grid[best];
    return out;
}

double select_rho(const TimeSeriesPanel& returns_window, std::size_t n_folds, std::vector<double> grid) {
    return select_rho(returns_window.values(), n_folds, std::move(grid)).rho;
}

Network to_network(const GlassoFit& fit, double zero_tol) {
    const Eigen::Index p = fit.precision.rows();
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            if (std::abs(fit.precision(i, j)) > zero_tol) {
                edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            }
        }
    }
    return Network(static_cast<std::size_t>(p), std::move(edges));
}

Network estimate_glasso_network(const Eigen::MatrixXd& returns_window, double rho, const GlassoOptions& opts,
                                double zero_tol, bool* converged) {
    const GlassoFit fit = glasso_fit(standardised_covariance(returns_window), rho, opts);
    if (converged) *converged = fit.converged;
    return to_network(fit, zero_tol);
}

}  // namespace volnet
