#include "volnet/sim.hpp"

#include "volnet/error.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace volnet {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double CounterRng::uniform(std::uint64_t counter) const {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ (stream_ * 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ counter);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

// Coefficients acting on node i's features, in feature order.
Eigen::VectorXd node_coefficients(const SimSpec& spec, std::size_t i) {
    const auto k = static_cast<Eigen::Index>(spec.model.n_features());
    const auto n = static_cast<Eigen::Index>(spec.n_nodes);
    const auto node = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd& c = spec.coefficients;
    Eigen::VectorXd eff(k);
    switch (spec.model.variant) {
        case Variant::global: eff = c; break;
        case Variant::standard:
            eff.head(3) = c.segment(3 * node, 3);
            eff.tail(k - 3) = c.segment(3 * n, k - 3);
            break;
        case Variant::local: eff = c.segment(node * k, k); break;
    }
    return eff;
}

constexpr std::uint64_t kExogStreamBase = 1'000'003;
constexpr std::uint64_t kReturnsStreamBase = 7'000'003'000ULL;

}  // namespace

void SimSpec::validate() const {
    if (n_nodes == 0) throw InputError("simulation needs at least one node");
    if (length == 0) throw InputError("simulation length must be positive");
    if (network.n_nodes() != n_nodes) throw InputError("simulation network has the wrong number of nodes");
    model.validate();
    const std::size_t expected = param_count(model, n_nodes);
    if (static_cast<std::size_t>(coefficients.size()) != expected) {
        throw InputError("simulation needs " + std::to_string(expected) + " coefficients, got " +
                         std::to_string(coefficients.size()));
    }
    if (!coefficients.allFinite()) throw InputError("simulation coefficients must be finite");
    if (noise_std.size() != n_nodes) throw InputError("noise_std needs one entry per node");
    for (double s : noise_std) {
        if (!(s >= 0.0)) throw InputError("noise_std must be nonnegative");
    }
    for (const auto& term : model.exog) {
        auto it = exog.find(term.name);
        if (it == exog.end()) throw InputError("no generator for exogenous variable '" + term.name + "'");
        if (!(std::abs(it->second.phi) < 1.0)) {
            throw InputError("exogenous generator '" + term.name + "' needs |phi| < 1");
        }
        if (!(it->second.noise_std >= 0.0)) throw InputError("exogenous noise_std must be nonnegative");
    }
    if (!node_ids.empty() && node_ids.size() != n_nodes) throw InputError("node_ids has the wrong length");
    if (returns && returns->network.n_nodes() != n_nodes) {
        throw InputError("returns network has the wrong number of nodes");
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto rep = stationarity_check(model, node_coefficients(*this, i));
        if (!rep.stationary) {
            std::ostringstream msg;
            msg << "non-stationary coefficients for node " << i << ": sum of absolute autoregressive and network "
                << "coefficients is " << rep.margin << " (must be < 1)";
            throw InputError(msg.str());
        }
    }
}

SimOutput simulate(const SimSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_nodes;
    const std::size_t start = spec.model.first_row();
    const std::size_t total = start + spec.burn_in + spec.length;
    const auto rows = static_cast<Eigen::Index>(total);
    const auto cols = static_cast<Eigen::Index>(n);

    // exogenous AR(1) drivers, zero start
    std::vector<Eigen::MatrixXd> x(spec.model.exog.size(), Eigen::MatrixXd::Zero(rows, cols));
    for (std::size_t h = 0; h < spec.model.exog.size(); ++h) {
        const ExogGenerator& gen = spec.exog.at(spec.model.exog[h].name);
        for (std::size_t i = 0; i < n; ++i) {
            const CounterRng rng(spec.seed, kExogStreamBase * (h + 1) + i);
            const auto c = static_cast<Eigen::Index>(i);
            for (Eigen::Index t = 1; t < rows; ++t) {
                x[h](t, c) = gen.phi * x[h](t - 1, c) + gen.noise_std * rng.normal(static_cast<std::uint64_t>(t));
            }
        }
    }

    const NeighborStages stages = neighbor_stages(spec.network, spec.model.max_stage());
    std::vector<Eigen::VectorXd> coef;
    for (std::size_t i = 0; i < n; ++i) coef.push_back(node_coefficients(spec, i));
    std::vector<CounterRng> noise;
    for (std::size_t i = 0; i < n; ++i) noise.emplace_back(spec.seed, i);

    const auto& m = spec.model;
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd comp(cols, 3);  // daily, weekly, monthly averages of every node at row t
    for (Eigen::Index t = static_cast<Eigen::Index>(start); t < rows; ++t) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            comp(j, 0) = y(t - 1, j);
            comp(j, 1) = (y(t - 2, j) + y(t - 3, j) + y(t - 4, j) + y(t - 5, j)) / 4.0;
            double month = 0.0;
            for (Eigen::Index l = 6; l <= 22; ++l) month += y(t - l, j);
            comp(j, 2) = month / 17.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd& b = coef[i];
            const auto c = static_cast<Eigen::Index>(i);
            double v = b(0) * comp(c, 0) + b(1) * comp(c, 1) + b(2) * comp(c, 2);
            Eigen::Index k = 3;
            const std::size_t reach[3] = {m.r_d, m.r_w, m.r_m};
            for (Eigen::Index horizon = 0; horizon < 3; ++horizon) {
                for (std::size_t r = 1; r <= reach[horizon]; ++r) {
                    const Stage& st = stages.at(i, r);
                    double avg = 0.0;
                    for (std::size_t j : st.nodes) avg += st.weight * comp(static_cast<Eigen::Index>(j), horizon);
                    v += b(k++) * avg;
                }
            }
            for (std::size_t h = 0; h < m.exog.size(); ++h) {
                for (auto lag : m.exog[h].lags) {
                    v += b(k++) * x[h](t - static_cast<Eigen::Index>(lag), c);
                }
            }
            if (spec.noise_std[i] > 0.0) v += spec.noise_std[i] * noise[i].normal(static_cast<std::uint64_t>(t));
            y(t, c) = v;
        }
    }

    const auto keep_from = static_cast<Eigen::Index>(start + spec.burn_in);
    const auto keep = static_cast<Eigen::Index>(spec.length);
    const std::vector<std::string> ids = spec.node_ids.empty() ? default_node_ids(n) : spec.node_ids;
    const auto dates = weekday_dates(spec.start_date, spec.length);

    SimOutput out;
    Eigen::MatrixXd log_rv = y.middleRows(keep_from, keep).array() + spec.offset;
    if (!log_rv.allFinite()) throw EstimationError("simulated path is not finite");
    out.log_rv = TimeSeriesPanel(ids, dates, std::move(log_rv));
    for (std::size_t h = 0; h < m.exog.size(); ++h) {
        out.exog.emplace(m.exog[h].name, TimeSeriesPanel(ids, dates, x[h].middleRows(keep_from, keep)));
    }
    if (spec.returns) {
        const Eigen::MatrixXd r =
            gaussian_from_precision(returns_precision(*spec.returns), total, spec.seed, kReturnsStreamBase);
        out.returns = TimeSeriesPanel(ids, dates, r.middleRows(keep_from, keep));
    }
    return out;
}

std::vector<std::string> default_node_ids(std::size_t n) {
    std::vector<std::string> ids;
    const int width = n < 100 ? 2 : static_cast<int>(std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "N%0*zu", width, i + 1);
        ids.emplace_back(buf);
    }
    return ids;
}

std::vector<std::string> weekday_dates(const std::string& start, std::size_t count) {
    int y = 0;
    unsigned mo = 0;
    unsigned d = 0;
    if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &mo, &d) != 3) {
        throw InputError("start date '" + start + "' is not YYYY-MM-DD");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) throw InputError("start date '" + start + "' is not a valid date");
    sys_days day_point{ymd};
    std::vector<std::string> out;
    out.reserve(count);
    while (out.size() < count) {
        const weekday wd{day_point};
        if (wd != Saturday && wd != Sunday) {
            const year_month_day cur{day_point};
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(cur.year()),
                          static_cast<unsigned>(cur.month()), static_cast<unsigned>(cur.day()));
            out.emplace_back(buf);
        }
        day_point += days{1};
    }
    return out;
}

Eigen::MatrixXd returns_precision(const ReturnsGenerator& gen) {
    const std::size_t n = gen.network.n_nodes();
    std::size_t max_degree = 0;
    for (std::size_t i = 0; i < n; ++i) max_degree = std::max(max_degree, gen.network.neighbours(i).size());
    const double diag = std::max(gen.diagonal, std::abs(gen.coupling) * static_cast<double>(max_degree) + 0.1);
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * diag;
    for (const auto& [i, j] : gen.network.edges()) {
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -gen.coupling;
        p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -gen.coupling;
    }
    return p;
}

Eigen::MatrixXd gaussian_from_precision(const Eigen::MatrixXd& precision, std::size_t length, std::uint64_t seed,
                                        std::uint64_t stream_base) {
    const Eigen::Index p = precision.rows();
    Eigen::LLT<Eigen::MatrixXd> llt_prec(precision);
    if (llt_prec.info() != Eigen::Success) throw InputError("precision matrix is not positive definite");
    const Eigen::MatrixXd cov = llt_prec.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    Eigen::MatrixXd z(static_cast<Eigen::Index>(length), p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const CounterRng rng(seed, stream_base + static_cast<std::uint64_t>(i));
        for (Eigen::Index t = 0; t < z.rows(); ++t) z(t, i) = rng.normal(static_cast<std::uint64_t>(t));
    }
    return z * l.transpose();
}

}  // namespace volnet
