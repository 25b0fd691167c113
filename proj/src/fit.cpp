// Penalized least squares for the latency table:
//   min_x ||A x - l||^2 + lambda * sum_k max((V x)_k, 0)
// solved by monotone FISTA. The hinge prox has no closed form (V couples
// neighbouring table entries), so it is computed on its box-constrained dual
// by fast projected gradient, warm-started across outer iterations and stopped
// on a certified duality gap.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aows/error.hpp"
#include "aows/latmodel.hpp"

namespace aows {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

struct DesignMatrix {
    const std::vector<std::vector<std::size_t>>* rows;
    std::size_t cols;

    void apply(const Vec& x, Vec& out) const {
        out.resize(rows->size());
        for (std::size_t j = 0; j < rows->size(); ++j) {
            double s = 0.0;
            for (std::size_t k : (*rows)[j]) s += x[k];
            out[j] = s;
        }
    }
    void apply_transpose(const Vec& r, Vec& out) const {
        out.assign(cols, 0.0);
        for (std::size_t j = 0; j < rows->size(); ++j)
            for (std::size_t k : (*rows)[j]) out[k] += r[j];
    }
};

/// Power iteration on AᵀA. A is nonnegative so starting from the all-ones
/// vector converges to the Perron root from below.
double estimate_gram_norm(const DesignMatrix& a) {
    Vec v(a.cols, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(a.cols, 1))));
    Vec av, w;
    double est = 0.0;
    for (int it = 0; it < 200; ++it) {
        a.apply(v, av);
        a.apply_transpose(av, w);
        const double n = norm(w);
        if (n == 0.0) return 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) v[k] = w[k] / n;
        if (std::abs(n - est) <= 1e-9 * n) return n;
        est = n;
    }
    return est;
}

class HingeProx {
public:
    HingeProx(const std::vector<LinearSystem::MonotonePair>& pairs, std::size_t n)
        : pairs_(pairs), dual_(pairs.size(), 0.0) {
        std::vector<int> degree(n, 0);
        for (const auto& p : pairs) {
            ++degree[p.lower];
            ++degree[p.upper];
        }
        const int dmax = degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
        // ||V||^2 <= 2 * max degree for a signed incidence matrix
        lipschitz_ = std::max(2.0 * dmax, 1.0);
    }

    /// argmin_x 0.5||x - v||^2 + c * sum max((V x)_k, 0), written into x.
    void solve(const Vec& v, double c, double gap_tol, std::size_t max_inner, Vec& x) {
        const std::size_t m = pairs_.size();
        for (double& y : dual_) y = std::clamp(y, 0.0, c);
        Vec y_prev = dual_;
        Vec z = dual_;
        double t = 1.0;
        for (std::size_t it = 0; it < max_inner; ++it) {
            primal_from(v, z, x);
            Vec y_next(m);
            for (std::size_t k = 0; k < m; ++k) {
                const double w = x[pairs_[k].lower] - x[pairs_[k].upper];
                y_next[k] = std::clamp(z[k] + w / lipschitz_, 0.0, c);
            }
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            for (std::size_t k = 0; k < m; ++k)
                z[k] = y_next[k] + ((t - 1.0) / t_next) * (y_next[k] - y_prev[k]);
            y_prev = y_next;
            t = t_next;
            if (it % 8 == 7 && gap(v, y_prev, c, x) <= gap_tol) break;
        }
        dual_ = y_prev;
        primal_from(v, dual_, x);
    }

private:
    void primal_from(const Vec& v, const Vec& y, Vec& x) const {
        x = v;
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            x[pairs_[k].lower] -= y[k];
            x[pairs_[k].upper] += y[k];
        }
    }

    /// Duality gap of the prox subproblem at dual point y (x = v - Vᵀy).
    double gap(const Vec& v, const Vec& y, double c, Vec& x) const {
        primal_from(v, y, x);
        double g = 0.0;
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            const double w = x[pairs_[k].lower] - x[pairs_[k].upper];
            g += c * std::max(w, 0.0) - y[k] * w;
        }
        return g;
    }

    const std::vector<LinearSystem::MonotonePair>& pairs_;
    Vec dual_;
    double lipschitz_ = 1.0;
};

}  // namespace

FitResult fit_detailed(const LinearSystem& system, const FitOptions& opts) {
    if (!(opts.tol > 0.0)) throw ValidationError("fit: tol must be positive");
    if (!(opts.lambda >= 0.0)) throw ValidationError("fit: lambda must be nonnegative");
    if (opts.max_iters == 0) throw ValidationError("fit: max_iters must be positive");
    if (system.rows.empty()) throw ValidationError("fit: empty linear system");

    const std::size_t n = system.num_columns;
    std::vector<unsigned char> touched(n, 0);
    for (const auto& row : system.rows)
        for (std::size_t k : row) touched.at(k) = 1;
    const std::size_t untouched =
        static_cast<std::size_t>(std::count(touched.begin(), touched.end(), 0));
    if (untouched > 0 && !opts.allow_partial) throw CoverageError(untouched);

    // Zero-filled entries must not constrain their neighbours.
    std::vector<LinearSystem::MonotonePair> pairs;
    if (opts.lambda > 0.0)
        for (const auto& p : system.monotone)
            if (touched[p.lower] && touched[p.upper]) pairs.push_back(p);
    LinearSystem active = system;
    active.monotone = pairs;

    const DesignMatrix a{&system.rows, n};
    const Vec& l = system.observations;
    auto smooth = [&](const Vec& x, Vec& grad) {
        Vec ax;
        a.apply(x, ax);
        double r2 = 0.0;
        for (std::size_t j = 0; j < ax.size(); ++j) {
            ax[j] -= l[j];
            r2 += ax[j] * ax[j];
        }
        a.apply_transpose(ax, grad);
        for (double& g : grad) g *= 2.0;
        return r2;
    };
    auto full_objective = [&](const Vec& x) { return objective(active, x, opts.lambda); };

    FitResult result{LatencyTable(system.boundary_choices), {}};
    FitReport& rep = result.report;
    rep.untouched_columns = untouched;

    Vec grad0;
    smooth(Vec(n, 0.0), grad0);
    const double grad_scale = std::max(norm(grad0), 1e-300);
    double lip = 2.0 * estimate_gram_norm(a) * 1.01;
    if (lip <= 0.0) lip = 1.0;

    HingeProx prox(pairs, n);
    const double value_scale = std::max(1.0, *std::max_element(l.begin(), l.end()));

    Vec x(n, 0.0), x_prev(n, 0.0), y(n, 0.0), z(n, 0.0), grad(n), step(n);
    double fx = full_objective(x);
    double t = 1.0;
    double optimality = std::numeric_limits<double>::infinity();
    if (opts.record_trace) rep.objective_trace.push_back(fx);

    std::size_t it = 0;
    bool converged = false;
    for (; it < opts.max_iters; ++it) {
        const double fy = smooth(y, grad);
        // backtracking on the smooth part guards against an underestimated ||A||^2
        while (true) {
            for (std::size_t k = 0; k < n; ++k) step[k] = y[k] - grad[k] / lip;
            if (pairs.empty()) {
                z = step;
            } else {
                const double c = opts.lambda / lip;
                const double gap_tol =
                    std::max(1e-4 * std::pow(opts.tol * value_scale, 2), 1e-15 * dot(step, step));
                prox.solve(step, c, gap_tol, 20000, z);
            }
            Vec gz;
            const double fz = smooth(z, gz);
            double quad = fy;
            double d2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double d = z[k] - y[k];
                quad += grad[k] * d;
                d2 += d * d;
            }
            quad += 0.5 * lip * d2;
            if (fz <= quad + 1e-12 * std::abs(quad)) break;
            lip *= 2.0;
        }

        double gm2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = lip * (y[k] - z[k]);
            gm2 += d * d;
        }
        optimality = std::sqrt(gm2) / grad_scale;

        const double fz = full_objective(z);
        x_prev = x;
        bool restart = false;
        if (fz <= fx) {
            x = z;
            fx = fz;
        } else {
            restart = true;
        }
        if (opts.record_trace) rep.objective_trace.push_back(fx);

        if (optimality <= opts.tol) {
            converged = true;
            ++it;
            break;
        }

        // momentum restart when the step points uphill
        double uphill = 0.0;
        for (std::size_t k = 0; k < n; ++k) uphill += (y[k] - z[k]) * (z[k] - x_prev[k]);
        if (uphill > 0.0) restart = true;

        if (restart) {
            t = 1.0;
            y = x;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        for (std::size_t k = 0; k < n; ++k)
            y[k] = x[k] + (t / t_next) * (z[k] - x[k]) + ((t - 1.0) / t_next) * (x[k] - x_prev[k]);
        t = t_next;
    }
    if (!converged) throw NonConvergenceError(it, optimality);

    rep.iterations = it;
    rep.objective = fx;
    rep.optimality = optimality;
    rep.hinge_mass = hinge_mass(active, x);
    {
        Vec ax;
        a.apply(x, ax);
        double r2 = 0.0;
        for (std::size_t j = 0; j < ax.size(); ++j) r2 += (ax[j] - l[j]) * (ax[j] - l[j]);
        rep.residual_norm = std::sqrt(r2);
    }

    result.table.values() = x;
    for (std::size_t k = 0; k < n; ++k)
        if (!touched[k]) {
            result.table.values()[k] = 0.0;
            result.table.set_fitted(k, false);
        }
    return result;
}

}  // namespace aows
