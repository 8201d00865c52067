#include "qrbsde/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "qrbsde/common.hpp"

namespace qrbsde {

namespace {

// Symmetric tridiagonal QL with implicit shifts, tracking only the first row
// of the eigenvector matrix (all that quadrature weights need). d holds the
// diagonal and returns the eigenvalues; e holds the subdiagonal in e[0..n-2].
void tql_first_row(std::vector<double>& d, std::vector<double>& e,
                   std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    z.assign(static_cast<std::size_t>(n), 0.0);
    z[0] = 1.0;
    if (n == 1) return;
    e.resize(static_cast<std::size_t>(n));
    e[static_cast<std::size_t>(n) - 1] = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();

    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[static_cast<std::size_t>(m)]) +
                                  std::abs(d[static_cast<std::size_t>(m) + 1]);
                if (std::abs(e[static_cast<std::size_t>(m)]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw NumericalError("quadrature: tridiagonal QL failed to converge");
                double g = (d[static_cast<std::size_t>(l) + 1] - d[static_cast<std::size_t>(l)]) /
                           (2.0 * e[static_cast<std::size_t>(l)]);
                double r = std::hypot(g, 1.0);
                g = d[static_cast<std::size_t>(m)] - d[static_cast<std::size_t>(l)] +
                    e[static_cast<std::size_t>(l)] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[static_cast<std::size_t>(i)];
                    const double b = c * e[static_cast<std::size_t>(i)];
                    r = std::hypot(f, g);
                    e[static_cast<std::size_t>(i) + 1] = r;
                    if (r == 0.0) {
                        d[static_cast<std::size_t>(i) + 1] -= p;
                        e[static_cast<std::size_t>(m)] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[static_cast<std::size_t>(i) + 1] - p;
                    r = (d[static_cast<std::size_t>(i)] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[static_cast<std::size_t>(i) + 1] = g + p;
                    g = c * r - b;
                    f = z[static_cast<std::size_t>(i) + 1];
                    z[static_cast<std::size_t>(i) + 1] = s * z[static_cast<std::size_t>(i)] + c * f;
                    z[static_cast<std::size_t>(i)] = c * z[static_cast<std::size_t>(i)] - s * f;
                }
                if (r == 0.0 && i >= l) continue;
                d[static_cast<std::size_t>(l)] -= p;
                e[static_cast<std::size_t>(l)] = g;
                e[static_cast<std::size_t>(m)] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw ConfigError("quadrature: need at least one node");
    // Jacobi matrix of the monic Hermite family orthogonal under N(0,1):
    // zero diagonal, subdiagonal sqrt(k).
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    for (int k = 1; k < n; ++k) e[static_cast<std::size_t>(k) - 1] = std::sqrt(static_cast<double>(k));
    std::vector<double> z;
    tql_first_row(d, e, z);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return d[static_cast<std::size_t>(a)] < d[static_cast<std::size_t>(b)]; });
    QuadratureRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(n));
    rule.weights.reserve(static_cast<std::size_t>(n));
    for (int idx : order) {
        rule.nodes.push_back(d[static_cast<std::size_t>(idx)]);
        rule.weights.push_back(z[static_cast<std::size_t>(idx)] * z[static_cast<std::size_t>(idx)]);
    }
    return rule;
}

double gaussian_expectation(const std::function<double(double)>& h, double mean,
                            double var, int nodes) {
    if (var < 0) throw ConfigError("gaussian expectation: negative variance");
    if (var == 0) return h(mean);
    const QuadratureRule rule = gauss_hermite(nodes);
    const double sd = std::sqrt(var);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * h(mean + sd * rule.nodes[i]);
    return acc;
}

double heat_cos_value(double t, double x, double T, double signorm) {
    return std::exp(-0.5 * signorm * signorm * (T - t)) * std::cos(x);
}

double colehopf_value(double alpha, const std::function<double(double)>& g,
                      double mean, double var, int nodes) {
    if (alpha <= 0) throw ConfigError("log-exponential transform: alpha must be > 0");
    const double ev = gaussian_expectation(
        [&](double x) { return std::exp(-alpha * g(x)); }, mean, var, nodes);
    if (!(ev > 0)) throw NumericalError("log-exponential transform: expectation not positive");
    return -std::log(ev) / alpha;
}

double american_tree_value(const std::function<double(double)>& g, double x0,
                           double vol, double T, int steps) {
    if (steps < 1) throw ConfigError("tree: need at least one step");
    if (!(vol > 0) || !(T > 0)) throw ConfigError("tree: vol and T must be > 0");
    const double dt = T / steps;
    const double h = vol * std::sqrt(3.0 * dt);
    const double pu = 1.0 / 6.0, pm = 2.0 / 3.0, pd = 1.0 / 6.0;

    // level k has 2k+1 nodes at x0 + j h, j = -k..k
    std::vector<double> v(static_cast<std::size_t>(2 * steps) + 1);
    for (int j = -steps; j <= steps; ++j)
        v[static_cast<std::size_t>(j + steps)] = g(x0 + j * h);
    std::vector<double> w;
    for (int k = steps - 1; k >= 0; --k) {
        w.resize(static_cast<std::size_t>(2 * k) + 1);
        for (int j = -k; j <= k; ++j) {
            const std::size_t c = static_cast<std::size_t>(j + k + 1);  // into level k+1
            const double cont = pu * v[c + 1] + pm * v[c] + pd * v[c - 1];
            w[static_cast<std::size_t>(j + k)] = std::max(g(x0 + j * h), cont);
        }
        v.swap(w);
    }
    return v[0];
}

bool CheckResult::pass() const { return std::abs(actual - expected) <= tol; }

bool write_check_table(std::ostream& os, const std::vector<CheckResult>& checks) {
    bool all = true;
    for (const CheckResult& c : checks) {
        const bool ok = c.pass();
        all = all && ok;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-4s %-28s expected % .12e actual % .12e tol %.1e\n",
                      ok ? "PASS" : "FAIL", c.name.c_str(), c.expected, c.actual, c.tol);
        os << buf;
    }
    return all;
}

}  // namespace qrbsde
