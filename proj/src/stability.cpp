#include "filterbench/stability.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "filterbench/rng.hpp"

namespace fb {

FilterCocycle make_cocycle(const DiscreteHMM& hmm,
                           const std::vector<double>& obs) {
    hmm.validate();
    FilterCocycle c;
    c.lambda_T = hmm.chain.matrix.transpose();
    c.psi.reserve(obs.size());
    const double inv2 = 1.0 / (2.0 * hmm.gamma * hmm.gamma);
    for (double y : obs) {
        VectorXd lp(hmm.d());
        for (int i = 0; i < hmm.d(); ++i) {
            double r = y - hmm.h(i);
            lp(i) = -r * r * inv2;
        }
        c.psi.push_back((lp.array() - lp.maxCoeff()).exp());
    }
    return c;
}

std::pair<VectorXd, double> propagate_unnormalized(const FilterCocycle& c,
                                                   const VectorXd& nu, int n) {
    if (n < 1 || n > static_cast<int>(c.psi.size()))
        throw SpecError("propagate_unnormalized: n out of range");
    VectorXd p = nu;
    double lognorm = 0.0;
    for (int k = 0; k < n; ++k) {
        p = c.psi[k].cwiseProduct(c.lambda_T * p);
        double s = p.norm();
        if (!(s > 0))
            throw NumericalError("propagate_unnormalized: mass vanished");
        p /= s;
        lognorm += std::log(s);
    }
    return {p, lognorm};
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1) / v.size());
}

} // namespace

LyapunovEstimate lyapunov_spectrum(const DiscreteHMM& hmm, int n,
                                   const std::vector<std::uint64_t>& seeds) {
    hmm.validate();
    if (n < 100 || seeds.empty())
        throw SpecError("lyapunov_spectrum: need n >= 100 and seeds");
    const int d = hmm.d();
    std::vector<double> v1s, v12s;
    for (auto seed : seeds) {
        std::vector<int> states;
        std::vector<double> obs;
        simulate_hmm(hmm, n, seed, states, obs);
        FilterCocycle c = make_cocycle(hmm, obs);
        // Two-column frame; re-orthonormalize by QR every 50 steps, log
        // bookkeeping kept exact through per-step rescaling.
        MatrixXd W(d, 2);
        W.col(0) = VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
        W.col(1) = VectorXd::Zero(d);
        W(0, 1) = 1.0;
        W.col(1) -= W.col(1).dot(W.col(0)) * W.col(0);
        W.col(1).normalize();
        double L1 = 0.0, L12 = 0.0;
        for (int k = 0; k < n; ++k) {
            W = c.psi[k].asDiagonal() * (c.lambda_T * W);
            double s = W.cwiseAbs().maxCoeff();
            if (!(s > 0))
                throw NumericalError("lyapunov_spectrum: frame collapsed");
            W /= s;
            L1 += std::log(s);
            L12 += 2.0 * std::log(s);
            // Re-orthonormalize every step: under strong contraction the
            // second column falls below roundoff relative to the first
            // within a handful of steps and QR then returns an exact zero.
            {
                Eigen::HouseholderQR<MatrixXd> qr(W);
                MatrixXd R = qr.matrixQR().topRows(2).triangularView<Eigen::Upper>();
                L1 += std::log(std::abs(R(0, 0)));
                L12 += std::log(std::abs(R(0, 0) * R(1, 1)));
                MatrixXd Q = qr.householderQ() * MatrixXd::Identity(d, 2);
                W = Q;
            }
        }
        v1s.push_back(L1 / n);
        v12s.push_back(L12 / n);
    }
    LyapunovEstimate est;
    est.v1 = mean_of(v1s);
    est.v1_se = se_of(v1s);
    std::vector<double> v2s(v1s.size());
    for (std::size_t i = 0; i < v1s.size(); ++i) v2s[i] = v12s[i] - v1s[i];
    est.v2 = mean_of(v2s);
    est.v2_se = se_of(v2s);
    return est;
}

ExponentEstimate empirical_exponent(const DiscreteHMM& hmm, const VectorXd& nu,
                                    const VectorXd& nu_tilde, int n,
                                    const std::vector<std::uint64_t>& seeds) {
    hmm.validate();
    if ((nu - nu_tilde).norm() == 0.0) {
        ExponentEstimate z;
        z.hit_zero = true;
        z.exponent = -std::numeric_limits<double>::infinity();
        return z;
    }
    std::vector<double> slopes;
    bool hit_zero = false;
    // Per-seed tail slope of log distance.  The difference e = p^nu - p^nu~
    // propagates linearly through the same cocycle, so the log distance is
    // computed from O(1) unit directions and accumulated log norms:
    // log||pi^nu - pi^nu~|| = Le - Lu + log||<v,1>e - <e,1>v|| - log<u,1><v,1>
    // with unit u, v, e; no underflow at any horizon.
    for (auto seed : seeds) {
        std::vector<int> states;
        std::vector<double> obs;
        simulate_hmm(hmm, n, seed, states, obs);
        FilterCocycle c = make_cocycle(hmm, obs);
        VectorXd u = nu, v = nu_tilde, e = nu - nu_tilde;
        double Lu = 0.0, Lv = 0.0, Le = std::log(e.norm());
        e /= e.norm();
        std::vector<double> logd;
        logd.reserve(n);
        for (int k = 0; k < n; ++k) {
            auto push = [&](VectorXd& x, double& L) {
                x = c.psi[k].cwiseProduct(c.lambda_T * x);
                double s = x.norm();
                if (!(s > 0)) return false;
                x /= s;
                L += std::log(s);
                return true;
            };
            if (!push(u, Lu) || !push(v, Lv) || !push(e, Le)) break;
            VectorXd cross = v.sum() * e - e.sum() * v;
            double cn = cross.norm();
            // The stored direction of e degrades once its contracting
            // component falls below roundoff relative to the dominant one;
            // at that point cross cancels to noise.  Stop collecting there
            // and fit on the numerically valid prefix.
            if (!(cn > 1e-12 * std::abs(v.sum()))) break;
            logd.push_back(Le - Lu + std::log(cn) - std::log(u.sum()) -
                           std::log(v.sum()));
        }
        if (logd.size() < 20) {
            hit_zero = true;
            continue;
        }
        // Least-squares slope over the last half of the valid segment.
        int kmax = static_cast<int>(logd.size());
        int lo = kmax / 2;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (int k = lo; k < kmax; ++k) {
            sx += k;
            sy += logd[k];
            sxx += double(k) * k;
            sxy += k * logd[k];
            ++m;
        }
        slopes.push_back((m * sxy - sx * sy) / (m * sxx - sx * sx));
    }
    ExponentEstimate est;
    est.hit_zero = hit_zero;
    if (slopes.empty()) {
        est.exponent = -std::numeric_limits<double>::infinity();
        return est;
    }
    est.exponent = mean_of(slopes);
    est.se = se_of(slopes);
    return est;
}

ExponentBounds exponent_bounds(const MatrixXd& lambda, const VectorXd& h,
                               const VectorXd& mu) {
    const int d = static_cast<int>(h.size());
    if (lambda.rows() != d || lambda.cols() != d || mu.size() != d)
        throw SpecError("exponent_bounds: dimension mismatch");
    ExponentBounds b;
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) mn = std::min(mn, std::sqrt(lambda(i, j) * lambda(j, i)));
    b.coupling = -2.0 * mn;
    double up = 0.0, lo = 0.0;
    for (int i = 0; i < d; ++i) {
        double mind = std::numeric_limits<double>::infinity();
        double sumd = 0.0;
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            double dd = (h(i) - h(j)) * (h(i) - h(j));
            mind = std::min(mind, dd);
            sumd += dd;
        }
        if (d == 1) mind = 0.0;
        up += mu(i) * mind;
        lo += mu(i) * sumd;
    }
    b.low_noise_upper = -0.5 * up;
    b.low_noise_lower = -0.5 * lo;
    return b;
}

std::vector<double> counterexample_run(int n, std::uint64_t seed, double nu_w,
                                       double nu_tw) {
    // 4-state cycle 1 -> 2 -> 3 -> 4 -> 1 at unit rate, observed through the
    // indicator of the odd positions with no noise.  On the time grid the
    // cycle must be discretized as stay-or-step: e^{Q dt} has O(dt^2)
    // double-jump mass that breaks the odd/even symmetry and lets the
    // filters merge slowly, which is exactly what this example rules out.
    const double dt = 0.05;
    const double p_step = 1.0 - std::exp(-dt);
    MatrixXd P = MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
        P(i, i) = 1.0 - p_step;
        P(i, (i + 1) % 4) = p_step;
    }
    VectorXd h(4);
    h << 1, 0, 1, 0;

    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int state = static_cast<int>(unif(rng) * 4.0) % 4;

    auto make_prior = [&](double w, int y0) {
        VectorXd p = VectorXd::Zero(4);
        if (y0 == 1) {
            p(0) = w;
            p(2) = 1.0 - w;
        } else {
            p(1) = w;
            p(3) = 1.0 - w;
        }
        return p;
    };
    int y0 = static_cast<int>(h(state));
    VectorXd pa = make_prior(nu_w, y0);
    VectorXd pb = make_prior(nu_tw, y0);

    std::vector<double> dist;
    dist.reserve(n);
    dist.push_back((pa - pb).norm());
    for (int k = 1; k < n; ++k) {
        // Advance the chain one grid step and observe exactly.
        double u = unif(rng), acc = 0.0;
        for (int nx = 0; nx < 4; ++nx) {
            acc += P(state, nx);
            if (u <= acc) {
                state = nx;
                break;
            }
        }
        int y = static_cast<int>(h(state));
        auto update = [&](VectorXd& p) {
            VectorXd q = P.transpose() * p;
            for (int i = 0; i < 4; ++i)
                if (static_cast<int>(h(i)) != y) q(i) = 0.0;
            double s = q.sum();
            if (!(s > 0))
                throw NumericalError("counterexample_run: filter mass vanished");
            p = q / s;
        };
        update(pa);
        update(pb);
        dist.push_back((pa - pb).norm());
    }
    return dist;
}

std::vector<double> ergodic_average(
    const DiscreteHMM& hmm,
    const std::function<double(double, const VectorXd&)>& g, int n,
    std::uint64_t seed) {
    hmm.validate();
    std::vector<int> states;
    std::vector<double> obs;
    simulate_hmm(hmm, n, seed, states, obs);
    FilterTrace ft = forward_filter(hmm, obs);
    std::vector<double> avg(n);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        acc += g(hmm.chain.states(states[k]), ft.pi[k]);
        avg[k] = acc / (k + 1);
    }
    return avg;
}

} // namespace fb
