#include "filterbench/contfilter.hpp"

#include <cmath>
#include <random>

#include "filterbench/rng.hpp"

namespace fb {

ObsIncrementSeries synthesize_obs(const std::vector<int>& state_path,
                                  const VectorXd& h, double gamma, double dt,
                                  std::uint64_t seed) {
    if (dt <= 0) throw SpecError("synthesize_obs: dt must be > 0");
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ObsIncrementSeries obs;
    obs.dt = dt;
    obs.dy.resize(state_path.size());
    const double sq = gamma * std::sqrt(dt);
    for (std::size_t k = 0; k < state_path.size(); ++k)
        obs.dy[k] = h(state_path[k]) * dt + sq * normal(rng);
    return obs;
}

UnnormalizedMass zakai_step(const MarkovSpec& Q, const VectorXd& h, double gamma,
                            const UnnormalizedMass& p, double dy, double dt) {
    if (Q.kind != ChainKind::Generator)
        throw SpecError("zakai_step: expects a generator spec");
    if (gamma <= 0) throw SpecError("zakai_step: gamma must be > 0");
    const int d = Q.d();
    if (h.size() != d || p.mass.size() != d)
        throw SpecError("zakai_step: dimension mismatch");
    // I + Q^T dt must stay nonnegative for a probabilistic Euler step.
    for (int i = 0; i < d; ++i)
        if (1.0 + Q.matrix(i, i) * dt < 0)
            throw SpecError("zakai_step: dt too large for generator diagonal");

    UnnormalizedMass out;
    out.clip_count = p.clip_count;
    VectorXd next = p.mass + Q.matrix.transpose() * p.mass * dt +
                    (h / (gamma * gamma)).cwiseProduct(p.mass) * dy;
    for (int i = 0; i < d; ++i)
        if (next(i) < 0) {
            next(i) = 0.0;
            ++out.clip_count;
        }
    double s = next.sum();
    if (!(s > 0))
        throw NumericalError("zakai_step: total mass vanished");
    out.mass = next / s;
    out.logscale = p.logscale + std::log(s);
    return out;
}

VectorXd ks_step(const MarkovSpec& Q, const VectorXd& h, double gamma,
                 const VectorXd& pi, double dy, double dt) {
    if (Q.kind != ChainKind::Generator)
        throw SpecError("ks_step: expects a generator spec");
    if (gamma <= 0) throw SpecError("ks_step: gamma must be > 0");
    const int d = Q.d();
    if (h.size() != d || pi.size() != d)
        throw SpecError("ks_step: dimension mismatch");
    double hbar = h.dot(pi);
    VectorXd next = pi + Q.matrix.transpose() * pi * dt +
                    ((h.array() - hbar) / (gamma * gamma)).matrix().cwiseProduct(
                        pi) *
                        (dy - hbar * dt);
    next = next.cwiseMax(0.0);
    double s = next.sum();
    if (!(s > 0)) throw NumericalError("ks_step: mass vanished");
    return next / s;
}

SmoothResult smooth_alpha(const MarkovSpec& Q, const VectorXd& h, double gamma,
                          const ObsIncrementSeries& obs, int t_index,
                          const VectorXd& p0) {
    if (t_index < 0 || t_index > static_cast<int>(obs.dy.size()))
        throw SpecError("smooth_alpha: t_index out of range");
    const int d = Q.d();
    // Forward filter masses on the grid (normalized Zakai).
    std::vector<VectorXd> filt(t_index + 1);
    UnnormalizedMass p{p0, 0.0, 0};
    filt[0] = p.mass;
    for (int k = 0; k < t_index; ++k) {
        p = zakai_step(Q, h, gamma, p, obs.dy[k], obs.dt);
        filt[k + 1] = p.mass;
    }
    SmoothResult res;
    res.alpha.resize(t_index + 1);
    res.smoothed.resize(t_index + 1);
    res.alpha[t_index] = VectorXd::Ones(d);
    // Backward Euler of the adjoint factor; Q acts on functions (rows).
    const double g2 = gamma * gamma;
    for (int k = t_index - 1; k >= 0; --k) {
        const VectorXd& an = res.alpha[k + 1];
        // Exact adjoint of the Euler Zakai step: with p' = (I + Q dt +
        // H dy/g2)^T p, the pairing <p_k, alpha_k> is conserved only for
        // alpha_k = (I + Q dt + H dy/g2) alpha_{k+1}.
        res.alpha[k] = an + Q.matrix * an * obs.dt +
                       (h / g2).cwiseProduct(an) * obs.dy[k];
        res.alpha[k] = res.alpha[k].cwiseMax(0.0);
        double m = res.alpha[k].maxCoeff();
        if (!(m > 0)) throw NumericalError("smooth_alpha: factor vanished");
    }
    for (int k = 0; k <= t_index; ++k) {
        VectorXd s = filt[k].cwiseProduct(res.alpha[k]);
        double z = s.sum();
        if (!(z > 0)) throw NumericalError("smooth_alpha: smoothing mass vanished");
        res.smoothed[k] = s / z;
    }
    return res;
}

std::vector<double> mc_approx_filter(const MarkovSpec& chain, int n,
                                     const ObsIncrementSeries& obs,
                                     const std::function<double(double)>& g,
                                     std::uint64_t seed, const VectorXd& p0,
                                     const VectorXd& h, double gamma,
                                     int copies) {
    if (chain.kind != ChainKind::Generator)
        throw SpecError("mc_approx_filter: expects a generator spec");
    if (n < 1) throw SpecError("mc_approx_filter: fidelity must be >= 1");
    if (gamma <= 0) throw SpecError("mc_approx_filter: gamma must be > 0");
    const int d = chain.d();
    const int N = static_cast<int>(obs.dy.size());
    const double T = N * obs.dt;
    const double base_dt = 1.0 / n;
    const MatrixXd P = semigroup(chain, base_dt);
    const double g2 = gamma * gamma;

    // Per copy: piecewise-constant approximate path with exponential(1)/n
    // holding times, evaluated at observation grid times; running Girsanov
    // log-weight against the observation increments.
    std::vector<std::vector<double>> num(N, std::vector<double>(copies));
    std::vector<std::vector<double>> den(N, std::vector<double>(copies));
    for (int c = 0; c < copies; ++c) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(c), 0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);
        auto draw = [&](const VectorXd& p) {
            double u = unif(rng), acc = 0.0;
            for (int i = 0; i < d; ++i) {
                acc += p(i);
                if (u <= acc) return i;
            }
            return d - 1;
        };
        int state = draw(p0);
        double next_jump = expo(rng) * base_dt;
        double logw = 0.0;
        for (int k = 0; k < N; ++k) {
            double t0 = k * obs.dt, t1 = (k + 1) * obs.dt;
            double hx = h(state);
            logw += hx * obs.dy[k] / g2 - 0.5 * hx * hx * obs.dt / g2;
            // Advance the approximate path across this observation slab.
            while (next_jump <= t1) {
                state = draw(P.row(state).transpose());
                next_jump += expo(rng) * base_dt;
            }
            num[k][c] = g(chain.states(state)) * std::exp(logw);
            den[k][c] = std::exp(logw);
            (void)t0;
        }
    }
    std::vector<double> out(N);
    for (int k = 0; k < N; ++k) {
        double sn = 0.0, sd = 0.0;
        for (int c = 0; c < copies; ++c) {
            sn += num[k][c];
            sd += den[k][c];
        }
        if (!(sd > 0))
            throw NumericalError("mc_approx_filter: weight degeneracy");
        out[k] = sn / sd;
    }
    (void)T;
    return out;
}

BirthDeathApprox sde_chain_approx(const std::function<double(double)>& a,
                                  const std::function<double(double)>& sigma,
                                  int n, double range_lo, double range_hi) {
    if (n < 1) throw SpecError("sde_chain_approx: n must be >= 1");
    if (range_lo >= range_hi) throw SpecError("sde_chain_approx: empty range");
    // Grid {k/n} intersected with the range.
    int klo = static_cast<int>(std::ceil(range_lo * n - 1e-12));
    int khi = static_cast<int>(std::floor(range_hi * n + 1e-12));
    const int d = khi - klo + 1;
    if (d < 2) throw SpecError("sde_chain_approx: grid too small");
    BirthDeathApprox out;
    out.spec.kind = ChainKind::OneStep;
    out.spec.states = VectorXd(d);
    out.spec.matrix = MatrixXd::Zero(d, d);
    out.hold_dt = VectorXd(d);
    for (int i = 0; i < d; ++i) {
        double x = static_cast<double>(klo + i) / n;
        out.spec.states(i) = x;
        double s2 = sigma(x) * sigma(x);
        double ax = a(x);
        if (s2 < std::abs(ax) / n)
            throw SpecError("sde_chain_approx: consistency violated at x = " +
                            std::to_string(x));
        double pu = (s2 + ax / n) / (2.0 * s2);
        double pd = (s2 - ax / n) / (2.0 * s2);
        out.hold_dt(i) = 1.0 / (n * n * s2);
        if (i == 0) {
            // Reflect at the boundary to keep mass in range.
            out.spec.matrix(i, i + 1) = pu;
            out.spec.matrix(i, i) = pd;
        } else if (i == d - 1) {
            out.spec.matrix(i, i - 1) = pd;
            out.spec.matrix(i, i) = pu;
        } else {
            out.spec.matrix(i, i + 1) = pu;
            out.spec.matrix(i, i - 1) = pd;
        }
    }
    return out;
}

namespace {

// Exact path-sum of likelihood-weighted transitions over the n-step bridge.
// L(v -> x) = sum over interior paths of prod(P) * exp(-(dy - mean)^2/(2 g^2))
// where mean = (1/n) sum of h at the left endpoints.
void path_sum(const MatrixXd& P, const VectorXd& h, int n, double dy,
              double gamma, int v, int step, int state, double prob,
              double hsum, MatrixXd& L) {
    const int d = static_cast<int>(h.size());
    if (step == n) {
        double mean = hsum / n;
        double r = dy - mean;
        L(v, state) += prob * std::exp(-r * r / (2.0 * gamma * gamma));
        return;
    }
    for (int nx = 0; nx < d; ++nx) {
        double p = P(state, nx);
        if (p <= 0) continue;
        path_sum(P, h, n, dy, gamma, v, step + 1, nx, prob * p, hsum + h(state),
                 L);
    }
}

} // namespace

VectorXd sparse_obs_filter(const MarkovSpec& chain, int n, double y0, double y1,
                           double gamma, const VectorXd& p0, const VectorXd& h,
                           bool force_mc, std::uint64_t seed, int mc_paths) {
    if (chain.kind != ChainKind::Generator)
        throw SpecError("sparse_obs_filter: expects a generator spec");
    if (n < 1) throw SpecError("sparse_obs_filter: n must be >= 1");
    if (gamma <= 0) throw SpecError("sparse_obs_filter: gamma must be > 0");
    const int d = chain.d();
    const double dy = y1 - y0;
    const MatrixXd P = semigroup(chain, 1.0 / n);
    const double g2 = gamma * gamma;

    // W(v, x) = sum over bridges from v to x of path prob * likelihood.
    MatrixXd W = MatrixXd::Zero(d, d);
    const double work = std::pow(static_cast<double>(d), n + 1);
    if (!force_mc && work <= 2e6) {
        for (int v = 0; v < d; ++v)
            path_sum(P, h, n, dy, gamma, v, 0, v, 1.0, 0.0, W);
    } else {
        // Free-forward Monte Carlo: sample unconditioned paths from each
        // start state and bin the likelihood by terminal state.
        for (int v = 0; v < d; ++v) {
            for (int m = 0; m < mc_paths; ++m) {
                auto rng = make_rng(seed, static_cast<std::uint64_t>(v),
                                    static_cast<std::uint64_t>(m));
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                int state = v;
                double hsum = 0.0;
                for (int k = 0; k < n; ++k) {
                    hsum += h(state);
                    double u = unif(rng), acc = 0.0;
                    for (int nx = 0; nx < d; ++nx) {
                        acc += P(state, nx);
                        if (u <= acc) {
                            state = nx;
                            break;
                        }
                    }
                }
                double r = dy - hsum / n;
                W(v, state) += std::exp(-r * r / (2.0 * g2)) / mc_paths;
            }
        }
    }
    VectorXd mass = W.transpose() * p0;
    double s = mass.sum();
    if (!(s > 0)) throw NumericalError("sparse_obs_filter: zero posterior mass");
    return mass / s;
}

} // namespace fb
