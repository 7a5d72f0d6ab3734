#include "filterbench/particle.hpp"

#include <cmath>
#include <limits>

#include "filterbench/rng.hpp"

namespace fb {

// Stream id reserved for resampling draws, distinct from any particle id.
static constexpr std::uint64_t kResampleTag = 0xfffffffffffffff0ULL;

StateModel hmm_state_model(const DiscreteHMM& hmm) {
    hmm.validate();
    const int d = hmm.d();
    auto draw = [d](const VectorXd& p, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(rng), acc = 0.0;
        for (int i = 0; i < d; ++i) {
            acc += p(i);
            if (u <= acc) return i;
        }
        return d - 1;
    };
    StateModel m;
    m.sample_initial = [hmm, draw](std::mt19937_64& rng) {
        return static_cast<double>(draw(hmm.p0, rng));
    };
    m.sample_transition = [hmm, draw](double x, std::mt19937_64& rng) {
        int i = static_cast<int>(x);
        return static_cast<double>(
            draw(hmm.chain.matrix.row(i).transpose(), rng));
    };
    m.log_likelihood = [hmm](double y, double x) {
        double r = y - hmm.h(static_cast<int>(x));
        return -r * r / (2.0 * hmm.gamma * hmm.gamma);
    };
    return m;
}

std::vector<double> ParticleEnsemble::normalized_weights() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double w : logw) m = std::max(m, w);
    std::vector<double> out(logw.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        out[i] = std::exp(logw[i] - m);
        z += out[i];
    }
    for (double& w : out) w /= z;
    return out;
}

ParticleEnsemble init_ensemble(const StateModel& model, int P,
                               std::uint64_t seed) {
    if (P < 1) throw SpecError("init_ensemble: P must be >= 1");
    ParticleEnsemble ens;
    ens.values.resize(P);
    ens.logw.assign(P, 0.0);
    for (int l = 0; l < P; ++l) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l), 0);
        ens.values[l] = model.sample_initial(rng);
    }
    return ens;
}

ParticleEnsemble sis_step(const StateModel& model, const ParticleEnsemble& ens,
                          double y, std::uint64_t seed, std::uint64_t step) {
    ParticleEnsemble out = ens;
    bool any_finite = false;
    for (int l = 0; l < out.P(); ++l) {
        if (step > 0) {
            auto rng = make_rng(seed, static_cast<std::uint64_t>(l), step);
            out.values[l] = model.sample_transition(ens.values[l], rng);
        }
        double ll = model.log_likelihood(y, out.values[l]);
        out.logw[l] += ll;
        if (std::isfinite(out.logw[l])) any_finite = true;
    }
    if (!any_finite)
        throw NumericalError("sis_step: all particle weights degenerate");
    return out;
}

double ess(const ParticleEnsemble& ens) {
    auto w = ens.normalized_weights();
    double s = 0.0;
    for (double x : w) s += x * x;
    return 1.0 / s;
}

ParticleEnsemble sir_resample(const ParticleEnsemble& ens, std::mt19937_64& rng) {
    auto w = ens.normalized_weights();
    std::discrete_distribution<int> pick(w.begin(), w.end());
    ParticleEnsemble out;
    const int P = ens.P();
    out.values.resize(P);
    out.logw.assign(P, 0.0);
    for (int l = 0; l < P; ++l) out.values[l] = ens.values[pick(rng)];
    return out;
}

ParticleFilterResult particle_filter(const StateModel& model,
                                     const std::vector<double>& obs, int P,
                                     double ess_threshold,
                                     const std::function<double(double)>& g,
                                     std::uint64_t seed) {
    if (ess_threshold < 1.0 || ess_threshold > P)
        throw SpecError("particle_filter: ess threshold must lie in [1, P]");
    ParticleFilterResult res;
    ParticleEnsemble ens = init_ensemble(model, P, seed);
    for (std::size_t n = 0; n < obs.size(); ++n) {
        ens = sis_step(model, ens, obs[n], seed, n);
        auto w = ens.normalized_weights();
        double est = 0.0;
        for (int l = 0; l < P; ++l) est += w[l] * g(ens.values[l]);
        res.estimate.push_back(est);
        double e = ess(ens);
        res.ess_trace.push_back(e);
        bool re = (e <= ess_threshold);
        if (re) {
            auto rng = make_rng(seed, kResampleTag, n);
            ens = sir_resample(ens, rng);
        }
        res.resampled.push_back(re ? 1 : 0);
    }
    return res;
}

void RegimeModel::validate() const {
    regimes.validate();
    if (regimes.kind != ChainKind::OneStep)
        throw SpecError("RegimeModel: regimes must be one-step");
    const int d = regimes.d();
    if (a.size() != d || sigma.size() != d || h.size() != d || gamma.size() != d)
        throw SpecError("RegimeModel: per-regime coefficient length mismatch");
    if (gamma.minCoeff() <= 0) throw SpecError("RegimeModel: gamma must be > 0");
    if (p0.size() != d || std::abs(p0.sum() - 1.0) > 1e-10)
        throw SpecError("RegimeModel: p0 is not a distribution");
    if (x0_var < 0) throw SpecError("RegimeModel: negative initial variance");
}

namespace {

int draw_index(const VectorXd& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng), acc = 0.0;
    const int d = static_cast<int>(p.size());
    for (int i = 0; i < d; ++i) {
        acc += p(i);
        if (u <= acc) return i;
    }
    return d - 1;
}

struct RBP {
    int theta;
    double mean, var; // marginal Kalman state
    double logw;
};

double logsumexp_max(const std::vector<RBP>& ps, double& m) {
    m = -std::numeric_limits<double>::infinity();
    for (const auto& p : ps) m = std::max(m, p.logw);
    double z = 0.0;
    for (const auto& p : ps) z += std::exp(p.logw - m);
    return z;
}

} // namespace

RBPFResult rbpf(const RegimeModel& model, const std::vector<double>& obs, int P,
                double ess_threshold, std::uint64_t seed) {
    model.validate();
    if (ess_threshold < 1.0 || ess_threshold > P)
        throw SpecError("rbpf: ess threshold must lie in [1, P]");
    const int d = model.regimes.d();
    std::vector<RBP> ps(P);
    for (int l = 0; l < P; ++l) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l), 0);
        ps[l] = {draw_index(model.p0, rng), model.x0_mean, model.x0_var, 0.0};
    }
    RBPFResult res;
    for (std::size_t n = 0; n < obs.size(); ++n) {
        for (int l = 0; l < P; ++l) {
            auto rng = make_rng(seed, static_cast<std::uint64_t>(l), n + 1);
            if (n > 0)
                ps[l].theta = draw_index(
                    model.regimes.matrix.row(ps[l].theta).transpose(), rng);
            const int t = ps[l].theta;
            const double a = model.a(t), s = model.sigma(t), h = model.h(t),
                         g = model.gamma(t);
            // One-step predictive of X and of Y under this regime path.
            double pm = (n == 0) ? ps[l].mean : a * ps[l].mean;
            double pv = (n == 0) ? ps[l].var : a * a * ps[l].var + s * s;
            double mu_pred = h * pm;
            double v_pred = h * h * pv + g * g;
            if (v_pred <= 0)
                throw NumericalError("rbpf: nonpositive predictive variance");
            double innov = obs[n] - mu_pred;
            double gain = pv * h / v_pred;
            ps[l].mean = pm + gain * innov;
            ps[l].var = (1.0 - gain * h) * pv;
            ps[l].logw += -0.5 * std::log(2.0 * M_PI * v_pred) -
                          innov * innov / (2.0 * v_pred);
        }
        double m;
        double z = logsumexp_max(ps, m);
        VectorXd post = VectorXd::Zero(d);
        double xest = 0.0, sum_sq = 0.0;
        for (auto& p : ps) {
            double w = std::exp(p.logw - m) / z;
            post(p.theta) += w;
            xest += w * p.mean;
            sum_sq += w * w;
        }
        res.regime_posterior.push_back(post);
        res.state_estimate.push_back(xest);
        double e = 1.0 / sum_sq;
        res.ess_trace.push_back(e);
        bool re = (e <= ess_threshold);
        if (re) {
            auto rng = make_rng(seed, kResampleTag, n);
            std::vector<double> w(P);
            for (int l = 0; l < P; ++l) w[l] = std::exp(ps[l].logw - m);
            std::discrete_distribution<int> pick(w.begin(), w.end());
            std::vector<RBP> next(P);
            for (int l = 0; l < P; ++l) {
                next[l] = ps[pick(rng)];
                next[l].logw = 0.0;
            }
            ps = std::move(next);
        }
        res.resampled.push_back(re ? 1 : 0);
    }
    return res;
}

RBPFResult joint_pf(const RegimeModel& model, const std::vector<double>& obs,
                    int P, double ess_threshold, std::uint64_t seed) {
    model.validate();
    if (ess_threshold < 1.0 || ess_threshold > P)
        throw SpecError("joint_pf: ess threshold must lie in [1, P]");
    const int d = model.regimes.d();
    struct JP {
        int theta;
        double x;
        double logw;
    };
    std::vector<JP> ps(P);
    for (int l = 0; l < P; ++l) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(l), 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        int t = draw_index(model.p0, rng);
        ps[l] = {t, model.x0_mean + std::sqrt(model.x0_var) * normal(rng), 0.0};
    }
    RBPFResult res;
    for (std::size_t n = 0; n < obs.size(); ++n) {
        for (int l = 0; l < P; ++l) {
            auto rng = make_rng(seed, static_cast<std::uint64_t>(l), n + 1);
            std::normal_distribution<double> normal(0.0, 1.0);
            if (n > 0) {
                ps[l].theta = draw_index(
                    model.regimes.matrix.row(ps[l].theta).transpose(), rng);
                const int t = ps[l].theta;
                ps[l].x = model.a(t) * ps[l].x + model.sigma(t) * normal(rng);
            }
            const int t = ps[l].theta;
            double r = obs[n] - model.h(t) * ps[l].x;
            double g2 = model.gamma(t) * model.gamma(t);
            ps[l].logw += -0.5 * std::log(2.0 * M_PI * g2) - r * r / (2.0 * g2);
        }
        double m = -std::numeric_limits<double>::infinity();
        for (auto& p : ps) m = std::max(m, p.logw);
        double z = 0.0;
        for (auto& p : ps) z += std::exp(p.logw - m);
        VectorXd post = VectorXd::Zero(d);
        double xest = 0.0, sum_sq = 0.0;
        for (auto& p : ps) {
            double w = std::exp(p.logw - m) / z;
            post(p.theta) += w;
            xest += w * p.x;
            sum_sq += w * w;
        }
        res.regime_posterior.push_back(post);
        res.state_estimate.push_back(xest);
        double e = 1.0 / sum_sq;
        res.ess_trace.push_back(e);
        bool re = (e <= ess_threshold);
        if (re) {
            auto rng = make_rng(seed, kResampleTag, n);
            std::vector<double> w(P);
            for (int l = 0; l < P; ++l) w[l] = std::exp(ps[l].logw - m);
            std::discrete_distribution<int> pick(w.begin(), w.end());
            std::vector<JP> next(P);
            for (int l = 0; l < P; ++l) {
                next[l] = ps[pick(rng)];
                next[l].logw = 0.0;
            }
            ps = std::move(next);
        }
        res.resampled.push_back(re ? 1 : 0);
    }
    return res;
}

} // namespace fb
