#include "filterbench/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "filterbench/contfilter.hpp"
#include "filterbench/heston.hpp"
#include "filterbench/linear.hpp"
#include "filterbench/particle.hpp"
#include "filterbench/rng.hpp"
#include "filterbench/stability.hpp"

using nlohmann::json;

namespace fb {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::vector<double>> ingest_csv(
    const std::string& path, const std::vector<std::string>& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header != schema) {
        std::string want;
        for (const auto& s : schema) want += (want.empty() ? "" : ",") + s;
        throw DataError(path + ": header mismatch, expected '" + want + "'");
    }
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty())
                throw DataError(path + ": blank cell at line " +
                                std::to_string(lineno));
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (...) {
                throw DataError(path + ": non-numeric cell at line " +
                                std::to_string(lineno));
            }
            if (pos != cell.size())
                throw DataError(path + ": non-numeric cell at line " +
                                std::to_string(lineno));
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at line " +
                                std::to_string(lineno));
            row.push_back(v);
        }
        if (row.size() != schema.size())
            throw DataError(path + ": wrong column count at line " +
                            std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    return rows;
}

void emit_csv(const std::map<std::string, std::vector<double>>& columns,
              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    std::string header;
    std::size_t n = 0;
    for (const auto& [name, col] : columns) {
        header += (header.empty() ? "" : ",") + name;
        n = std::max(n, col.size());
    }
    out << header << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        bool first = true;
        for (const auto& [name, col] : columns) {
            if (!first) out << ",";
            first = false;
            if (i < col.size()) out << format_double(col[i]);
        }
        out << "\n";
    }
    if (!out) throw DataError("write failed on '" + path + "'");
}

std::uint64_t config_hash(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError(path + ": bad JSON: " + e.what());
    }
    return j;
}

VectorXd to_vec(const json& a) {
    VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
    return v;
}

MatrixXd to_mat(const json& a) {
    const auto r = a.size();
    if (r == 0) throw DataError("empty matrix in JSON");
    const auto c = a[0].size();
    MatrixXd m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (a[i].size() != c) throw DataError("ragged matrix rows in JSON");
        for (std::size_t j = 0; j < c; ++j) m(i, j) = a[i][j].get<double>();
    }
    return m;
}

} // namespace

MarkovSpec load_markov_spec_json(const std::string& path) {
    json j = load_json(path);
    MarkovSpec s;
    try {
        s.states = to_vec(j.at("states"));
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "generator")
            s.kind = ChainKind::Generator;
        else if (kind == "one-step")
            s.kind = ChainKind::OneStep;
        else
            throw DataError(path + ": kind must be generator or one-step");
        s.matrix = to_mat(j.at("matrix"));
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    s.validate();
    return s;
}

DiscreteHMM load_hmm_json(const std::string& path) {
    json j = load_json(path);
    DiscreteHMM h;
    try {
        h.chain.states = to_vec(j.at("states"));
        h.chain.kind = ChainKind::OneStep;
        h.chain.matrix = to_mat(j.at("lambda"));
        h.h = to_vec(j.at("h"));
        h.gamma = j.at("gamma").get<double>();
        h.p0 = to_vec(j.at("p0"));
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    h.validate();
    return h;
}

namespace {

// ---- shared experiment pieces -------------------------------------------

struct RandomWalkData {
    VectorXd x, y;
    double gamma;
    double step_std;
};

// Small-step random walk with observation noise tuned per path so the raw
// measurement lands at the requested empirical SNR.
RandomWalkData make_random_walk(int n, double target_snr_y, std::uint64_t seed,
                                double step_std = 0.08) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    RandomWalkData d;
    d.step_std = step_std;
    d.x = VectorXd(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += step_std * normal(rng);
        d.x(i) = acc;
    }
    // Mean-square signal power / gamma^2 = target raw SNR.
    d.gamma = std::sqrt(d.x.squaredNorm() / n / target_snr_y);
    d.y = VectorXd(n);
    for (int i = 0; i < n; ++i) d.y(i) = d.x(i) + d.gamma * normal(rng);
    return d;
}

struct MethodResult {
    std::string name;
    VectorXd estimate;
    double snr, mse;
};

std::vector<MethodResult> random_walk_methods(const RandomWalkData& d) {
    const int n = static_cast<int>(d.x.size());
    std::vector<MethodResult> out;
    auto add = [&](const std::string& name, const VectorXd& est) {
        out.push_back({name, est, empirical_snr(d.x, est),
                       empirical_mse(d.x, est)});
    };
    add("raw", d.y);

    std::set<int> keep;
    int band = n / 20; // lowest 5% of frequencies plus mirrors
    for (int k = 0; k <= band; ++k) {
        keep.insert(k);
        keep.insert((n - k) % n);
    }
    add("bandpass", fft_bandpass(d.y, keep));

    int levels = 0;
    int pow2 = 1;
    while (pow2 < n) {
        pow2 <<= 1;
        ++levels;
    }
    std::set<int> kill = {1, 2, 3, 4};
    add("haar", wavelet_denoise(d.y, "haar", levels, kill));

    const double s2 = d.step_std * d.step_std;
    MatrixXd Q(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Q(i, j) = s2 * (std::min(i, j) + 1);
    MatrixXd R = d.gamma * d.gamma * MatrixXd::Identity(n, n);
    add("wiener", wiener_filter(d.y, VectorXd::Zero(n), Q, R));

    GaussLinearSSM m;
    m.A = m.H = MatrixXd::Identity(1, 1);
    m.Qcov = s2 * MatrixXd::Identity(1, 1);
    m.Rcov = d.gamma * d.gamma * MatrixXd::Identity(1, 1);
    m.init_mean = VectorXd::Zero(1);
    m.init_cov = MatrixXd::Identity(1, 1);
    std::vector<VectorXd> obs(n);
    for (int i = 0; i < n; ++i) obs[i] = VectorXd::Constant(1, d.y(i));
    auto steps = kalman_filter(m, obs);
    VectorXd kal(n);
    for (int i = 0; i < n; ++i) kal(i) = steps[i].mean(0);
    add("kalman", kal);
    return out;
}

void print_summary(json j, const json& cfg) {
    j["config_hash"] = config_hash(cfg.dump());
    j["version"] = "filterbench-1.0";
    std::cout << j.dump() << "\n";
}

// ---- subcommand bodies ---------------------------------------------------

int cmd_linear(const std::string& method, const std::string& config_path,
               const std::string& out_path) {
    json cfg = load_json(config_path);
    auto t0 = std::chrono::steady_clock::now();

    if (method == "kalman-bucy") {
        double a = cfg.at("a"), sigma = cfg.at("sigma"), h = cfg.at("h"),
               gamma = cfg.at("gamma"), S0 = cfg.at("sigma0"),
               T = cfg.at("T"), dt = cfg.at("dt");
        std::vector<double> grid;
        for (double t = 0.0; t <= T + 1e-12; t += dt) grid.push_back(t);
        auto res = kalman_bucy(a, sigma, h, gamma, S0, grid);
        emit_csv({{"sigma_closed", res.sigma_closed},
                  {"sigma_numeric", res.sigma_numeric},
                  {"t", res.t}},
                 out_path);
        json s;
        s["divergent"] = res.divergent;
        s["terminal_sigma"] = res.sigma_numeric.back();
        print_summary(s, cfg);
        return 0;
    }
    if (method == "reed") {
        VectorXd X = to_vec(cfg.at("template"));
        MatrixXd R = to_mat(cfg.at("R"));
        auto [H, snr] = reed_filter(R, X);
        std::map<std::string, std::vector<double>> cols;
        cols["filter"] = std::vector<double>(H.data(), H.data() + H.size());
        emit_csv(cols, out_path);
        json s;
        s["snr_max"] = snr;
        print_summary(s, cfg);
        return 0;
    }

    int n = cfg.value("n", 1000);
    std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    double target = cfg.value("target_snr_y", 7.5);
    RandomWalkData d = make_random_walk(n, target, seed);
    VectorXd est;
    if (method == "bandpass") {
        std::set<int> keep;
        int band = cfg.value("band", n / 20);
        for (int k = 0; k <= band; ++k) {
            keep.insert(k);
            keep.insert((n - k) % n);
        }
        est = fft_bandpass(d.y, keep);
    } else if (method == "wavelet") {
        std::string family = cfg.value("family", std::string("haar"));
        int levels = cfg.value("levels", 10);
        std::set<int> kill;
        for (int l : cfg.value("kill", std::vector<int>{1, 2, 3, 4}))
            kill.insert(l);
        est = wavelet_denoise(d.y, family, levels, kill);
    } else if (method == "wiener") {
        const double s2 = d.step_std * d.step_std;
        MatrixXd Q(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) Q(i, j) = s2 * (std::min(i, j) + 1);
        est = wiener_filter(d.y, VectorXd::Zero(n),
                            Q, d.gamma * d.gamma * MatrixXd::Identity(n, n));
    } else if (method == "kalman") {
        GaussLinearSSM m;
        m.A = m.H = MatrixXd::Identity(1, 1);
        m.Qcov = d.step_std * d.step_std * MatrixXd::Identity(1, 1);
        m.Rcov = d.gamma * d.gamma * MatrixXd::Identity(1, 1);
        m.init_mean = VectorXd::Zero(1);
        m.init_cov = MatrixXd::Identity(1, 1);
        std::vector<VectorXd> obs(n);
        for (int i = 0; i < n; ++i) obs[i] = VectorXd::Constant(1, d.y(i));
        auto steps = kalman_filter(m, obs);
        est = VectorXd(n);
        for (int i = 0; i < n; ++i) est(i) = steps[i].mean(0);
    } else {
        throw SpecError("linear: unknown method '" + method + "'");
    }
    std::map<std::string, std::vector<double>> cols;
    std::vector<double> idx(n), truth(n), meas(n), ev(n);
    for (int i = 0; i < n; ++i) {
        idx[i] = i;
        truth[i] = d.x(i);
        meas[i] = d.y(i);
        ev[i] = est(i);
    }
    cols["estimate"] = ev;
    cols["measurement"] = meas;
    cols["n"] = idx;
    cols["truth"] = truth;
    emit_csv(cols, out_path);
    auto t1 = std::chrono::steady_clock::now();
    json s;
    s["snr"] = empirical_snr(d.x, est);
    s["mse"] = empirical_mse(d.x, est);
    s["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    print_summary(s, cfg);
    return 0;
}

int cmd_pf(const std::string& model_path, const std::string& obs_path, int P,
           double ess_frac, std::uint64_t seed, const std::string& out_path) {
    DiscreteHMM hmm = load_hmm_json(model_path);
    auto rows = ingest_csv(obs_path, {"y"});
    std::vector<double> obs;
    for (auto& r : rows) obs.push_back(r[0]);
    StateModel sm = hmm_state_model(hmm);
    auto g = [&](double xi) { return hmm.chain.states(static_cast<int>(xi)); };
    auto res = particle_filter(sm, obs, P, std::max(1.0, ess_frac * P), g, seed);
    std::map<std::string, std::vector<double>> cols;
    std::vector<double> idx(obs.size()), rs(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        idx[i] = i;
        rs[i] = res.resampled[i];
    }
    cols["ess"] = res.ess_trace;
    cols["estimate"] = res.estimate;
    cols["n"] = idx;
    cols["resampled"] = rs;
    emit_csv(cols, out_path);
    json cfg = {{"model", model_path}, {"obs", obs_path}, {"particles", P},
                {"ess_frac", ess_frac}, {"seed", seed}};
    json s;
    s["final_estimate"] = res.estimate.back();
    print_summary(s, cfg);
    return 0;
}

int cmd_cont(const std::string& scheme, const std::string& config_path,
             const std::string& out_path) {
    json cfg = load_json(config_path);
    MarkovSpec Q;
    Q.kind = ChainKind::Generator;
    Q.states = to_vec(cfg.at("states"));
    Q.matrix = to_mat(cfg.at("matrix"));
    Q.validate();
    VectorXd h = to_vec(cfg.at("h"));
    double gamma = cfg.at("gamma");
    double dt = cfg.at("dt");
    int n = cfg.at("n");
    std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const int d = Q.d();
    VectorXd p0 = cfg.contains("p0") ? to_vec(cfg.at("p0"))
                                     : VectorXd::Constant(d, 1.0 / d);

    // Latent path on the grid, then synthesized observation increments.
    std::vector<double> grid(n + 1);
    for (int k = 0; k <= n; ++k) grid[k] = k * dt;
    SdePath chain_path = simulate_chain(Q, grid, seed);
    std::vector<int> idx_path(n + 1);
    for (int k = 0; k <= n; ++k) {
        int best = 0;
        for (int i = 0; i < d; ++i)
            if (std::abs(Q.states(i) - chain_path.values[k]) <
                std::abs(Q.states(best) - chain_path.values[k]))
                best = i;
        idx_path[k] = best;
    }
    ObsIncrementSeries obs = synthesize_obs(
        std::vector<int>(idx_path.begin(), idx_path.end() - 1), h, gamma, dt,
        seed + 1);

    std::map<std::string, std::vector<double>> cols;
    std::vector<double> tcol;
    std::vector<std::vector<double>> mass(d);
    auto record = [&](double t, const VectorXd& pi) {
        tcol.push_back(t);
        for (int i = 0; i < d; ++i) mass[i].push_back(pi(i));
    };

    if (scheme == "zakai") {
        UnnormalizedMass p{p0, 0.0, 0};
        record(0.0, p.mass);
        for (int k = 0; k < n; ++k) {
            p = zakai_step(Q, h, gamma, p, obs.dy[k], dt);
            record((k + 1) * dt, p.mass);
        }
        if (p.clip_count > n / 100)
            std::cerr << "cont: clipping in " << p.clip_count << " of " << n
                      << " steps\n";
    } else if (scheme == "ks") {
        VectorXd pi = p0;
        record(0.0, pi);
        for (int k = 0; k < n; ++k) {
            pi = ks_step(Q, h, gamma, pi, obs.dy[k], dt);
            record((k + 1) * dt, pi);
        }
    } else if (scheme == "smooth") {
        auto res = smooth_alpha(Q, h, gamma, obs, n, p0);
        for (int k = 0; k <= n; ++k) record(k * dt, res.smoothed[k]);
    } else if (scheme == "mc-approx") {
        int fid = cfg.value("fidelity", 8);
        auto est = mc_approx_filter(
            Q, fid, obs, [](double x) { return x; }, seed + 2, p0, h, gamma,
            cfg.value("copies", 2000));
        cols["estimate"] = est;
        std::vector<double> t2(est.size());
        for (std::size_t k = 0; k < est.size(); ++k) t2[k] = (k + 1) * dt;
        cols["t"] = t2;
        emit_csv(cols, out_path);
        print_summary(json{{"terminal", est.back()}}, cfg);
        return 0;
    } else if (scheme == "sparse") {
        int fid = cfg.value("fidelity", 4);
        double y1 = 0.0;
        for (double v : obs.dy) y1 += v;
        VectorXd pi = sparse_obs_filter(Q, fid, 0.0, y1, gamma, p0, h);
        record(1.0, pi);
    } else {
        throw SpecError("cont: unknown scheme '" + scheme + "'");
    }
    cols["t"] = tcol;
    for (int i = 0; i < d; ++i) cols["m" + std::to_string(i)] = mass[i];
    emit_csv(cols, out_path);
    print_summary(json::object(), cfg);
    return 0;
}

int cmd_sv_filter(const std::string& params_path, const std::string& prices_path,
                  const std::string& out_path) {
    json cfg = load_json(params_path);
    HestonParams p;
    p.mu = cfg.at("mu");
    p.kappa = cfg.at("kappa");
    p.xbar = cfg.at("xbar");
    p.gamma = cfg.at("gamma");
    p.rho = cfg.at("rho");
    p.validate();
    double dt = cfg.at("dt");
    auto rows = ingest_csv(prices_path, {"t", "y"});
    if (rows.size() < 2) throw DataError(prices_path + ": need >= 2 rows");
    VarianceGrid grid = make_variance_grid(p, cfg.value("nodes", 200));
    VectorXd mass = grid.mass;
    std::vector<double> tcol, mean;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        double dY = rows[k][1] - rows[k - 1][1];
        mass = sv_filter_step(p, grid, mass, dY, dt);
        tcol.push_back(rows[k][0]);
        mean.push_back(grid.nodes.dot(mass));
    }
    emit_csv({{"posterior_mean", mean}, {"t", tcol}}, out_path);
    print_summary(json{{"terminal_mean", mean.back()}}, cfg);
    return 0;
}

int cmd_vix(const std::string& puts_path, const std::string& calls_path,
            double F, double r, double T) {
    auto load_curve = [](const std::string& path) {
        OptionCurve c;
        for (auto& row : ingest_csv(path, {"strike", "price"})) {
            c.strikes.push_back(row[0]);
            c.prices.push_back(row[1]);
        }
        return c;
    };
    double V = vix_replication(load_curve(puts_path), load_curve(calls_path), F,
                               r, T);
    json cfg = {{"forward", F}, {"rate", r}, {"tenor", T}};
    print_summary(json{{"V", V}, {"vix", 100.0 * std::sqrt(V)}}, cfg);
    return 0;
}

int cmd_hmm(const std::string& model_path, const std::string& obs_path,
            const std::string& mode, const std::string& out_path) {
    DiscreteHMM hmm = load_hmm_json(model_path);
    auto rows = ingest_csv(obs_path, {"y"});
    std::vector<double> obs;
    for (auto& r : rows) obs.push_back(r[0]);
    const int d = hmm.d();
    std::map<std::string, std::vector<double>> cols;
    std::vector<double> idx(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) idx[i] = i;
    cols["n"] = idx;
    json s;
    if (mode == "filter") {
        FilterTrace ft = forward_filter(hmm, obs);
        for (int i = 0; i < d; ++i) {
            std::vector<double> col(obs.size());
            for (std::size_t k = 0; k < obs.size(); ++k) col[k] = ft.pi[k](i);
            cols["pi" + std::to_string(i)] = col;
        }
        cols["logc"] = ft.logc;
        s["loglik"] = ft.loglik();
    } else if (mode == "smooth") {
        SmoothTrace st = smooth(hmm, obs);
        for (int i = 0; i < d; ++i) {
            std::vector<double> col(obs.size());
            for (std::size_t k = 0; k < obs.size(); ++k)
                col[k] = st.pi_smooth[k](i);
            cols["pi" + std::to_string(i)] = col;
        }
    } else if (mode == "viterbi") {
        auto path = viterbi(hmm, obs);
        std::vector<double> col(path.begin(), path.end());
        cols["state"] = col;
    } else {
        throw SpecError("hmm: unknown mode '" + mode + "'");
    }
    emit_csv(cols, out_path);
    json cfg = {{"model", model_path}, {"obs", obs_path}, {"mode", mode}};
    print_summary(s, cfg);
    return 0;
}

int cmd_stability(const std::string& hmm_path, int n, int nseeds,
                  std::uint64_t seed, const std::string& out_path) {
    DiscreteHMM hmm = load_hmm_json(hmm_path);
    const int d = hmm.d();
    VectorXd nu = VectorXd::Constant(d, 1.0 / d);
    VectorXd nut = VectorXd::Zero(d);
    nut(0) = 1.0;
    std::vector<std::uint64_t> seeds(nseeds);
    for (int i = 0; i < nseeds; ++i) seeds[i] = seed + i;
    auto est = empirical_exponent(hmm, nu, nut, n, seeds);
    auto lyap = lyapunov_spectrum(hmm, n, seeds);

    // Distance and log-norm trace along the first seed's stream.
    std::vector<int> states;
    std::vector<double> obs;
    simulate_hmm(hmm, n, seeds[0], states, obs);
    FilterCocycle c = make_cocycle(hmm, obs);
    VectorXd pa = nu, pb = nut;
    double logn = 0.0;
    std::vector<double> dist(n), lognorm(n), idx(n);
    for (int k = 0; k < n; ++k) {
        auto step = [&](VectorXd& p) {
            p = c.psi[k].cwiseProduct(c.lambda_T * p);
            double s2 = p.sum();
            p /= s2;
            return s2;
        };
        logn += std::log(step(pa));
        step(pb);
        dist[k] = (pa - pb).norm();
        lognorm[k] = logn;
        idx[k] = k;
    }
    emit_csv({{"distance", dist}, {"lognorm", lognorm}, {"n", idx}}, out_path);
    json cfg = {{"hmm", hmm_path}, {"n", n}, {"seeds", nseeds}, {"seed", seed}};
    json s;
    s["exponent"] = est.exponent;
    s["exponent_se"] = est.se;
    s["v1"] = lyap.v1;
    s["v2"] = lyap.v2;
    s["v2_minus_v1"] = lyap.v2 - lyap.v1;
    print_summary(s, cfg);
    return 0;
}

int cmd_run(const std::string& config_path) {
    json cfg = load_json(config_path);
    std::string kind = cfg.at("kind").get<std::string>();
    std::string out = cfg.at("out").get<std::string>();
    std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    auto t0 = std::chrono::steady_clock::now();
    json s;
    if (kind == "random-walk-comparison") {
        RandomWalkData d = make_random_walk(cfg.value("n", 1000),
                                            cfg.value("target_snr_y", 7.5), seed);
        auto methods = random_walk_methods(d);
        std::vector<double> id, snr, mse;
        json names = json::array();
        for (std::size_t i = 0; i < methods.size(); ++i) {
            id.push_back(static_cast<double>(i));
            snr.push_back(methods[i].snr);
            mse.push_back(methods[i].mse);
            names.push_back(methods[i].name);
        }
        emit_csv({{"method_id", id}, {"mse", mse}, {"snr", snr}}, out);
        s["methods"] = names;
    } else if (kind == "stability-counterexample") {
        auto dist = counterexample_run(cfg.value("n", 10000), seed);
        std::vector<double> idx(dist.size());
        for (std::size_t i = 0; i < dist.size(); ++i) idx[i] = i;
        emit_csv({{"distance", dist}, {"n", idx}}, out);
        double mn = *std::min_element(dist.begin() + dist.size() / 2, dist.end());
        s["min_tail_distance"] = mn;
    } else {
        throw SpecError("run: unknown experiment kind '" + kind + "'");
    }
    auto t1 = std::chrono::steady_clock::now();
    s["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    print_summary(s, cfg);
    return 0;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"stochastic filtering toolkit"};
    app.require_subcommand(1);

    // Parallelism cap honored by keeping every experiment single-threaded;
    // parsed here so misconfiguration fails loudly.
    if (const char* tv = std::getenv("FILTERBENCH_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(tv, &end, 10);
        if (!end || *end != '\0' || v < 1) {
            std::cerr << "FILTERBENCH_THREADS must be a positive integer\n";
            return 2;
        }
    }

    std::string method, config, out = "out.csv", model, obspath, mode = "filter";
    std::string puts_path, calls_path, params, prices;
    int P = 1000, n = 10000, nseeds = 4;
    double ess_frac = 0.5, F = 0, r = 0, T = 0;
    std::uint64_t seed = 0;

    auto* lin = app.add_subcommand("linear", "linear estimation methods");
    lin->add_option("--method", method, "reed|bandpass|wavelet|wiener|kalman|kalman-bucy")
        ->required();
    lin->add_option("--config", config)->required();
    lin->add_option("--out", out);

    auto* pf = app.add_subcommand("pf", "particle filter");
    pf->add_option("--model", model)->required();
    pf->add_option("--obs", obspath)->required();
    pf->add_option("--particles", P);
    pf->add_option("--ess-frac", ess_frac);
    pf->add_option("--seed", seed)->required();
    pf->add_option("--out", out);

    auto* cont = app.add_subcommand("cont", "continuous-time filters");
    cont->add_option("--scheme", mode, "zakai|ks|smooth|mc-approx|sparse")
        ->required();
    cont->add_option("--config", config)->required();
    cont->add_option("--out", out);

    auto* sv = app.add_subcommand("sv-filter", "volatility filter");
    sv->add_option("--params", params)->required();
    sv->add_option("--prices", prices)->required();
    sv->add_option("--out", out);

    auto* vix = app.add_subcommand("vix", "variance replication");
    vix->add_option("--puts", puts_path)->required();
    vix->add_option("--calls", calls_path)->required();
    vix->add_option("--forward", F)->required();
    vix->add_option("--rate", r)->required();
    vix->add_option("--tenor", T)->required();

    auto* hn = app.add_subcommand("hmm", "discrete HMM inference");
    hn->add_option("--model", model)->required();
    hn->add_option("--obs", obspath)->required();
    hn->add_option("--mode", mode, "filter|smooth|viterbi");
    hn->add_option("--out", out);

    auto* st = app.add_subcommand("stability", "filter stability experiments");
    st->add_option("--hmm", model)->required();
    st->add_option("--n", n);
    st->add_option("--seeds", nseeds);
    st->add_option("--seed", seed)->required();
    st->add_option("--out", out);

    auto* rn = app.add_subcommand("run", "named experiment from a config file");
    rn->add_option("--config", config)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (lin->parsed()) return cmd_linear(method, config, out);
        if (pf->parsed())
            return cmd_pf(model, obspath, P, ess_frac, seed, out);
        if (cont->parsed()) return cmd_cont(mode, config, out);
        if (sv->parsed()) return cmd_sv_filter(params, prices, out);
        if (vix->parsed()) return cmd_vix(puts_path, calls_path, F, r, T);
        if (hn->parsed()) return cmd_hmm(model, obspath, mode, out);
        if (st->parsed()) return cmd_stability(model, n, nseeds, seed, out);
        if (rn->parsed()) return cmd_run(config);
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: bad config: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

} // namespace fb
