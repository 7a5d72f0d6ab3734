#include "filterbench/markov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "filterbench/rng.hpp"

namespace fb {

void MarkovSpec::validate() const {
    const int n = d();
    if (n < 1) throw SpecError("MarkovSpec: need at least one state");
    if (matrix.rows() != n || matrix.cols() != n)
        throw SpecError("MarkovSpec: matrix must be d x d");
    for (int i = 0; i < n; ++i) {
        double row = matrix.row(i).sum();
        if (kind == ChainKind::Generator) {
            if (std::abs(row) > 1e-10)
                throw SpecError("MarkovSpec: generator row " + std::to_string(i) +
                                " does not sum to 0");
            for (int j = 0; j < n; ++j)
                if (i != j && matrix(i, j) < -1e-14)
                    throw SpecError("MarkovSpec: negative off-diagonal rate");
        } else {
            if (std::abs(row - 1.0) > 1e-10)
                throw SpecError("MarkovSpec: transition row " + std::to_string(i) +
                                " does not sum to 1");
            for (int j = 0; j < n; ++j)
                if (matrix(i, j) < -1e-14 || matrix(i, j) > 1.0 + 1e-12)
                    throw SpecError("MarkovSpec: transition entry outside [0,1]");
        }
    }
}

// Scaling and squaring with the diagonal (6,6) Pade approximant.  Good to
// well below 1e-12 once ||A/2^s|| <= 1/2, which is what the scaling enforces.
MatrixXd expm(const MatrixXd& A) {
    const int n = static_cast<int>(A.rows());
    const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const MatrixXd As = A / std::pow(2.0, s);

    // Pade(6,6) coefficients for exp.
    static const double c[] = {1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0,
                               1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0};
    const MatrixXd I = MatrixXd::Identity(n, n);
    MatrixXd A2 = As * As;
    MatrixXd A4 = A2 * A2;
    MatrixXd A6 = A4 * A2;
    MatrixXd U = As * (c[1] * I + c[3] * A2 + c[5] * A4);
    MatrixXd V = c[0] * I + c[2] * A2 + c[4] * A4 + c[6] * A6;
    MatrixXd R = (V - U).partialPivLu().solve(V + U);
    for (int k = 0; k < s; ++k) R = R * R;
    return R;
}

MatrixXd semigroup(const MarkovSpec& spec, double dt) {
    spec.validate();
    if (spec.kind != ChainKind::Generator)
        throw SpecError("semigroup: expects a generator spec");
    if (dt < 0) throw SpecError("semigroup: dt must be >= 0");
    MatrixXd P = expm(spec.matrix * dt);
    // Clean tiny negatives from the rational approximation.
    for (int i = 0; i < P.rows(); ++i)
        for (int j = 0; j < P.cols(); ++j)
            if (P(i, j) < 0 && P(i, j) > -1e-13) P(i, j) = 0.0;
    return P;
}

VectorXd invariant_distribution(const MarkovSpec& spec) {
    spec.validate();
    const int n = spec.d();
    // Balance system: mu^T (K - I) = 0 (one-step) or mu^T Q = 0, with the
    // normalization row sum(mu) = 1 appended; solved by least squares.
    MatrixXd B;
    if (spec.kind == ChainKind::OneStep)
        B = spec.matrix.transpose() - MatrixXd::Identity(n, n);
    else
        B = spec.matrix.transpose();

    // Uniqueness: the balance matrix must have a one-dimensional null space.
    Eigen::FullPivLU<MatrixXd> lu(B);
    lu.setThreshold(1e-9);
    if (lu.rank() != n - 1)
        throw SpecError("invariant_distribution: no unique invariant (chain reducible)");

    MatrixXd A(n + 1, n);
    A.topRows(n) = B;
    A.bottomRows(1).setOnes();
    VectorXd b = VectorXd::Zero(n + 1);
    b(n) = 1.0;
    VectorXd mu = A.colPivHouseholderQr().solve(b);

    double resid = (B * mu).norm();
    if (resid > 1e-10 || mu.minCoeff() < -1e-10)
        throw SpecError("invariant_distribution: balance residual too large");
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();
    return mu;
}

std::pair<double, double> spectral_gap(const MarkovSpec& spec) {
    spec.validate();
    if (spec.kind != ChainKind::OneStep)
        throw SpecError("spectral_gap: expects a one-step spec");
    Eigen::EigenSolver<MatrixXd> es(spec.matrix);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(),
                                         es.eigenvalues().data() + spec.d());
    // Sort by modulus descending, ties by real part descending.
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        double ma = std::abs(a), mb = std::abs(b);
        if (std::abs(ma - mb) > 1e-14) return ma > mb;
        return a.real() > b.real();
    });
    if (spec.d() == 1) return {0.0, 1.0};
    double b2 = std::abs(ev[1]);
    if (b2 >= 1.0 - 1e-12)
        throw SpecError("spectral_gap: chain not primitive (|beta2| = 1)");
    return {b2, 1.0 - b2};
}

SdePath simulate_chain(const MarkovSpec& spec, const std::vector<double>& t_grid,
                       std::uint64_t seed) {
    spec.validate();
    if (t_grid.empty()) throw SpecError("simulate_chain: empty time grid");
    const int n = spec.d();
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Initial state from the invariant when available, else uniform.
    VectorXd p0;
    try {
        p0 = invariant_distribution(spec);
    } catch (const SpecError&) {
        p0 = VectorXd::Constant(n, 1.0 / n);
    }

    auto draw = [&](const VectorXd& p) {
        double u = unif(rng), acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += p(i);
            if (u <= acc) return i;
        }
        return n - 1;
    };

    SdePath path;
    path.times = t_grid;
    path.values.resize(t_grid.size());
    int state = draw(p0);
    path.values[0] = spec.states(state);
    double cached_dt = -1.0;
    MatrixXd cached_P;
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        double dt = t_grid[k] - t_grid[k - 1];
        if (dt <= 0) throw SpecError("simulate_chain: times must increase");
        if (spec.kind == ChainKind::Generator) {
            if (std::abs(dt - cached_dt) > 1e-15) {
                cached_P = semigroup(spec, dt);
                cached_dt = dt;
            }
        } else {
            cached_P = spec.matrix;
        }
        const MatrixXd& P = cached_P;
        state = draw(P.row(state).transpose());
        path.values[k] = spec.states(state);
    }
    return path;
}

SdePath simulate_sde(const std::function<double(double)>& a,
                     const std::function<double(double)>& sigma, double x0,
                     double dt, int n, std::uint64_t seed) {
    if (dt <= 0) throw SpecError("simulate_sde: dt must be > 0");
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SdePath path;
    path.times.resize(n + 1);
    path.values.resize(n + 1);
    double x = x0;
    path.times[0] = 0.0;
    path.values[0] = x;
    const double sq = std::sqrt(dt);
    for (int k = 1; k <= n; ++k) {
        x += a(x) * dt + sigma(x) * sq * normal(rng);
        path.times[k] = k * dt;
        path.values[k] = x;
    }
    return path;
}

} // namespace fb
