#include "ambc/classical.hpp"

#include <algorithm>
#include <cmath>

#include "ambc/errors.hpp"

namespace ambc {
namespace {

struct Factored {
    CMatrix inverse;
    double log_det;
};

Factored factor_spd(const CMatrix& sigma, const char* which) {
    Eigen::LLT<CMatrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string("lrt_context: ") + which + " is not positive definite (corrupted channel?)");
    const auto& l = llt.matrixLLT();
    double log_det = 0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double d = l(i, i).real();
        if (!(d > 0)) throw NumericalError(std::string("lrt_context: ") + which + " has a non-positive pivot");
        log_det += 2.0 * std::log(d);
    }
    CMatrix inv = llt.solve(CMatrix::Identity(sigma.rows(), sigma.cols()));
    inv = 0.5 * (inv + inv.adjoint()).eval();
    return {std::move(inv), log_det};
}

}  // namespace

LrtContext lrt_context(const ChannelRealization& chan) {
    auto f0 = factor_spd(chan.sigma_0, "sigma_0");
    auto f1 = factor_spd(chan.sigma_1, "sigma_1");
    LrtContext ctx;
    ctx.log_det_ratio = f0.log_det - f1.log_det;
    if (!std::isfinite(ctx.log_det_ratio)) throw NumericalError("lrt_context: non-finite log-determinant");
    ctx.inv_diff = f0.inverse - f1.inverse;
    ctx.inv0 = std::move(f0.inverse);
    ctx.inv1 = std::move(f1.inverse);
    return ctx;
}

double lrt_statistic(const CMatrix& x, const LrtContext& ctx) {
    // x_n^H (inv0 - inv1) x_n summed over columns = sum of Re(conj(x) .* (D x)).
    const CMatrix dx = ctx.inv_diff * x;
    const double quad = (x.conjugate().array() * dx.array()).real().sum();
    return static_cast<double>(x.cols()) * ctx.log_det_ratio + quad;
}

EdContext ed_context(const ChannelRealization& chan, int n) {
    if (n < 1) throw ConfigError("ed_context: n must be >= 1");
    EdContext ctx;
    auto moments = [n](const CMatrix& sigma, double& mu, double& var) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(sigma, Eigen::EigenvaluesOnly);
        mu = es.eigenvalues().sum();
        var = es.eigenvalues().squaredNorm() / n;
    };
    moments(chan.sigma_0, ctx.mu0, ctx.var0);
    moments(chan.sigma_1, ctx.mu1, ctx.var1);
    ctx.h1_above = ctx.mu1 >= ctx.mu0;

    const double lo = std::min(ctx.mu0, ctx.mu1);
    const double hi = std::max(ctx.mu0, ctx.mu1);
    ctx.threshold = 0.5 * (lo + hi);
    if (hi == lo) {
        ctx.threshold = ctx.mu0;
        return ctx;
    }
    // Equal-density point of N(mu0, var0) and N(mu1, var1):
    // a t^2 + b t + c = 0 with the coefficients below.
    const double a = 1.0 / ctx.var1 - 1.0 / ctx.var0;
    const double b = 2.0 * (ctx.mu0 / ctx.var0 - ctx.mu1 / ctx.var1);
    const double c = ctx.mu1 * ctx.mu1 / ctx.var1 - ctx.mu0 * ctx.mu0 / ctx.var0 + std::log(ctx.var1 / ctx.var0);
    auto inside = [&](double t) { return std::isfinite(t) && t >= lo && t <= hi; };
    if (std::abs(a) < 1e-14 * (1.0 / ctx.var0 + 1.0 / ctx.var1)) {
        const double t = -c / b;
        if (inside(t)) ctx.threshold = t;
        return ctx;
    }
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
        const double sq = std::sqrt(disc);
        // Numerically stable root pair.
        const double q = -0.5 * (b + std::copysign(sq, b));
        const double r1 = q / a;
        const double r2 = c / q;
        if (inside(r1))
            ctx.threshold = r1;
        else if (inside(r2))
            ctx.threshold = r2;
    }
    return ctx;
}

double ed_statistic(const CMatrix& x) { return x.squaredNorm() / static_cast<double>(x.cols()); }

int ed_decide(const CMatrix& x, const EdContext& ctx) {
    const double t = ed_statistic(x);
    return ctx.h1_above ? (t > ctx.threshold ? 1 : 0) : (t < ctx.threshold ? 1 : 0);
}

}  // namespace ambc
