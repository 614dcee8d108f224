#pragma once

#include "ambc/sysmodel.hpp"
#include "ambc/types.hpp"

namespace ambc {

/// Precomputed quantities of the perfect-CSI likelihood-ratio test.
struct LrtContext {
    CMatrix inv0;
    CMatrix inv1;
    CMatrix inv_diff;          ///< inv0 - inv1
    double log_det_ratio = 0;  ///< ln det(sigma_0) - ln det(sigma_1)
};

/// Cholesky-based inverses and log-determinants. Throws NumericalError if
/// either covariance is not positive definite.
LrtContext lrt_context(const ChannelRealization& chan);

/// Log-likelihood ratio ln p(X|H1) - ln p(X|H0) summed over the columns of x.
double lrt_statistic(const CMatrix& x, const LrtContext& ctx);

/// 1 iff l > 0.
inline int lrt_decide(double l) { return l > 0.0 ? 1 : 0; }

/// Perfect-CSI energy detector on the mean received energy (1/N) sum ||x_n||^2.
struct EdContext {
    double threshold = 0;
    double mu0 = 0, mu1 = 0;
    double var0 = 0, var1 = 0;
    /// True when H1 has the larger mean energy; the decision flips otherwise.
    bool h1_above = true;
};

EdContext ed_context(const ChannelRealization& chan, int n);

double ed_statistic(const CMatrix& x);
int ed_decide(const CMatrix& x, const EdContext& ctx);

}  // namespace ambc
