#pragma once

#include <cmath>
#include <vector>

#include "dispatch/errors.hpp"
#include "dispatch/scenario.hpp"

namespace dispatch {

/// Co-state pair recovered from two observed class trajectories through the
/// 2x2 system [alpha_a, -1; alpha_b, -1] [lambda; lambdadot] = [c_a'; c_b'].
struct Reconstruction {
    std::vector<double> lambda;   // per node
    std::vector<double> dlambda;  // per node
    int class_a = -1, class_b = -1;
    double condition_number = 0.0;  // of the 2x2 system (infinity norm)
};

inline Reconstruction reconstruct(const std::vector<double>& x_a, const std::vector<double>& x_b,
                                  const LoadClass& class_a, const LoadClass& class_b,
                                  int index_a = -1, int index_b = -1) {
    if (x_a.size() != x_b.size() || x_a.empty())
        throw ValidationError("reconstruct: trajectories must share one length");
    const double aa = class_a.alpha;
    const double ab = class_b.alpha;
    const double det = ab - aa;
    if (std::abs(aa - ab) <= 1e-12)
        throw SingularPair("reconstruct: classes have equal leakage rates (singular 2x2 system)");

    Reconstruction out;
    out.class_a = index_a;
    out.class_b = index_b;
    // ||A||_inf * ||A^-1||_inf with A = [[aa, -1], [ab, -1]]
    const double norm_a = std::max(std::abs(aa) + 1.0, std::abs(ab) + 1.0);
    const double norm_inv = std::max(2.0, std::abs(aa) + std::abs(ab)) / std::abs(det);
    out.condition_number = norm_a * norm_inv;

    const std::size_t n = x_a.size();
    out.lambda.resize(n);
    out.dlambda.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double ma = class_a.cost.d1(x_a[k]);
        const double mb = class_b.cost.d1(x_b[k]);
        // alpha_a L - Ldot = ma; alpha_b L - Ldot = mb
        out.lambda[k] = (ma - mb) / (aa - ab);
        out.dlambda[k] = aa * out.lambda[k] - ma;
    }
    return out;
}

/// Recover a class SoC trajectory from the reconstructed co-state pair:
/// x_i = (c_i')^{-1}(alpha_i lambda - lambdadot).
inline std::vector<double> recover_class(const Reconstruction& rec, const LoadClass& cls) {
    std::vector<double> out(rec.lambda.size());
    for (std::size_t k = 0; k < rec.lambda.size(); ++k)
        out[k] = cls.cost.inv_d1(cls.alpha * rec.lambda[k] - rec.dlambda[k]);
    return out;
}

}  // namespace dispatch
