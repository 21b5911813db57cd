#include "mvp/adam.hpp"

#include <cmath>

namespace mvp {

void Adam::step(ParamStore& params) {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& e = params.entry(i);
        double* w = e.value.data();
        const double* g = e.grad.data();
        double* m = e.m.data();
        double* v = e.v.data();
        for (std::size_t k = 0, n = e.value.size(); k < n; ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace mvp
