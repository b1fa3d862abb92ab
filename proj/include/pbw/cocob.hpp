#pragma once

// COCOB-Backprop: the parameter-free per-coordinate coin-betting optimizer
// used by every training loop. Per coordinate, with g~ = -grad:
//
//   scale   = max(scale, |g~|)
//   abs_sum = abs_sum + |g~|
//   reward  = max(reward + (w - w_initial) * g~, 0)
//   bet_sum = bet_sum + g~
//   w       = w_initial + bet_sum / (scale * max(abs_sum + scale,
//             alpha * scale)) * (scale + reward)
//
// The operation order above is frozen; trajectories are compared bitwise in
// tests, and the build disables FP contraction so the arithmetic is stable.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "model.hpp"

namespace pbw {

struct CocobState {
    ParamVector initial;   // the anchor w_1 the betting is expressed against
    ParamVector w;         // current point
    ParamVector scale;     // running max |g~| per coordinate
    ParamVector abs_sum;   // running sum |g~|
    ParamVector reward;    // clipped wealth
    ParamVector bet_sum;   // running sum g~
    double alpha = 10000.0;

    std::size_t dim() const { return w.size(); }
};

constexpr double kCocobScaleFloor = 1e-8;  // avoids 0/0 before the first nonzero gradient

inline CocobState cocob_init(const ParamVector& w0, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("cocob: alpha must be positive");
    for (double v : w0)
        if (!std::isfinite(v)) throw std::invalid_argument("cocob: non-finite initial point");
    CocobState s;
    s.initial = w0;
    s.w = w0;
    s.scale.assign(w0.size(), kCocobScaleFloor);
    s.abs_sum.assign(w0.size(), 0.0);
    s.reward.assign(w0.size(), 0.0);
    s.bet_sum.assign(w0.size(), 0.0);
    s.alpha = alpha;
    return s;
}

/// One optimizer step with the loss gradient `grad`. Coordinates with zero
/// gradient and no history keep w = initial.
inline void cocob_step(CocobState& s, const ParamVector& grad) {
    if (grad.size() != s.dim()) throw std::invalid_argument("cocob: gradient dimension mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) throw std::invalid_argument("cocob: non-finite gradient");
        const double gn = -grad[i];
        const double a = std::fabs(gn);
        if (a > s.scale[i]) s.scale[i] = a;
        s.abs_sum[i] += a;
        const double r = s.reward[i] + (s.w[i] - s.initial[i]) * gn;
        s.reward[i] = r > 0.0 ? r : 0.0;
        s.bet_sum[i] += gn;
        const double den = s.abs_sum[i] + s.scale[i];
        const double damp = s.alpha * s.scale[i];
        const double fraction = s.bet_sum[i] / (s.scale[i] * (den > damp ? den : damp));
        s.w[i] = s.initial[i] + fraction * (s.scale[i] + s.reward[i]);
    }
}

}  // namespace pbw
