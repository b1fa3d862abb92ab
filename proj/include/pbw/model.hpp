#pragma once

// Predictor architectures: a linear score model and a fully connected
// leaky-ReLU network, both over a flat parameter vector. The flat layout is
// frozen because optimizer state and parameter distances index into it:
// for every layer from input to output, the weight matrix row-major
// (out_dim x in_dim), then the bias. Linear = [W | b]; Mlp = [W1 | b1 | W2 |
// b2 | ... | W_out | b_out].

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace pbw {

enum class ModelKind : std::uint32_t { Linear = 0, Mlp = 1 };

struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    std::size_t input_dim = 0;
    std::size_t num_classes = 2;
    std::size_t hidden_width = 0;  // Mlp only
    std::size_t hidden_depth = 0;  // Mlp only, number of hidden layers
    double leak = 0.01;

    std::size_t param_count() const {
        if (kind == ModelKind::Linear) return num_classes * input_dim + num_classes;
        const std::size_t d = input_dim, D = hidden_width, L = hidden_depth, c = num_classes;
        return D * d + D + (L - 1) * (D * D + D) + c * D + c;
    }

    void validate() const {
        if (input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
        if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
        if (kind == ModelKind::Mlp && (hidden_width == 0 || hidden_depth == 0))
            throw std::invalid_argument("model: mlp needs positive width and depth");
    }

    bool operator==(const ModelSpec&) const = default;
};

inline ModelSpec linear_spec(std::size_t input_dim, std::size_t num_classes) {
    return ModelSpec{ModelKind::Linear, input_dim, num_classes, 0, 0, 0.01};
}

inline ModelSpec mlp_spec(std::size_t input_dim, std::size_t num_classes, std::size_t width,
                          std::size_t depth) {
    return ModelSpec{ModelKind::Mlp, input_dim, num_classes, width, depth, 0.01};
}

using ParamVector = std::vector<double>;

struct Hypothesis {
    ModelSpec spec;
    ParamVector params;

    void validate() const {
        spec.validate();
        if (params.size() != spec.param_count())
            throw std::invalid_argument("hypothesis: parameter count does not match spec");
        for (double v : params)
            if (!std::isfinite(v)) throw std::invalid_argument("hypothesis: non-finite parameter");
    }
};

namespace detail {

// Walks the layers of the flat layout, invoking fn(in_dim, out_dim, w_off, b_off).
template <class Fn>
inline void for_each_layer(const ModelSpec& spec, Fn&& fn) {
    if (spec.kind == ModelKind::Linear) {
        fn(spec.input_dim, spec.num_classes, std::size_t{0}, spec.num_classes * spec.input_dim);
        return;
    }
    const std::size_t D = spec.hidden_width;
    std::size_t off = 0;
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < spec.hidden_depth; ++l) {
        fn(in, D, off, off + D * in);
        off += D * in + D;
        in = D;
    }
    fn(in, spec.num_classes, off, off + spec.num_classes * in);
}

}  // namespace detail

/// Gaussian(0, 0.04^2) weights clamped to [-0.08, 0.08]; hidden biases 0.1,
/// output bias 0. Deterministic for a fixed (spec, seed): weights consume
/// normals in flat-layout order.
inline ParamVector init_weights(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    constexpr double kSigma = 0.04;
    Rng rng(derive_seed(seed, "init-weights"));
    ParamVector w(spec.param_count(), 0.0);
    const std::size_t layers = spec.kind == ModelKind::Linear ? 1 : spec.hidden_depth + 1;
    std::size_t layer_index = 0;
    detail::for_each_layer(spec, [&](std::size_t in, std::size_t out, std::size_t w_off,
                                     std::size_t b_off) {
        for (std::size_t i = 0; i < out * in; ++i) {
            double g = kSigma * rng.next_gaussian();
            if (g > 2.0 * kSigma) g = 2.0 * kSigma;
            if (g < -2.0 * kSigma) g = -2.0 * kSigma;
            w[w_off + i] = g;
        }
        const bool output_layer = ++layer_index == layers;
        const double bias = output_layer ? 0.0 : 0.1;
        for (std::size_t i = 0; i < out; ++i) w[b_off + i] = bias;
    });
    return w;
}

inline double leaky_relu(double x, double leak) { return x > 0.0 ? x : leak * x; }

/// Slope of the activation; the kink at 0 takes the leak branch.
inline double leaky_relu_slope(double x, double leak) { return x > 0.0 ? 1.0 : leak; }

/// Score vector h_w(x). Hidden layers apply elementwise max(x, leak*x).
inline std::vector<double> forward(const Hypothesis& h, std::span<const double> x) {
    if (x.size() != h.spec.input_dim) throw std::invalid_argument("forward: input dimension mismatch");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    const std::size_t layers = h.spec.kind == ModelKind::Linear ? 1 : h.spec.hidden_depth + 1;
    std::size_t layer_index = 0;
    detail::for_each_layer(h.spec, [&](std::size_t in, std::size_t out, std::size_t w_off,
                                       std::size_t b_off) {
        next.assign(out, 0.0);
        for (std::size_t r = 0; r < out; ++r) {
            double acc = h.params[b_off + r];
            const double* row = h.params.data() + w_off + r * in;
            for (std::size_t c = 0; c < in; ++c) acc += row[c] * cur[c];
            next[r] = acc;
        }
        const bool output_layer = ++layer_index == layers;
        if (!output_layer)
            for (double& v : next) v = leaky_relu(v, h.spec.leak);
        cur.swap(next);
    });
    return cur;
}

/// Euclidean distance between parameter vectors; equals the Wasserstein-1
/// distance between the two Dirac predictors.
inline double param_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("param_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double param_distance(const Hypothesis& a, const Hypothesis& b) {
    return param_distance(std::span<const double>(a.params), std::span<const double>(b.params));
}

// --------------------------------------------------------------------------
// Hypothesis file format: five little-endian u32 header fields
// (kind, input_dim, num_classes, hidden_width, hidden_depth) followed by the
// parameters as little-endian float64 in flat-layout order.
// --------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("hypothesis file: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("hypothesis file: truncated payload");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace detail

inline void save_hypothesis(const Hypothesis& h, const std::string& path) {
    h.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    detail::put_u32(os, static_cast<std::uint32_t>(h.spec.kind));
    detail::put_u32(os, static_cast<std::uint32_t>(h.spec.input_dim));
    detail::put_u32(os, static_cast<std::uint32_t>(h.spec.num_classes));
    detail::put_u32(os, static_cast<std::uint32_t>(h.spec.hidden_width));
    detail::put_u32(os, static_cast<std::uint32_t>(h.spec.hidden_depth));
    for (double v : h.params) detail::put_f64(os, v);
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline Hypothesis load_hypothesis(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    Hypothesis h;
    const std::uint32_t kind = detail::get_u32(is);
    if (kind > 1) throw std::runtime_error("hypothesis file: unknown kind tag");
    h.spec.kind = static_cast<ModelKind>(kind);
    h.spec.input_dim = detail::get_u32(is);
    h.spec.num_classes = detail::get_u32(is);
    h.spec.hidden_width = detail::get_u32(is);
    h.spec.hidden_depth = detail::get_u32(is);
    h.spec.validate();
    h.params.resize(h.spec.param_count());
    for (double& v : h.params) v = detail::get_f64(is);
    h.validate();
    return h;
}

}  // namespace pbw
