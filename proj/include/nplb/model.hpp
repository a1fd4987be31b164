#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nplb/error.hpp"
#include "nplb/matrix.hpp"
#include "nplb/random.hpp"

namespace nplb {

struct LayerSpec {
    size_t in_dim = 0;
    size_t out_dim = 0;
    bool has_prelu = true;
    double dropout_rate = 0.0;  // in [0, 1)
};

// MLP parameters: per-layer weight (out x in), bias (out), and a channel-shared
// PReLU slope for each activation layer.
struct ModelParams {
    std::vector<LayerSpec> layers;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> prelu_slopes;  // one slot per layer; used when has_prelu

    size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

    size_t parameter_count() const {
        size_t n = 0;
        for (size_t l = 0; l < layers.size(); ++l) {
            n += weights[l].size() + biases[l].size();
            if (layers[l].has_prelu) n += 1;
        }
        return n;
    }
};

// Per-layer activations and dropout masks captured during forward; everything
// backward needs to replay the chain rule exactly.
struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> prelu_inputs;  // layer value after linear + dropout
    std::vector<Matrix> masks;         // inverted-dropout masks; empty when layer has none
    std::vector<Matrix> outputs;       // post-activation layer outputs
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> prelu_slopes;

    static Gradients zeros_like(const ModelParams& params) {
        Gradients g;
        for (size_t l = 0; l < params.layers.size(); ++l) {
            g.weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
            g.biases.emplace_back(params.biases[l].size(), 0.0);
            g.prelu_slopes.push_back(0.0);
        }
        return g;
    }
};

inline ModelParams build_model_from_layers(const std::vector<LayerSpec>& layers, RandomSource& rng) {
    ModelParams params;
    params.layers = layers;
    for (const auto& layer : layers) {
        if (layer.in_dim < 1 || layer.out_dim < 1) throw ConfigError("layer dims must be >= 1");
        if (!(layer.dropout_rate >= 0.0 && layer.dropout_rate < 1.0)) {
            throw ConfigError("dropout rate must be in [0, 1)");
        }
        // Uniform +-1/sqrt(fan_in), biases zero, PReLU slope 0.25.
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        Matrix w(layer.out_dim, layer.in_dim);
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(layer.out_dim, 0.0);
        params.prelu_slopes.push_back(0.25);
    }
    return params;
}

// The reference chain: input -> 512 -> 256 -> output, PReLU after every
// linear layer, inverted dropout (rate 0.1) after the first two.
inline ModelParams build_model(size_t input_dim, size_t output_dim, RandomSource& rng,
                               size_t hidden1 = 512, size_t hidden2 = 256, double dropout_rate = 0.1) {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("model dims must be >= 1");
    return build_model_from_layers({{input_dim, hidden1, true, dropout_rate},
                                    {hidden1, hidden2, true, dropout_rate},
                                    {hidden2, output_dim, true, 0.0}},
                                   rng);
}

// Forward pass. Per layer: linear, then inverted dropout (training only),
// then PReLU(z) = z if z >= 0 else a*z. Inference draws nothing from rng.
inline std::pair<Matrix, ForwardTrace> forward(const ModelParams& params, const Matrix& batch, bool training,
                                               RandomSource& rng) {
    if (batch.cols() != params.input_dim()) {
        throw DimensionError("forward: batch cols " + std::to_string(batch.cols()) + " != input dim " +
                             std::to_string(params.input_dim()));
    }
    ForwardTrace trace;
    trace.input = batch;
    Matrix current = batch;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const LayerSpec& spec = params.layers[l];
        const Matrix& w = params.weights[l];
        const std::vector<double>& b = params.biases[l];

        Matrix z(current.rows(), spec.out_dim);
        for (size_t r = 0; r < current.rows(); ++r) {
            for (size_t o = 0; o < spec.out_dim; ++o) {
                double acc = b[o];
                for (size_t i = 0; i < spec.in_dim; ++i) acc += w(o, i) * current(r, i);
                z(r, o) = acc;
            }
        }

        if (training && spec.dropout_rate > 0.0) {
            const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
            Matrix mask(z.rows(), z.cols());
            for (size_t i = 0; i < mask.size(); ++i) {
                mask.data()[i] = rng.uniform() < spec.dropout_rate ? 0.0 : keep_scale;
            }
            for (size_t i = 0; i < z.size(); ++i) z.data()[i] *= mask.data()[i];
            trace.masks.push_back(std::move(mask));
        } else {
            trace.masks.emplace_back();
        }

        trace.prelu_inputs.push_back(z);
        if (spec.has_prelu) {
            const double a = params.prelu_slopes[l];
            for (double& v : z.data()) {
                if (v < 0.0) v *= a;
            }
        }
        trace.outputs.push_back(z);
        current = std::move(z);
    }
    return {current, std::move(trace)};
}

inline Matrix infer(const ModelParams& params, const Matrix& batch) {
    RandomSource unused(0);
    return forward(params, batch, false, unused).first;
}

inline std::vector<double> infer_one(const ModelParams& params, std::span<const double> features) {
    Matrix batch(1, features.size());
    batch.set_row(0, features);
    Matrix out = infer(params, batch);
    return {out.data().begin(), out.data().end()};
}

// Exact gradients for every weight, bias, and PReLU slope; dropout masks are
// reused from the trace so the backward pass matches the recorded forward.
inline Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                          const Matrix& grad_wrt_embeddings) {
    const size_t n_layers = params.layers.size();
    if (trace.prelu_inputs.size() != n_layers || trace.masks.size() != n_layers ||
        trace.outputs.size() != n_layers) {
        throw TraceError("trace layer count does not match model");
    }
    if (grad_wrt_embeddings.rows() != trace.input.rows() ||
        grad_wrt_embeddings.cols() != params.output_dim()) {
        throw TraceError("upstream gradient shape does not match trace batch / output dim");
    }
    if (trace.input.cols() != params.input_dim()) throw TraceError("trace input dim does not match model");

    Gradients grads = Gradients::zeros_like(params);
    Matrix delta = grad_wrt_embeddings;  // dL/d(layer output)

    for (size_t l = n_layers; l-- > 0;) {
        const LayerSpec& spec = params.layers[l];
        const Matrix& u = trace.prelu_inputs[l];
        if (u.rows() != delta.rows() || u.cols() != delta.cols() || u.cols() != spec.out_dim) {
            throw TraceError("trace shape mismatch at layer " + std::to_string(l));
        }

        // Through PReLU: dL/du and the slope gradient sum_{u<0} u * upstream.
        Matrix d_pre = delta;
        if (spec.has_prelu) {
            const double a = params.prelu_slopes[l];
            double slope_grad = 0.0;
            for (size_t i = 0; i < u.size(); ++i) {
                if (u.data()[i] < 0.0) {
                    slope_grad += u.data()[i] * d_pre.data()[i];
                    d_pre.data()[i] *= a;
                }
            }
            grads.prelu_slopes[l] = slope_grad;
        }

        // Through dropout: multiply by the recorded mask.
        if (trace.masks[l].size() > 0) {
            if (trace.masks[l].rows() != d_pre.rows() || trace.masks[l].cols() != d_pre.cols()) {
                throw TraceError("dropout mask shape mismatch");
            }
            for (size_t i = 0; i < d_pre.size(); ++i) d_pre.data()[i] *= trace.masks[l].data()[i];
        }

        // Through the linear layer.
        const Matrix& x = l == 0 ? trace.input : trace.outputs[l - 1];
        if (x.cols() != spec.in_dim || x.rows() != delta.rows()) {
            throw TraceError("trace layer input shape mismatch at layer " + std::to_string(l));
        }
        Matrix& dw = grads.weights[l];
        std::vector<double>& db = grads.biases[l];
        for (size_t r = 0; r < x.rows(); ++r) {
            for (size_t o = 0; o < spec.out_dim; ++o) {
                const double g = d_pre(r, o);
                if (g == 0.0) continue;
                db[o] += g;
                for (size_t i = 0; i < spec.in_dim; ++i) dw(o, i) += g * x(r, i);
            }
        }
        if (l > 0) {
            const Matrix& w = params.weights[l];
            Matrix d_input(x.rows(), spec.in_dim);
            for (size_t r = 0; r < x.rows(); ++r) {
                for (size_t o = 0; o < spec.out_dim; ++o) {
                    const double g = d_pre(r, o);
                    if (g == 0.0) continue;
                    for (size_t i = 0; i < spec.in_dim; ++i) d_input(r, i) += g * w(o, i);
                }
            }
            delta = std::move(d_input);
        }
    }
    return grads;
}

// --- checkpoint io ----------------------------------------------------------
// Versioned structured text; values in hexfloat so round-trips are bit-exact.

namespace detail {

inline std::string format_hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline void write_values(std::ostream& os, const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) os << (i ? " " : "") << format_hex(values[i]);
    os << "\n";
}

}  // namespace detail

inline void save_model(const ModelParams& params, std::ostream& os) {
    os << "nplb-model v1\n";
    os << "layers " << params.layers.size() << "\n";
    for (const auto& layer : params.layers) {
        os << "layer " << layer.in_dim << " " << layer.out_dim << " " << (layer.has_prelu ? 1 : 0) << " "
           << detail::format_hex(layer.dropout_rate) << "\n";
    }
    for (size_t l = 0; l < params.layers.size(); ++l) {
        os << "tensor weight" << l << " " << params.weights[l].rows() << " " << params.weights[l].cols() << "\n";
        detail::write_values(os, params.weights[l].data());
        os << "tensor bias" << l << " " << params.biases[l].size() << " 1\n";
        detail::write_values(os, params.biases[l]);
        os << "tensor prelu" << l << " 1 1\n";
        detail::write_values(os, {params.prelu_slopes[l]});
    }
}

inline void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    save_model(params, os);
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

inline ModelParams load_model(std::istream& is) {
    std::string header;
    std::getline(is, header);
    if (header != "nplb-model v1") throw IoError("unrecognized checkpoint header: '" + header + "'");
    std::string tag;
    size_t n_layers = 0;
    if (!(is >> tag >> n_layers) || tag != "layers") throw IoError("checkpoint: missing layer count");

    ModelParams params;
    for (size_t l = 0; l < n_layers; ++l) {
        LayerSpec spec;
        int has_prelu = 0;
        std::string rate;
        if (!(is >> tag >> spec.in_dim >> spec.out_dim >> has_prelu >> rate) || tag != "layer") {
            throw IoError("checkpoint: malformed layer line");
        }
        spec.has_prelu = has_prelu != 0;
        spec.dropout_rate = std::strtod(rate.c_str(), nullptr);
        params.layers.push_back(spec);
    }
    auto read_tensor = [&](const std::string& expected, size_t rows, size_t cols) {
        std::string name;
        size_t r = 0, c = 0;
        if (!(is >> tag >> name >> r >> c) || tag != "tensor" || name != expected || r != rows || c != cols) {
            throw IoError("checkpoint: expected tensor " + expected);
        }
        std::vector<double> values(rows * cols);
        std::string token;
        for (double& v : values) {
            if (!(is >> token)) throw IoError("checkpoint: truncated tensor " + expected);
            v = std::strtod(token.c_str(), nullptr);
        }
        return values;
    };
    for (size_t l = 0; l < n_layers; ++l) {
        const LayerSpec& spec = params.layers[l];
        params.weights.emplace_back(spec.out_dim, spec.in_dim,
                                    read_tensor("weight" + std::to_string(l), spec.out_dim, spec.in_dim));
        params.biases.push_back(read_tensor("bias" + std::to_string(l), spec.out_dim, 1));
        params.prelu_slopes.push_back(read_tensor("prelu" + std::to_string(l), 1, 1)[0]);
    }
    return params;
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    return load_model(is);
}

}  // namespace nplb
