#pragma once

#include <cmath>

#include "egocl/nn/model.hpp"

namespace egocl::nn {

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 1e-3;
    int epochs = 100;
    int batch_size = 64;
    uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("train: learning_rate must be positive");
        if (weight_decay < 0) throw ConfigError("train: weight_decay must be non-negative");
        if (epochs <= 0) throw ConfigError("train: epochs must be positive");
        if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
    }
};

/// Adam with decoupled weight decay. Deterministic given the gradient
/// sequence; aborts on non-finite gradients.
template <class S>
class AdamW {
public:
    explicit AdamW(const ParamSet<S>& shape)
        : m_(shape.zeros_like()), v_(shape.zeros_like()) {}

    void step(ParamSet<S>& params, const ParamSet<S>& grads, const TrainConfig& cfg) {
        if (!grads.all_finite())
            throw NumericError("non-finite gradient at optimizer step " + std::to_string(t_ + 1));
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        const S lr = static_cast<S>(cfg.learning_rate);
        const S decay = static_cast<S>(cfg.learning_rate * cfg.weight_decay);
        const S b1 = static_cast<S>(kBeta1), b2 = static_cast<S>(kBeta2);
        const S inv_bc1 = static_cast<S>(1.0 / bc1);
        const S inv_bc2 = static_cast<S>(1.0 / bc2);
        const S eps = static_cast<S>(kEps);
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            auto& p = params.tensors[i].value;
            const auto& g = grads.tensors[i].value;
            auto& m = m_.tensors[i].value;
            auto& v = v_.tensors[i].value;
            m = b1 * m + (S(1) - b1) * g;
            v.array() = b2 * v.array() + (S(1) - b2) * g.array().square();
            p.array() -= lr * (m.array() * inv_bc1) /
                         ((v.array() * inv_bc2).sqrt() + eps);
            p.array() -= decay * p.array();
            if (!p.allFinite())
                throw NumericError("non-finite parameters after optimizer step " +
                                   std::to_string(t_));
        }
    }

    int64_t steps() const { return t_; }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    ParamSet<S> m_, v_;
    int64_t t_ = 0;
};

}  // namespace egocl::nn
