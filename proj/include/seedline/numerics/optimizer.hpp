// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "seedline/numerics/parameters.hpp"

namespace seedline::num {

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping. `max_norm <= 0` disables clipping.
inline double clip_grad_norm(ParameterStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) sq += l2_norm_sq(p->grad);
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& p : params)
            for (double& g : p->grad.data()) g *= s;
    }
    return norm;
}

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double lr = 0.5;
    double momentum = 0.9;
    double clip_norm = 5.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw Error(Errc::BadParams, "unknown optimizer " + s);
}

/// SGD with optional heavy-ball momentum, or Adam. Gradient clipping is
/// applied before either update.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(ParameterStore& params) {
        clip_grad_norm(params, cfg_.clip_norm);
        ++t_;
        for (auto& p : params) {
            auto& st = state_[p->name];
            if (st.m.size() != p->value.size()) {
                st.m = Tensor(p->value.shape());
                st.v = Tensor(p->value.shape());
            }
            if (cfg_.kind == OptimizerKind::Sgd) {
                for (std::size_t i = 0; i < p->value.size(); ++i) {
                    st.m[i] = cfg_.momentum * st.m[i] + p->grad[i];
                    p->value[i] -= cfg_.lr * st.m[i];
                }
            } else {
                const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
                const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
                for (std::size_t i = 0; i < p->value.size(); ++i) {
                    const double g = p->grad[i];
                    st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
                    st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
                    p->value[i] -= cfg_.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg_.adam_eps);
                }
            }
        }
    }

    [[nodiscard]] const OptimizerConfig& config() const noexcept { return cfg_; }

private:
    struct State {
        Tensor m;
        Tensor v;
    };
    OptimizerConfig cfg_;
    std::unordered_map<std::string, State> state_;
    long t_ = 0;
};

} // namespace seedline::num
