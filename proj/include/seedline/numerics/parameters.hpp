// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "seedline/numerics/tensor.hpp"

namespace seedline::num {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    void zero_grad() { grad = Tensor(value.shape()); }
};

/// Named, insertion-ordered parameter set. Addresses are stable for the life
/// of the store, so graphs may hold raw pointers to entries.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor init) {
        if (find(name)) throw Error(Errc::BadParams, "duplicate parameter " + name);
        auto p = std::make_unique<Parameter>();
        p->name = std::move(name);
        p->grad = Tensor(init.shape());
        p->value = std::move(init);
        params_.push_back(std::move(p));
        return *params_.back();
    }

    [[nodiscard]] Parameter* find(const std::string& name) {
        for (auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    [[nodiscard]] const Parameter* find(const std::string& name) const {
        for (const auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }

    Parameter& at(const std::string& name) {
        if (auto* p = find(name)) return *p;
        throw Error(Errc::CheckpointMismatch, "no parameter named " + name);
    }
    const Parameter& at(const std::string& name) const {
        if (const auto* p = find(name)) return *p;
        throw Error(Errc::CheckpointMismatch, "no parameter named " + name);
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.cbegin(); }
    auto end() const { return params_.cend(); }

    ParameterStore() = default;
    ParameterStore(const ParameterStore& other) {
        for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
    }
    ParameterStore& operator=(const ParameterStore& other) {
        if (this != &other) {
            ParameterStore copy(other);
            params_ = std::move(copy.params_);
        }
        return *this;
    }
    ParameterStore(ParameterStore&&) noexcept = default;
    ParameterStore& operator=(ParameterStore&&) noexcept = default;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

/// Uniform(-scale, scale) initialisation.
template <class Rng>
Tensor uniform_init(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

/// Glorot-style uniform bound for a rows x cols weight.
template <class Rng>
Tensor glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    return uniform_init(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

} // namespace seedline::num
