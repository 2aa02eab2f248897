#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "prism/matrix.hpp"

namespace prism {

// Ordered collection of named parameter arrays. Iteration order is the
// registration order, which keeps optimizer updates and checkpoints
// deterministic.
struct Param {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
};

class Parameters {
public:
    Param& add(const std::string& name, int rows, int cols) {
        if (index_.count(name)) throw std::invalid_argument("Parameters: duplicate name " + name);
        index_[name] = items_.size();
        items_.push_back(Param{name, rows, cols,
                               std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)});
        return items_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Param& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("Parameters: unknown name " + name);
        return items_[it->second];
    }
    const Param& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("Parameters: unknown name " + name);
        return items_[it->second];
    }

    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }
    std::size_t count() const { return items_.size(); }

    std::size_t total_scalars() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p.value.size();
        return n;
    }

private:
    std::vector<Param> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Adam with bias correction. One state per parameter collection; the step
// counter is shared across parameters, as usual.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;  // parallel to Parameters::items()
    std::vector<std::vector<double>> v;
};

inline AdamState make_adam_state(const Parameters& params) {
    AdamState st;
    st.m.reserve(params.count());
    st.v.reserve(params.count());
    for (const auto& p : params.items()) {
        st.m.emplace_back(p.value.size(), 0.0);
        st.v.emplace_back(p.value.size(), 0.0);
    }
    return st;
}

// grads[i] must be parallel to params.items()[i].value. A non-finite gradient
// aborts before any parameter is touched, reporting the offending parameter.
inline void adam_step(Parameters& params, const std::vector<std::vector<double>>& grads,
                      AdamState& st, double lr) {
    if (grads.size() != params.count())
        throw std::invalid_argument("adam_step: gradient count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const auto& p = params.items()[i];
        if (grads[i].size() != p.value.size())
            throw std::invalid_argument("adam_step: gradient size mismatch for " + p.name);
        for (double g : grads[i])
            if (!std::isfinite(g))
                throw NumericError("adam_step: non-finite gradient for parameter " + p.name);
    }
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& val = params.items()[i].value;
        auto& m = st.m[i];
        auto& v = st.v[i];
        const auto& g = grads[i];
        for (std::size_t k = 0; k < val.size(); ++k) {
            m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g[k];
            v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            val[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

}  // namespace prism
