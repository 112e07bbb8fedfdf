// Dense multilayer perceptron with explicit batch backpropagation and an
// Adam optimizer. Hidden layers use tanh; the output layer is linear.
// Batches are column-major: one sample per column.
#pragma once

#include <magcap/core.hpp>
#include <magcap/rng.hpp>

#include <vector>

namespace magcap {

/// Per-layer parameter gradients, summed over the batch.
struct MlpGrads {
    std::vector<Matrix> dw;
    std::vector<Vector> db;

    void setZero() {
        for (auto& m : dw) m.setZero();
        for (auto& v : db) v.setZero();
    }
};

/// Forward-pass activations kept for the backward pass. acts[0] is the
/// input batch; acts[l+1] the output of layer l.
struct MlpCache {
    std::vector<Matrix> acts;
};

class Mlp {
  public:
    Mlp() = default;

    /// Xavier-uniform initialized network with the given layer sizes
    /// (input, hidden..., output).
    Mlp(std::vector<int> sizes, RngStream& rng) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw ContractViolation("mlp needs >= 2 layers");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const int in = sizes_[l];
            const int out = sizes_[l + 1];
            const double limit = std::sqrt(6.0 / (in + out));
            Matrix w(out, in);
            for (int i = 0; i < out; ++i)
                for (int j = 0; j < in; ++j)
                    w(i, j) = rng.uniform(-limit, limit);
            w_.push_back(std::move(w));
            b_.push_back(Vector::Zero(out));
        }
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    int layer_count() const { return static_cast<int>(w_.size()); }

    Matrix& weights(int l) { return w_[static_cast<std::size_t>(l)]; }
    const Matrix& weights(int l) const { return w_[static_cast<std::size_t>(l)]; }
    Vector& biases(int l) { return b_[static_cast<std::size_t>(l)]; }
    const Vector& biases(int l) const { return b_[static_cast<std::size_t>(l)]; }

    /// Forward pass over a batch (columns = samples).
    Matrix forward(const Matrix& x) const {
        Matrix a = x;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            a = (w_[l] * a).colwise() + b_[l];
            if (l + 1 < w_.size()) a = a.array().tanh();
        }
        return a;
    }

    /// Forward pass retaining activations for backward().
    Matrix forward_cached(const Matrix& x, MlpCache& cache) const {
        cache.acts.assign(1, x);
        cache.acts.reserve(w_.size() + 1);
        for (std::size_t l = 0; l < w_.size(); ++l) {
            Matrix a = (w_[l] * cache.acts.back()).colwise() + b_[l];
            if (l + 1 < w_.size()) a = a.array().tanh();
            cache.acts.push_back(std::move(a));
        }
        return cache.acts.back();
    }

    /// Backpropagate dL/dy (same shape as the output batch). Parameter
    /// gradients are summed over the batch and written to grads; if dx is
    /// non-null it receives dL/dx.
    void backward(const MlpCache& cache, const Matrix& dy, MlpGrads& grads,
                  Matrix* dx = nullptr) const {
        ensure_shape(grads);
        Matrix delta = dy;
        for (int l = layer_count() - 1; l >= 0; --l) {
            const auto ul = static_cast<std::size_t>(l);
            if (ul + 1 < w_.size())
                delta = delta.cwiseProduct(
                    (1.0 - cache.acts[ul + 1].array().square()).matrix());
            grads.dw[ul] = delta * cache.acts[ul].transpose();
            grads.db[ul] = delta.rowwise().sum();
            if (l > 0 || dx != nullptr) {
                Matrix prev = w_[ul].transpose() * delta;
                if (l == 0) {
                    *dx = std::move(prev);
                } else {
                    delta = std::move(prev);
                }
            }
        }
    }

    int param_count() const {
        int n = 0;
        for (std::size_t l = 0; l < w_.size(); ++l)
            n += static_cast<int>(w_[l].size() + b_[l].size());
        return n;
    }

    /// Parameters flattened layer by layer, weights row-major then bias.
    Vector get_params() const {
        Vector out(param_count());
        int at = 0;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            for (int i = 0; i < w_[l].rows(); ++i)
                for (int j = 0; j < w_[l].cols(); ++j) out[at++] = w_[l](i, j);
            for (int i = 0; i < b_[l].size(); ++i) out[at++] = b_[l][i];
        }
        return out;
    }

    void set_params(const Vector& flat) {
        if (flat.size() != param_count())
            throw ContractViolation("parameter vector size mismatch");
        int at = 0;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            for (int i = 0; i < w_[l].rows(); ++i)
                for (int j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = flat[at++];
            for (int i = 0; i < b_[l].size(); ++i) b_[l][i] = flat[at++];
        }
    }

    /// Gradients flattened in the same order as get_params().
    Vector flatten_grads(const MlpGrads& grads) const {
        Vector out(param_count());
        int at = 0;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            for (int i = 0; i < grads.dw[l].rows(); ++i)
                for (int j = 0; j < grads.dw[l].cols(); ++j)
                    out[at++] = grads.dw[l](i, j);
            for (int i = 0; i < grads.db[l].size(); ++i)
                out[at++] = grads.db[l][i];
        }
        return out;
    }

    MlpGrads make_grads() const {
        MlpGrads g;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            g.dw.emplace_back(Matrix::Zero(w_[l].rows(), w_[l].cols()));
            g.db.emplace_back(Vector::Zero(b_[l].size()));
        }
        return g;
    }

  private:
    void ensure_shape(MlpGrads& grads) const {
        if (grads.dw.size() != w_.size()) grads = make_grads();
    }

    std::vector<int> sizes_;
    std::vector<Matrix> w_;
    std::vector<Vector> b_;
};

/// Adam on a flat parameter vector.
class AdamOptimizer {
  public:
    AdamOptimizer() = default;
    explicit AdamOptimizer(int dim, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(dim)),
          v_(Vector::Zero(dim)) {}

    /// One step on params given the loss gradient; modifies params in place.
    void step(Vector& params, const Vector& grad, double lr) {
        if (grad.size() != m_.size())
            throw ContractViolation("optimizer dimension mismatch");
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        params -= (lr / c1) * m_.cwiseQuotient(
                      ((v_ / c2).cwiseSqrt().array() + eps_).matrix());
    }

    std::int64_t steps_taken() const { return t_; }
    const Vector& first_moment() const { return m_; }
    const Vector& second_moment() const { return v_; }

    void restore(std::int64_t t, const Vector& m, const Vector& v) {
        t_ = t;
        m_ = m;
        v_ = v;
    }

  private:
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    Vector m_;
    Vector v_;
};

} // namespace magcap
