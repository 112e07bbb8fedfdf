// Soft Actor-Critic built on the batch MLP: squashed-Gaussian actor, twin
// critics with Polyak-averaged targets, adjustable entropy coefficient,
// uniform replay, a single-threaded training loop, and a versioned binary
// checkpoint format.
#pragma once

#include <magcap/env.hpp>
#include <magcap/mlp.hpp>
#include <magcap/rng.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace magcap {

/// Training hyperparameters. lr_sim drives pretraining, lr_real fine-tuning;
/// everything else is shared between the two stages.
struct SacConfig {
    double gamma = 0.92;
    double lr_sim = 1e-4;
    double lr_real = 5e-5;
    int batch = 360;
    int buffer_capacity = 185000;
    int warmup = 2000;          ///< uniform-random action steps at the start
    int finetune_warmup = 500;  ///< shortened warmup for the real stage
    bool retain_buffer = false; ///< keep simulator transitions at fine-tune
    double rho = 0.005;         ///< Polyak blend toward the online weights
    double target_entropy = -4.0;
    int updates_per_step = 1;
    std::vector<int> hidden = {128, 128};
    double init_alpha = 0.2;
    int eval_interval = 2000;   ///< env steps between evaluation rollouts
    int eval_episodes = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ConfigError("gamma must lie in (0,1)", "sac.gamma");
        if (!(rho > 0.0 && rho < 1.0))
            throw ConfigError("rho must lie in (0,1)", "sac.rho");
        if (lr_sim <= 0.0 || lr_real <= 0.0)
            throw ConfigError("learning rates must be positive", "sac.lr");
        if (batch < 1 || batch > buffer_capacity)
            throw ConfigError("need 1 <= batch <= buffer_capacity",
                              "sac.batch");
        if (warmup < 0 || finetune_warmup < 0)
            throw ConfigError("warmup must be non-negative", "sac.warmup");
        if (updates_per_step < 0)
            throw ConfigError("updates_per_step must be non-negative",
                              "sac.updates_per_step");
        if (hidden.empty())
            throw ConfigError("need at least one hidden layer", "sac.hidden");
        for (int h : hidden)
            if (h < 1)
                throw ConfigError("hidden widths must be positive",
                                  "sac.hidden");
        if (init_alpha <= 0.0)
            throw ConfigError("init_alpha must be positive", "sac.init_alpha");
        if (eval_interval < 1 || eval_episodes < 1)
            throw ConfigError("evaluation cadence must be positive",
                              "sac.eval");
    }
};

/// Hash of everything a checkpoint must agree on to be loadable: problem
/// dimensions, architecture, and the objective-defining constants.
inline std::uint64_t sac_fingerprint(const SacConfig& cfg, int obs_dim,
                                     int act_dim) {
    std::ostringstream s;
    s.precision(17);
    s << "sac|obs=" << obs_dim << "|act=" << act_dim << "|hidden=";
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
        s << (i ? "," : "") << cfg.hidden[i];
    s << "|gamma=" << cfg.gamma << "|rho=" << cfg.rho
      << "|target_entropy=" << cfg.target_entropy;
    return fnv1a64(s.str());
}

namespace detail {
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
} // namespace detail

/// tanh-squashed diagonal Gaussian policy. The network emits, per action
/// dimension, a mean and a raw value that a bounded map turns into log-std;
/// sampled pre-squash values pass through tanh, and log-probabilities carry
/// the change-of-variables correction.
class GaussianActor {
  public:
    static constexpr double kLogStdMin = -6.0;
    static constexpr double kLogStdMax = 2.0;
    /// Places the initial log-std near zero (unit exploration noise).
    static constexpr double kRawBiasInit = 0.55;

    GaussianActor() = default;

    GaussianActor(int obs_dim, int act_dim, const std::vector<int>& hidden,
                  RngStream& rng)
        : act_dim_(act_dim) {
        std::vector<int> sizes;
        sizes.push_back(obs_dim);
        for (int h : hidden) sizes.push_back(h);
        sizes.push_back(2 * act_dim);
        net_ = Mlp(std::move(sizes), rng);
        net_.biases(net_.layer_count() - 1)
            .tail(act_dim)
            .setConstant(kRawBiasInit);
    }

    int obs_dim() const { return net_.input_dim(); }
    int act_dim() const { return act_dim_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    /// Everything the update step needs from one sampled batch
    /// (columns = samples throughout).
    struct Eval {
        MlpCache cache;
        Matrix mu, raw, log_std, sigma, eps, u, a;
        Vector logp;
    };

    /// Deterministic core: given the standard-normal draws, produce actions
    /// and log-probabilities (reparametrized sampling).
    Eval evaluate(const Matrix& obs, const Matrix& eps) const {
        Eval e;
        const Matrix head = net_.forward_cached(obs, e.cache);
        const auto n = obs.cols();
        e.mu = head.topRows(act_dim_);
        e.raw = head.bottomRows(act_dim_);
        e.log_std = log_std_from_raw(e.raw);
        e.sigma = e.log_std.array().exp().matrix();
        e.eps = eps;
        e.u = e.mu + e.sigma.cwiseProduct(e.eps);
        e.a = e.u.array().tanh().matrix();
        e.logp = Vector::Zero(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            double lp = 0.0;
            for (int i = 0; i < act_dim_; ++i) {
                const double ls = e.log_std(i, c);
                const double ep = e.eps(i, c);
                const double uu = e.u(i, c);
                lp += -0.5 * ep * ep - ls -
                      0.5 * std::log(2.0 * constants::pi);
                lp -= 2.0 * (std::log(2.0) - uu - detail::softplus(-2.0 * uu));
            }
            e.logp[c] = lp;
        }
        return e;
    }

    Eval sample(const Matrix& obs, RngStream& rng) const {
        Matrix eps(act_dim_, obs.cols());
        for (Eigen::Index c = 0; c < eps.cols(); ++c)
            for (int i = 0; i < act_dim_; ++i) eps(i, c) = rng.normal();
        return evaluate(obs, eps);
    }

    /// One stochastic action with its log-probability.
    std::pair<Vector, double> sample_one(const Vector& obs,
                                         RngStream& rng) const {
        const Eval e = sample(obs, rng);
        return {e.a.col(0), e.logp[0]};
    }

    /// Deterministic policy: squashed mean, no noise.
    Matrix mean_action(const Matrix& obs) const {
        const Matrix head = net_.forward(obs);
        return head.topRows(act_dim_).array().tanh().matrix();
    }

    Vector mean_action_one(const Vector& obs) const {
        return mean_action(Matrix(obs)).col(0);
    }

    /// Density of a given squashed action (for quadrature checks); the
    /// action must lie strictly inside (-1,1) per dimension.
    double log_density(const Vector& obs, const Vector& action) const {
        const Matrix head = net_.forward(Matrix(obs));
        double lp = 0.0;
        for (int i = 0; i < act_dim_; ++i) {
            const double mu = head(i, 0);
            const double ls = clamp_log_std(
                head(act_dim_ + i, 0));
            const double sd = std::exp(ls);
            const double a = action[i];
            const double u = 0.5 * std::log((1.0 + a) / (1.0 - a));
            const double z = (u - mu) / sd;
            lp += -0.5 * z * z - ls - 0.5 * std::log(2.0 * constants::pi);
            lp -= std::log(1.0 - a * a);
        }
        return lp;
    }

    Matrix log_std_from_raw(const Matrix& raw) const {
        return (kLogStdMin +
                0.5 * (kLogStdMax - kLogStdMin) *
                    (raw.array().tanh() + 1.0))
            .matrix();
    }

  private:
    double clamp_log_std(double raw) const {
        return kLogStdMin +
               0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + 1.0);
    }

    Mlp net_;
    int act_dim_ = 0;
};

/// Convex blend of target parameters toward the online network.
inline void polyak_update(Mlp& target, const Mlp& online, double rho) {
    if (target.sizes() != online.sizes())
        throw ContractViolation("polyak update on mismatched networks");
    const Vector t = target.get_params();
    const Vector o = online.get_params();
    target.set_params(rho * o + (1.0 - rho) * t);
}

/// Bellman backup with the double-Q minimum and the entropy bonus; done=1
/// cuts the bootstrap (truncated episodes store done=0 and keep it).
inline Vector critic_target(const Vector& rewards, const Vector& done,
                            const Vector& q1_next, const Vector& q2_next,
                            const Vector& logp_next, double gamma,
                            double alpha) {
    const auto n = rewards.size();
    if (done.size() != n || q1_next.size() != n || q2_next.size() != n ||
        logp_next.size() != n)
        throw ContractViolation("critic target batch size mismatch");
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double qmin = std::min(q1_next[i], q2_next[i]);
        y[i] = rewards[i] +
               gamma * (1.0 - done[i]) * (qmin - alpha * logp_next[i]);
    }
    return y;
}

/// Mean-squared-error loss of one critic on (inputs, targets) and its
/// parameter gradient (flat layout).
inline double critic_loss_grad(const Mlp& critic, const Matrix& qin,
                               const Vector& y, Vector* flat_grad) {
    const auto n = qin.cols();
    MlpCache cache;
    const Matrix q = critic.forward_cached(qin, cache);
    const Matrix resid = q - y.transpose();
    const double loss = resid.squaredNorm() / static_cast<double>(n);
    if (flat_grad != nullptr) {
        MlpGrads grads = critic.make_grads();
        const Matrix dy = (2.0 / static_cast<double>(n)) * resid;
        critic.backward(cache, dy, grads);
        *flat_grad = critic.flatten_grads(grads);
    }
    return loss;
}

/// Actor objective mean(alpha * logp - min_i Q_i(s, a)) under reparametrized
/// sampling with the supplied standard-normal draws, plus its parameter
/// gradient. The minimum is taken per sample, and only the selected critic
/// contributes action gradients.
inline double actor_loss_grad(const GaussianActor& actor, const Mlp& q1,
                              const Mlp& q2, const Matrix& obs,
                              const Matrix& eps, double alpha,
                              Vector* flat_grad, Vector* logp_out) {
    const auto n = obs.cols();
    const int act_dim = actor.act_dim();
    const GaussianActor::Eval e = actor.evaluate(obs, eps);

    Matrix qin(obs.rows() + act_dim, n);
    qin.topRows(obs.rows()) = obs;
    qin.bottomRows(act_dim) = e.a;

    MlpCache c1, c2;
    const Matrix q1v = q1.forward_cached(qin, c1);
    const Matrix q2v = q2.forward_cached(qin, c2);

    double loss = 0.0;
    for (Eigen::Index c = 0; c < n; ++c)
        loss += alpha * e.logp[c] - std::min(q1v(0, c), q2v(0, c));
    loss /= static_cast<double>(n);
    if (logp_out != nullptr) *logp_out = e.logp;
    if (flat_grad == nullptr) return loss;

    // d(sum Q)/d(input) for each critic, then per-sample argmin selection.
    const Matrix ones = Matrix::Ones(1, n);
    MlpGrads scratch1 = q1.make_grads();
    MlpGrads scratch2 = q2.make_grads();
    Matrix dx1, dx2;
    q1.backward(c1, ones, scratch1, &dx1);
    q2.backward(c2, ones, scratch2, &dx2);

    Matrix dq_da(act_dim, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const Matrix& src = (q1v(0, c) <= q2v(0, c)) ? dx1 : dx2;
        dq_da.col(c) = src.col(c).tail(act_dim);
    }

    // Loss gradient w.r.t. the pre-squash sample u: the entropy term
    // contributes alpha * 2a, the critic term -dQ/da * (1 - a^2).
    const Matrix one_m_a2 = (1.0 - e.a.array().square()).matrix();
    const Matrix du =
        alpha * 2.0 * e.a - dq_da.cwiseProduct(one_m_a2);

    const Matrix d_mu = du;
    const Matrix d_log_std =
        (du.cwiseProduct(e.sigma.cwiseProduct(e.eps)).array() - alpha)
            .matrix();
    const Matrix d_raw = d_log_std.cwiseProduct(
        (0.5 * (GaussianActor::kLogStdMax - GaussianActor::kLogStdMin) *
         (1.0 - e.raw.array().tanh().square()))
            .matrix());

    Matrix dy(2 * act_dim, n);
    dy.topRows(act_dim) = d_mu / static_cast<double>(n);
    dy.bottomRows(act_dim) = d_raw / static_cast<double>(n);

    MlpGrads grads = actor.net().make_grads();
    actor.net().backward(e.cache, dy, grads);
    *flat_grad = actor.net().flatten_grads(grads);
    return loss;
}

/// Fixed-capacity FIFO transition store with uniform sampling.
class ReplayBuffer {
  public:
    ReplayBuffer(int obs_dim, int act_dim, int capacity)
        : obs_dim_(obs_dim), act_dim_(act_dim), capacity_(capacity),
          obs_(obs_dim, capacity), act_(act_dim, capacity),
          next_obs_(obs_dim, capacity), rew_(capacity), done_(capacity) {
        if (capacity < 1)
            throw ConfigError("buffer capacity must be positive",
                              "sac.buffer_capacity");
    }

    int size() const { return size_; }
    int capacity() const { return capacity_; }
    bool full() const { return size_ == capacity_; }

    void push(const Vector& obs, const Vector& act, double reward,
              const Vector& next_obs, double done) {
        obs_.col(head_) = obs;
        act_.col(head_) = act;
        next_obs_.col(head_) = next_obs;
        rew_[head_] = reward;
        done_[head_] = done;
        head_ = (head_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }

    struct Batch {
        Matrix obs, act, next_obs;
        Vector rew, done;
    };

    Batch sample(int n, RngStream& rng) const {
        if (n < 1 || n > size_)
            throw ContractViolation("batch size exceeds buffer contents");
        Batch b;
        b.obs.resize(obs_dim_, n);
        b.act.resize(act_dim_, n);
        b.next_obs.resize(obs_dim_, n);
        b.rew.resize(n);
        b.done.resize(n);
        for (int i = 0; i < n; ++i) {
            const int idx =
                static_cast<int>(rng.uniform_int(0, size_ - 1));
            const int slot = chronological_slot(idx);
            b.obs.col(i) = obs_.col(slot);
            b.act.col(i) = act_.col(slot);
            b.next_obs.col(i) = next_obs_.col(slot);
            b.rew[i] = rew_[slot];
            b.done[i] = done_[slot];
        }
        return b;
    }

    struct Transition {
        Vector obs, act, next_obs;
        double rew = 0.0, done = 0.0;
    };

    /// i-th oldest stored transition (0 = oldest).
    Transition transition(int i) const {
        if (i < 0 || i >= size_)
            throw ContractViolation("transition index out of range");
        const int slot = chronological_slot(i);
        return Transition{obs_.col(slot), act_.col(slot), next_obs_.col(slot),
                          rew_[slot], done_[slot]};
    }

    void clear() {
        size_ = 0;
        head_ = 0;
    }

  private:
    int chronological_slot(int i) const {
        return full() ? (head_ + i) % capacity_ : i;
    }

    int obs_dim_, act_dim_, capacity_;
    Matrix obs_, act_, next_obs_;
    Vector rew_, done_;
    int size_ = 0;
    int head_ = 0;
};

/// Actor, twin critics, their targets, optimizers, and the entropy
/// coefficient, with one-step update operations for each part.
class SacAgent {
  public:
    SacAgent(int obs_dim, int act_dim, SacConfig cfg, RngStream& rng)
        : cfg_(std::move(cfg)), obs_dim_(obs_dim), act_dim_(act_dim) {
        cfg_.validate();
        if (obs_dim < 1 || act_dim < 1)
            throw ContractViolation("agent needs positive dimensions");
        actor_ = GaussianActor(obs_dim, act_dim, cfg_.hidden, rng);
        std::vector<int> qsizes;
        qsizes.push_back(obs_dim + act_dim);
        for (int h : cfg_.hidden) qsizes.push_back(h);
        qsizes.push_back(1);
        q1_ = Mlp(qsizes, rng);
        q2_ = Mlp(qsizes, rng);
        q1_target_ = q1_;
        q2_target_ = q2_;
        actor_opt_ = AdamOptimizer(actor_.net().param_count());
        q1_opt_ = AdamOptimizer(q1_.param_count());
        q2_opt_ = AdamOptimizer(q2_.param_count());
        log_alpha_ = std::log(cfg_.init_alpha);
    }

    const SacConfig& config() const { return cfg_; }
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    void set_log_alpha(double v) { log_alpha_ = v; }
    std::int64_t steps_trained() const { return steps_trained_; }
    void set_steps_trained(std::int64_t s) { steps_trained_ = s; }
    std::uint64_t fingerprint() const {
        return sac_fingerprint(cfg_, obs_dim_, act_dim_);
    }

    GaussianActor& actor() { return actor_; }
    const GaussianActor& actor() const { return actor_; }
    Mlp& q1() { return q1_; }
    Mlp& q2() { return q2_; }
    Mlp& q1_target() { return q1_target_; }
    Mlp& q2_target() { return q2_target_; }
    const Mlp& q1() const { return q1_; }
    const Mlp& q2() const { return q2_; }
    const Mlp& q1_target() const { return q1_target_; }
    const Mlp& q2_target() const { return q2_target_; }
    AdamOptimizer& actor_opt() { return actor_opt_; }
    AdamOptimizer& q1_opt() { return q1_opt_; }
    AdamOptimizer& q2_opt() { return q2_opt_; }
    const AdamOptimizer& actor_opt() const { return actor_opt_; }
    const AdamOptimizer& q1_opt() const { return q1_opt_; }
    const AdamOptimizer& q2_opt() const { return q2_opt_; }

    Vector stochastic_action(const Vector& obs, RngStream& rng) const {
        return actor_.sample_one(obs, rng).first;
    }

    Vector deterministic_action(const Vector& obs) const {
        return actor_.mean_action_one(obs);
    }

    /// Bellman targets from the target critics with freshly sampled next
    /// actions; detached by construction (no gradients flow anywhere).
    Vector compute_targets(const ReplayBuffer::Batch& b,
                           RngStream& rng) const {
        const GaussianActor::Eval e = actor_.sample(b.next_obs, rng);
        Matrix qin(obs_dim_ + act_dim_, b.next_obs.cols());
        qin.topRows(obs_dim_) = b.next_obs;
        qin.bottomRows(act_dim_) = e.a;
        const Vector q1n = q1_target_.forward(qin).row(0).transpose();
        const Vector q2n = q2_target_.forward(qin).row(0).transpose();
        return critic_target(b.rew, b.done, q1n, q2n, e.logp, cfg_.gamma,
                             alpha());
    }

    /// One Adam step per critic on the mean-squared Bellman error; returns
    /// the mean of the two losses.
    double update_critics(const ReplayBuffer::Batch& b, const Vector& y,
                          double lr) {
        Matrix qin(obs_dim_ + act_dim_, b.obs.cols());
        qin.topRows(obs_dim_) = b.obs;
        qin.bottomRows(act_dim_) = b.act;

        Vector g1, g2;
        const double l1 = critic_loss_grad(q1_, qin, y, &g1);
        const double l2 = critic_loss_grad(q2_, qin, y, &g2);
        Vector p1 = q1_.get_params();
        q1_opt_.step(p1, g1, lr);
        q1_.set_params(p1);
        Vector p2 = q2_.get_params();
        q2_opt_.step(p2, g2, lr);
        q2_.set_params(p2);
        return 0.5 * (l1 + l2);
    }

    /// One Adam step on the actor with the critics frozen; also reports the
    /// batch log-probabilities for the entropy-coefficient step.
    double update_actor(const ReplayBuffer::Batch& b, RngStream& rng,
                        double lr, Vector* logp_out) {
        Matrix eps(act_dim_, b.obs.cols());
        for (Eigen::Index c = 0; c < eps.cols(); ++c)
            for (int i = 0; i < act_dim_; ++i) eps(i, c) = rng.normal();
        Vector grad;
        const double loss = actor_loss_grad(actor_, q1_, q2_, b.obs, eps,
                                            alpha(), &grad, logp_out);
        Vector p = actor_.net().get_params();
        actor_opt_.step(p, grad, lr);
        actor_.net().set_params(p);
        return loss;
    }

    /// Dual gradient step on log(alpha): drives measured entropy toward the
    /// target; exactly stationary when they agree.
    double adjust_alpha(const Vector& logp, double lr) {
        log_alpha_ += lr * (logp.mean() + cfg_.target_entropy);
        return alpha();
    }

    void polyak_step() {
        polyak_update(q1_target_, q1_, cfg_.rho);
        polyak_update(q2_target_, q2_, cfg_.rho);
    }

    /// Parameter hash for determinism checks.
    std::uint64_t param_hash() const {
        std::string bytes;
        auto append = [&bytes](const Vector& v) {
            const auto old = bytes.size();
            bytes.resize(old + sizeof(double) * v.size());
            std::memcpy(bytes.data() + old, v.data(),
                        sizeof(double) * v.size());
        };
        append(actor_.net().get_params());
        append(q1_.get_params());
        append(q2_.get_params());
        append(q1_target_.get_params());
        append(q2_target_.get_params());
        Vector la(1);
        la[0] = log_alpha_;
        append(la);
        return fnv1a64(bytes);
    }

  private:
    SacConfig cfg_;
    int obs_dim_ = 0, act_dim_ = 0;
    GaussianActor actor_;
    Mlp q1_, q2_, q1_target_, q2_target_;
    AdamOptimizer actor_opt_, q1_opt_, q2_opt_;
    double log_alpha_ = 0.0;
    std::int64_t steps_trained_ = 0;
};

/// One row of the exported learning curve.
struct LearningCurveRow {
    std::int64_t step = 0;
    double eval_return = 0.0;
    double alpha = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

/// Mean undiscounted return of the deterministic policy over fresh episodes
/// on a copy of the environment (the original is untouched).
inline double evaluate_policy(const CapsuleEnv& proto, const SacAgent& agent,
                              int episodes, std::uint64_t seed) {
    CapsuleEnv env = proto;
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Observation obs = env.reset(split_seed(seed, "eval-episode", e));
        while (true) {
            const Vector a = agent.deterministic_action(obs.vec());
            const StepResult r = env.step(Vec4(a));
            total += r.reward;
            obs = r.obs;
            if (r.done) break;
        }
    }
    return total / episodes;
}

/// Single-threaded training driver owning the replay buffer; reusable
/// across the pretrain and fine-tune stages.
class SacTrainer {
  public:
    explicit SacTrainer(SacAgent agent)
        : agent_(std::move(agent)),
          buffer_(agent_.obs_dim(), agent_.act_dim(),
                  agent_.config().buffer_capacity) {}

    SacAgent& agent() { return agent_; }
    const SacAgent& agent() const { return agent_; }
    ReplayBuffer& buffer() { return buffer_; }
    void reset_buffer() { buffer_.clear(); }

    /// The main loop: uniform-random actions for the first `warmup` steps,
    /// stochastic policy afterwards; `updates_per_step` gradient updates per
    /// environment step whenever the buffer holds at least one batch;
    /// periodic deterministic evaluations emitted as learning-curve rows.
    std::vector<LearningCurveRow> run(CapsuleEnv& env,
                                      std::int64_t total_steps, double lr,
                                      int warmup, std::uint64_t seed) {
        const SacConfig& cfg = agent_.config();
        if (env.obs_dim() != agent_.obs_dim() ||
            env.act_dim() != agent_.act_dim())
            throw ContractViolation("environment/agent dimension mismatch");

        RngStream explore(split_seed(seed, "explore"));
        RngStream replay(split_seed(seed, "replay"));
        RngStream update(split_seed(seed, "update"));

        std::vector<LearningCurveRow> curve;
        std::int64_t episode = 0;
        Observation obs = env.reset(split_seed(seed, "episode", episode));
        double closs_sum = 0.0, aloss_sum = 0.0;
        std::int64_t loss_count = 0;
        std::int64_t eval_index = 0;

        for (std::int64_t step = 1; step <= total_steps; ++step) {
            Vector a(agent_.act_dim());
            if (step <= warmup)
                for (int i = 0; i < agent_.act_dim(); ++i)
                    a[i] = explore.uniform(-1.0, 1.0);
            else
                a = agent_.stochastic_action(obs.vec(), explore);

            const StepResult res = env.step(Vec4(a));
            buffer_.push(obs.vec(), a, res.reward, res.obs.vec(),
                         res.terminal ? 1.0 : 0.0);
            obs = res.obs;
            if (res.done) {
                ++episode;
                obs = env.reset(split_seed(seed, "episode", episode));
            }

            if (buffer_.size() >= cfg.batch) {
                for (int k = 0; k < cfg.updates_per_step; ++k) {
                    const ReplayBuffer::Batch batch =
                        buffer_.sample(cfg.batch, replay);
                    const Vector y = agent_.compute_targets(batch, update);
                    const double closs =
                        agent_.update_critics(batch, y, lr);
                    Vector logp;
                    const double aloss =
                        agent_.update_actor(batch, update, lr, &logp);
                    agent_.adjust_alpha(logp, lr);
                    agent_.polyak_step();
                    if (!std::isfinite(closs) || !std::isfinite(aloss) ||
                        !std::isfinite(agent_.alpha()))
                        throw TrainingDivergedError(
                            "non-finite loss during update",
                            agent_.steps_trained() + 1);
                    closs_sum += closs;
                    aloss_sum += aloss;
                    ++loss_count;
                }
            }
            agent_.set_steps_trained(agent_.steps_trained() + 1);

            if (step % cfg.eval_interval == 0 || step == total_steps) {
                const double ret = evaluate_policy(
                    env, agent_, cfg.eval_episodes,
                    split_seed(seed, "eval", eval_index++));
                if (!std::isfinite(ret))
                    throw TrainingDivergedError("non-finite evaluation return",
                                                agent_.steps_trained());
                LearningCurveRow row;
                row.step = agent_.steps_trained();
                row.eval_return = ret;
                row.alpha = agent_.alpha();
                row.critic_loss =
                    loss_count > 0 ? closs_sum / loss_count : 0.0;
                row.actor_loss =
                    loss_count > 0 ? aloss_sum / loss_count : 0.0;
                curve.push_back(row);
                closs_sum = aloss_sum = 0.0;
                loss_count = 0;
            }
        }
        return curve;
    }

  private:
    SacAgent agent_;
    ReplayBuffer buffer_;
};

/// Pretraining entry point: fresh agent, full warmup, simulation rate.
inline std::pair<SacTrainer, std::vector<LearningCurveRow>>
train(CapsuleEnv& env, const SacConfig& cfg, std::int64_t total_steps) {
    cfg.validate();
    if (cfg.warmup > total_steps)
        throw ConfigError("warmup exceeds total steps", "sac.warmup");
    RngStream init(split_seed(cfg.seed, "init"));
    SacTrainer trainer(
        SacAgent(env.obs_dim(), env.act_dim(), cfg, init));
    auto curve =
        trainer.run(env, total_steps, cfg.lr_sim, cfg.warmup, cfg.seed);
    return {std::move(trainer), std::move(curve)};
}

/// Fine-tuning: continue a trained agent on the shifted environment at the
/// reduced rate. The buffer starts empty (stale simulator transitions
/// contradict the new dynamics) unless retain_buffer is set and the caller
/// passes the pretraining trainer itself.
inline std::vector<LearningCurveRow> finetune(SacTrainer& trainer,
                                              CapsuleEnv& real_env,
                                              std::int64_t steps,
                                              std::uint64_t seed) {
    const SacConfig& cfg = trainer.agent().config();
    if (!cfg.retain_buffer) trainer.reset_buffer();
    if (steps == 0) return {};
    return trainer.run(real_env, steps, cfg.lr_real, cfg.finetune_warmup,
                       seed);
}

namespace detail {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw IoError("checkpoint write failed");
}

template <typename T> void write_pod(std::ostream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

inline void write_vector(std::ostream& out, const Vector& v) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    write_bytes(out, v.data(), sizeof(double) * v.size());
}

inline void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
        throw IoError("checkpoint truncated");
}

template <typename T> T read_pod(std::istream& in) {
    T v;
    read_bytes(in, &v, sizeof(T));
    return v;
}

inline Vector read_vector(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    Vector v(n);
    read_bytes(in, v.data(), sizeof(double) * n);
    return v;
}

inline void write_net(std::ostream& out, const Mlp& net) {
    write_pod<std::uint32_t>(out,
                             static_cast<std::uint32_t>(net.sizes().size()));
    for (int s : net.sizes()) write_pod<std::int32_t>(out, s);
    write_vector(out, net.get_params());
}

inline void read_net(std::istream& in, Mlp& net) {
    const auto count = read_pod<std::uint32_t>(in);
    std::vector<int> sizes(count);
    for (auto& s : sizes) s = read_pod<std::int32_t>(in);
    if (sizes != net.sizes())
        throw IncompatibleCheckpointError(
            "stored network architecture does not match the configuration");
    net.set_params(read_vector(in));
}

inline void write_opt(std::ostream& out, const AdamOptimizer& opt) {
    write_pod<std::int64_t>(out, opt.steps_taken());
    write_vector(out, opt.first_moment());
    write_vector(out, opt.second_moment());
}

inline void read_opt(std::istream& in, AdamOptimizer& opt) {
    const auto t = read_pod<std::int64_t>(in);
    const Vector m = read_vector(in);
    const Vector v = read_vector(in);
    if (m.size() != opt.first_moment().size())
        throw IncompatibleCheckpointError(
            "stored optimizer state does not match the configuration");
    opt.restore(t, m, v);
}

} // namespace detail

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'G', 'C',
                                             'A', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialize the full agent (networks, targets, optimizer moments, entropy
/// coefficient, step count) with an embedded config fingerprint.
inline void save_checkpoint(const SacAgent& agent, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    detail::write_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
    detail::write_pod<std::uint64_t>(out, agent.fingerprint());
    detail::write_pod<std::uint32_t>(
        out, static_cast<std::uint32_t>(agent.obs_dim()));
    detail::write_pod<std::uint32_t>(
        out, static_cast<std::uint32_t>(agent.act_dim()));
    detail::write_pod<std::int64_t>(out, agent.steps_trained());
    detail::write_pod<double>(out, agent.log_alpha());
    detail::write_net(out, agent.actor().net());
    detail::write_net(out, agent.q1());
    detail::write_net(out, agent.q2());
    detail::write_net(out, agent.q1_target());
    detail::write_net(out, agent.q2_target());
    detail::write_opt(out, agent.actor_opt());
    detail::write_opt(out, agent.q1_opt());
    detail::write_opt(out, agent.q2_opt());
    out.flush();
    if (!out) throw IoError("checkpoint write failed: " + path);
}

/// Rebuild an agent from disk; the stored fingerprint must match the one
/// implied by the supplied configuration.
inline SacAgent load_checkpoint(const std::string& path,
                                const SacConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    detail::read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw IncompatibleCheckpointError("not a policy checkpoint: " + path);
    const auto version = detail::read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw IncompatibleCheckpointError("unsupported checkpoint version");
    const auto fingerprint = detail::read_pod<std::uint64_t>(in);
    const auto obs_dim =
        static_cast<int>(detail::read_pod<std::uint32_t>(in));
    const auto act_dim =
        static_cast<int>(detail::read_pod<std::uint32_t>(in));
    if (fingerprint != sac_fingerprint(cfg, obs_dim, act_dim))
        throw IncompatibleCheckpointError(
            "checkpoint fingerprint does not match the configuration");

    RngStream scratch(0);
    SacAgent agent(obs_dim, act_dim, cfg, scratch);
    agent.set_steps_trained(detail::read_pod<std::int64_t>(in));
    agent.set_log_alpha(detail::read_pod<double>(in));
    detail::read_net(in, agent.actor().net());
    detail::read_net(in, agent.q1());
    detail::read_net(in, agent.q2());
    detail::read_net(in, agent.q1_target());
    detail::read_net(in, agent.q2_target());
    detail::read_opt(in, agent.actor_opt());
    detail::read_opt(in, agent.q1_opt());
    detail::read_opt(in, agent.q2_opt());
    return agent;
}

} // namespace magcap
