#pragma once

#include "fp3d/geometry.hpp"
#include "fp3d/sldas.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fp3d {

enum class Role { actor, critic };

std::string_view to_string(Role role);
/// Throws std::invalid_argument for anything but "actor" / "critic".
Role parse_role(std::string_view text);

inline constexpr int kOutputDim = 3;
inline constexpr int kDefaultHidden = 256;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feed-forward net in_dim -> h1 -> h2 -> 3 with tanh hidden units. The
/// actor squashes its output with 0.5 * (tanh + 1), the critic with ReLU.
///
/// All parameters live in one flat vector in checkpoint order: per layer,
/// the out x in weight matrix row-major, then the bias.
class NetParams
{
  public:
    NetParams(Role role, int in_dim, int hidden1 = kDefaultHidden, int hidden2 = kDefaultHidden);

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    static NetParams initialized(Role role, int in_dim, std::uint64_t seed, int hidden1 = kDefaultHidden,
                                 int hidden2 = kDefaultHidden);

    [[nodiscard]] Role role() const { return role_; }
    [[nodiscard]] int in_dim() const { return dims_[0]; }
    [[nodiscard]] const std::array<int, 4> &dims() const { return dims_; }
    [[nodiscard]] Eigen::Index size() const { return values_.size(); }

    [[nodiscard]] Eigen::VectorXd &values() { return values_; }
    [[nodiscard]] const Eigen::VectorXd &values() const { return values_; }

    // Adam state, same layout as values().
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    std::int64_t step = 0;

    [[nodiscard]] Eigen::Map<const RowMajorMatrix> weight(int layer) const;
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    [[nodiscard]] Eigen::Map<RowMajorMatrix> weight(int layer);
    [[nodiscard]] Eigen::Map<Eigen::VectorXd> bias(int layer);

    /// Offset of layer `layer`'s weights in the flat vector; the bias follows
    /// the weights.
    [[nodiscard]] Eigen::Index offset(int layer) const { return offsets_[layer]; }

    friend bool operator==(const NetParams &a, const NetParams &b);

  private:
    Role role_;
    std::array<int, 4> dims_;
    std::array<Eigen::Index, 3> offsets_{};
    Eigen::VectorXd values_;
};

/// Column-per-sample activations kept for the backward pass.
struct ForwardCache
{
    Eigen::MatrixXd input;
    Eigen::MatrixXd hidden1;
    Eigen::MatrixXd hidden2;
    Eigen::MatrixXd raw;
    Eigen::MatrixXd output;
};

/// `inputs` is in_dim x batch. Returns 3 x batch activated outputs.
Eigen::MatrixXd forward(const NetParams &p, const Eigen::MatrixXd &inputs, ForwardCache *cache = nullptr);

ContinuousAction actor_forward(const NetParams &p, std::span<const double> features);
/// Critic input is features followed by the candidate action.
Rtg critic_forward(const NetParams &p, std::span<const double> features, const ContinuousAction &candidate);
/// Batched critic evaluation, one prediction per candidate.
std::vector<Rtg> critic_forward(const NetParams &p, std::span<const double> features,
                                std::span<const ContinuousAction> candidates);

double loss_actor(const ContinuousAction &pred, const ContinuousAction &target);
double loss_critic(const Rtg &pred, const Rtg &target);

struct Batch
{
    Eigen::MatrixXd inputs;  // in_dim x n
    Eigen::MatrixXd targets; // 3 x n
};

/// Mean over the batch of the per-sample L1 loss.
double batch_loss(const NetParams &p, const Batch &batch);

/// Exact gradient of batch_loss. The L1 subgradient at zero is 0, as is the
/// ReLU derivative at zero.
Eigen::VectorXd backward(const NetParams &p, const Batch &batch, double *loss = nullptr);

struct AdamConfig
{
    double learning_rate = 5e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with decoupled weight decay.
void optimizer_step(NetParams &p, const Eigen::VectorXd &grad, const AdamConfig &cfg);

/// Text checkpoint: `sgf-ckpt v1 <role> <in> <h1> <h2> 3`, then one line per
/// parameter tensor, `adam <step>`, and the two moment vectors in the same
/// layout. Doubles use shortest round-trip formatting.
void write_checkpoint(std::ostream &os, const NetParams &p);
NetParams read_checkpoint(std::istream &is);

void save_checkpoint(const std::string &path, const NetParams &p);
NetParams load_checkpoint(const std::string &path);

} // namespace fp3d
