#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/param.hpp"

// Per-algorithm update rules, usable on their own. The strategy classes in
// the registry are thin protocol wrappers around these.
namespace fedsim {

// ---- global model --------------------------------------------------------

/// grad F_i(w_i) + mu (w_i - w_global)
ParamVector fedprox_local_gradient(const ModelSpec& spec, const ParamVector& w_i, const ParamVector& w_global,
                                   double mu, const Batch& batch);

/// grad F_i(w_i) - (grad_i_ref - grad_global_ref) + mu (w_i - w_ref)
ParamVector dane_local_gradient(const ModelSpec& spec, const ParamVector& w_i, const ParamVector& w_ref,
                                const ParamVector& grad_i_ref, const ParamVector& grad_global_ref, double mu,
                                const Batch& batch);

/// w - lr (s (grad - c_i) + c); s = 1 is the plain control-variate step.
ParamVector scaffold_step(const ParamVector& w, const ParamVector& grad, const ParamVector& c_i,
                          const ParamVector& c, double lr, double rescale = 1.0);

enum class ServerOptimizer { Adam, Yogi, Momentum };

struct ServerOptState {
  std::vector<double> v;  // second moment (adam, yogi)
  std::vector<double> m;  // momentum buffer
};

/// Elementwise server step from the mean client delta. Empty state buffers
/// are initialised to `v0` (second moment) and zero (momentum).
ParamVector server_adaptive_update(const ParamVector& w, const ParamVector& delta, ServerOptState& state,
                                   ServerOptimizer mode, double lr, double zeta, double eps, double v0 = 0.0);

struct FedAcHyper {
  double zeta1 = 1.0;
  double zeta2 = 1.0;
  double eta1 = 0.1;
  double eta2 = 0.1;
};

struct FedAcState {
  ParamVector w;
  ParamVector w_ag;
};

FedAcState fedac_local_step(const ModelSpec& spec, const FedAcState& s, const FedAcHyper& h, const Batch& batch);

/// Median; the mean of the two middle values for even counts.
double median(std::vector<double> xs);

/// Whether a client that has trained `units` half-epochs (budget E' epochs)
/// and reached `loss` keeps training.
bool loadaboost_continue(double loss, std::optional<double> median_loss, int units, int budget_epochs);

/// Model trained by `client` in `round` under the permutation schedule.
int ensemble_model_index(std::span<const int> permutation, int client, int round, int models);

/// Unweighted mean of member outputs.
std::vector<double> ensemble_predict(const ModelSpec& spec, std::span<const ParamVector> members, const Batch& batch);

// ---- personalization and meta-learning -----------------------------------

enum class TtpVariant { Plain, Prox, Ewc };
TtpVariant parse_ttp_variant(const std::string& s);

/// `steps` gradient steps from w_star on the client's data, regularised per
/// variant. `batches` supplies one batch per step.
ParamVector ttp_finetune(const ModelSpec& spec, const ParamVector& w_star, const std::vector<Batch>& batches,
                         double lr, TtpVariant variant, double mu, const std::optional<ParamVector>& fisher);

/// zeta * grad F(zeta beta + (1 - zeta) w_star)
ParamVector apfl_local_gradient(const ModelSpec& spec, const ParamVector& beta, const ParamVector& w_star,
                                double zeta, const Batch& batch);

/// beta_{k+1} = beta_k - lr (grad F(beta_k) + mu (beta_k - w)) from `start`
/// (default w) until the gradient norm is at most tol or max_steps is reached.
struct MoreauSolve {
  ParamVector beta;
  double residual;  // |beta - (w - grad F(beta) / mu)|
  int steps;
};
MoreauSolve pfedme_inner_solve(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double mu, double lr,
                               double tol, int max_steps, const std::optional<ParamVector>& start = std::nullopt);
double pfedme_residual(const ModelSpec& spec, const ParamVector& beta, const ParamVector& w, const Batch& batch,
                       double mu);

/// mixing step: (1 - theta) beta + theta mean, theta = alpha mu / (N p)
ParamVector l2gd_mix(const ParamVector& beta, const ParamVector& mean, double alpha, double mu, std::size_t clients,
                     double p);

enum class MetaOrder { Second, First };
MetaOrder parse_meta_order(const std::string& s);

/// Scalar meta-loss F(w_k) with w_{j+1} = w_j - alpha grad F(w_j), w_0 = w.
double perfedavg_meta_loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double alpha,
                           int inner_steps = 1);
/// Gradient of perfedavg_meta_loss. First order drops the Hessian terms.
ParamVector perfedavg_meta_gradient(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double alpha,
                                    MetaOrder order, int inner_steps = 1);

/// Validation loss at the adapted point w - eta * grad F_train(w).
double metasgd_meta_loss(const ModelSpec& spec, const ParamVector& w, const ParamVector& eta, const Batch& train,
                         const Batch& val);
struct JointGradient {
  ParamVector dw;
  ParamVector deta;
};
JointGradient metasgd_joint_gradient(const ModelSpec& spec, const ParamVector& w, const ParamVector& eta,
                                     const Batch& train, const Batch& val);

// ---- fairness and clustering ---------------------------------------------

/// sum p_i F_i^q delta_i / sum p_i F_i^q with F_i clipped below at 1e-12.
ParamVector qffl_step(std::span<const ParamVector> deltas, std::span<const double> losses,
                      std::span<const double> weights, double q);

/// r_j = sum_k sign(L_j - L_k) over groups with a known loss.
std::vector<double> gifair_group_r(std::span<const double> group_losses);

struct GifairScales {
  std::vector<double> scale;  // per client
  std::vector<double> r;      // per client
  bool clamped = false;
};
/// 1 + lambda r_{s_i} / (p_i |A_{s_i}|), clamped to >= 1e-6. Groups with no
/// known client loss are left out of the comparison.
GifairScales gifair_scales(std::span<const std::optional<double>> client_losses, std::span<const int> groups,
                           int group_count, std::span<const double> p, double lambda);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::span<const double> v);

/// Lowest-loss index; ties go to the lowest index.
int argmin_first(std::span<const double> losses);

/// Row-major pairwise cosine similarity matrix.
std::vector<double> cosine_matrix(std::span<const ParamVector> vectors);

/// Power iteration on a symmetric matrix from the start vector (1, 2, ..., n).
std::vector<double> leading_eigenvector(std::span<const double> matrix, std::size_t n, int steps = 100);

/// Two-way split by the sign pattern of the leading eigenvector of the
/// cosine matrix, as positions into `updates`. Empty when no split results.
std::optional<std::pair<std::vector<int>, std::vector<int>>> cfl_bipartition(std::span<const ParamVector> updates);

}  // namespace fedsim
