#pragma once

#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quakesr/core/rng.hpp"
#include "quakesr/loss/loss.hpp"
#include "quakesr/prior/prior.hpp"

namespace quakesr {

/// What the samplers need from an inference problem: a prior they can draw from and evaluate,
/// and a stochastic loss driven by an explicit stream key.
template <class P>
concept InferenceProblem = requires(P& p, const P& cp, const Eigen::VectorXd& v, Engine& g, StreamKey key) {
  { cp.dimension() } -> std::convertible_to<std::size_t>;
  { p.sample_prior(g) } -> std::convertible_to<Eigen::VectorXd>;
  { cp.log_prior(v) } -> std::convertible_to<double>;
  { cp.loss(v, key) } -> std::convertible_to<double>;
};

/// Problems whose loss also accepts the standard normals behind its event-wide errors, so a
/// chain can correlate them between iterations.
template <class P>
concept AuxiliaryProblem = InferenceProblem<P> && requires(const P& cp, const Eigen::VectorXd& v, StreamKey key,
                                                           const std::vector<double>& aux) {
  { cp.aux_size() } -> std::convertible_to<std::size_t>;
  { cp.loss(v, key, aux) } -> std::convertible_to<double>;
};

/// The earthquake impact model: two-stage prior plus dataset loss over a set of events.
class QuakeProblem {
 public:
  QuakeProblem(const LossProblem& loss, PriorSpec spec, unsigned loss_threads = 1)
      : loss_(&loss), sampler_(std::move(spec)), threads_(loss_threads) {}

  [[nodiscard]] std::size_t dimension() const { return kCoreParamCount + sampler_.spec().dummy_count; }
  [[nodiscard]] const PriorSpec& prior() const { return sampler_.spec(); }
  [[nodiscard]] const LossProblem& loss_problem() const { return *loss_; }
  [[nodiscard]] std::vector<std::string> names() const { return parameter_names(sampler_.spec().dummy_count); }
  [[nodiscard]] double prior_acceptance_rate() const { return sampler_.acceptance_rate(); }

  Eigen::VectorXd sample_prior(Engine& g) { return sampler_.sample(g).to_vector(); }

  [[nodiscard]] double log_prior(const Eigen::VectorXd& v) const {
    return log_prior_density(ModelParams::from_vector(v), sampler_.spec());
  }

  [[nodiscard]] double loss(const Eigen::VectorXd& v, StreamKey key) const {
    return dataset_loss(*loss_, ModelParams::from_vector(v), key, nullptr, threads_);
  }

  [[nodiscard]] std::size_t aux_size() const {
    return loss_->events.size() * draws_per_event(loss_->config) * 3;
  }

  [[nodiscard]] double loss(const Eigen::VectorXd& v, StreamKey key, const std::vector<double>& aux) const {
    if (aux.size() != aux_size()) throw InputError("auxiliary normal field has the wrong size");
    const std::size_t draws = draws_per_event(loss_->config);
    XiNormalsField field(loss_->events.size(), std::vector<XiNormals>(draws));
    std::size_t k = 0;
    for (auto& ev : field)
      for (auto& z : ev)
        for (double& x : z) x = aux[k++];
    return dataset_loss(*loss_, ModelParams::from_vector(v), key, &field, threads_);
  }

 private:
  const LossProblem* loss_;
  PriorSampler sampler_;
  unsigned threads_ = 1;
};

}  // namespace quakesr
