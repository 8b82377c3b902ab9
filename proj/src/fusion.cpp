#include "vtw/fusion.hpp"

namespace vtw {

VectorX<double> add_noise_with(const VectorX<double>& a0, int k, const DiffusionSchedule& sched,
                               const VectorX<double>& eps) {
  sched.require_valid();
  if (k < 1 || k > sched.k_train) {
    throw BadStep("diffusion step " + std::to_string(k) + " outside [1, " +
                  std::to_string(sched.k_train) + "]");
  }
  if (eps.size() != a0.size()) throw ShapeMismatch("noise length does not match the action");
  const double ab = sched.alpha_bar[static_cast<std::size_t>(k)];
  return std::sqrt(ab) * a0 + std::sqrt(1.0 - ab) * eps;
}

NoisedAction add_noise(const VectorX<double>& a0, int k, const DiffusionSchedule& sched,
                       Rng& rng) {
  VectorX<double> eps(a0.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return {add_noise_with(a0, k, sched, eps), std::move(eps)};
}

double noise_prediction_loss(const VectorX<double>& eps, const VectorX<double>& eps_hat) {
  if (eps.size() != eps_hat.size()) throw ShapeMismatch("noise vectors differ in length");
  return (eps - eps_hat).array().square().mean();
}

VectorX<double> denoise(const VectorX<double>& a_k, const NoisePredictor& predictor,
                        const Observation& obs, const DiffusionSchedule& sched, Rng* rng) {
  sched.require_valid();
  VectorX<double> action = a_k;
  for (int j = sched.k_infer; j >= 1; --j) {
    const int step = sched.infer_steps[static_cast<std::size_t>(j - 1)];
    VectorX<double> eps_hat;
    try {
      eps_hat = predictor(action, obs, step);
    } catch (const std::exception& e) {
      throw DenoiseAborted(step, e.what());
    }
    if (eps_hat.size() != action.size()) {
      throw DenoiseAborted(step, "predictor returned a vector of the wrong length");
    }
    const double alpha = sched.alpha_coef[static_cast<std::size_t>(j - 1)];
    const double gamma = sched.gamma_coef[static_cast<std::size_t>(j - 1)];
    const double sigma = sched.sigma_coef[static_cast<std::size_t>(j - 1)];
    action = alpha * (action - gamma * eps_hat);
    if (sigma > 0.0) {
      if (rng == nullptr) {
        throw DenoiseAborted(step, "sigma > 0 requires a random source");
      }
      for (Eigen::Index i = 0; i < action.size(); ++i) action(i) += sigma * rng->normal();
    }
  }
  return action;
}

}  // namespace vtw
