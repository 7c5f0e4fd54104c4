#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quakesr/core/errors.hpp"
#include "quakesr/model/types.hpp"

namespace quakesr {

/// Coefficient slots of the vulnerability regression.
enum class Covariate : int {
  Vs30 = 0,
  PopDens = 1,
  Shdi = 2,
  Gnic = 3,
  EqFreq = 4,
  FirstHaz = 5,
  Night = 6,
  FirstHazNight = 7
};

inline constexpr std::size_t kBetaCount = 8;
inline constexpr std::size_t kCoreParamCount = 19;

/// Full model parameter set. Dummy coefficients never enter the forward model; they exist so
/// inference can be checked against parameters the data carry no information about.
struct ModelParams {
  std::array<double, kBetaCount> beta{};
  PerImpact<double> mu{};     // curve centres (MMI)
  PerImpact<double> kappa{};  // curve widths (MMI)
  PerImpact<double> sigma{};  // event-wide error sds (MMI)
  double sigma_local_mort = 0.0;
  double rho = 0.0;
  std::vector<double> dummies;

  [[nodiscard]] std::size_t dimension() const { return kCoreParamCount + dummies.size(); }

  [[nodiscard]] Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dimension()));
    Eigen::Index k = 0;
    for (double b : beta) v[k++] = b;
    for (double x : mu) v[k++] = x;
    for (double x : kappa) v[k++] = x;
    for (double x : sigma) v[k++] = x;
    v[k++] = sigma_local_mort;
    v[k++] = rho;
    for (double d : dummies) v[k++] = d;
    return v;
  }

  static ModelParams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() < static_cast<Eigen::Index>(kCoreParamCount))
      throw ParameterError("parameter vector shorter than " + std::to_string(kCoreParamCount));
    ModelParams p;
    Eigen::Index k = 0;
    for (double& b : p.beta) b = v[k++];
    for (double& x : p.mu) x = v[k++];
    for (double& x : p.kappa) x = v[k++];
    for (double& x : p.sigma) x = v[k++];
    p.sigma_local_mort = v[k++];
    p.rho = v[k++];
    for (; k < v.size(); ++k) p.dummies.push_back(v[k]);
    return p;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Column names in to_vector() order.
inline std::vector<std::string> parameter_names(std::size_t dummy_count = 0) {
  std::vector<std::string> names{"beta_vs30",     "beta_popdens",        "beta_shdi",
                                 "beta_gnic",     "beta_eqfreq",         "beta_firsthaz",
                                 "beta_night",    "beta_firsthaz_night", "mu_mort",
                                 "mu_disp",       "mu_builddam",         "kappa_mort",
                                 "kappa_disp",    "kappa_builddam",      "sigma_mort",
                                 "sigma_disp",    "sigma_builddam",      "sigma_local_mort",
                                 "rho"};
  for (std::size_t i = 0; i < dummy_count; ++i) names.push_back("dummy_" + std::to_string(i + 1));
  return names;
}

using Matrix3 = Eigen::Matrix3d;

struct ErrorCovariances {
  Matrix3 event_cov;
  Matrix3 local_cov;
  Matrix3 event_chol;  // lower factor of event_cov
  Matrix3 local_chol;  // lower factor of local_cov
  double tau = 0.0;
};

/// Event-wide covariance with a shared cross-impact correlation, and the local covariance as
/// the same matrix scaled by tau = (sigma_local_mort / sigma_mort)^2.
inline ErrorCovariances build_error_covariances(const ModelParams& p) {
  if (!(p.rho >= 0.0 && p.rho < 1.0))
    throw ParameterError("rho must lie in [0, 1), got " + std::to_string(p.rho));
  for (double s : p.sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("event-wide sigma must be finite and >= 0");
  if (!(p.sigma_local_mort >= 0.0) || !std::isfinite(p.sigma_local_mort))
    throw ParameterError("sigma_local_mort must be finite and >= 0");
  if (p.sigma[0] == 0.0 && p.sigma_local_mort > 0.0)
    throw ParameterError("sigma_local_mort > 0 requires sigma_mort > 0");

  Matrix3 corr = Matrix3::Constant(p.rho);
  corr.diagonal().setOnes();
  Eigen::LLT<Matrix3> llt(corr);
  if (llt.info() != Eigen::Success || llt.matrixL()(2, 2) <= 1e-12)
    throw ParameterError("error correlation matrix is not positive definite (rho too close to 1)");

  const Eigen::Vector3d sd(p.sigma[0], p.sigma[1], p.sigma[2]);
  ErrorCovariances out;
  out.event_cov = sd.asDiagonal() * corr * sd.asDiagonal();
  out.event_chol = sd.asDiagonal() * Matrix3(llt.matrixL());
  out.tau = p.sigma[0] > 0.0 ? (p.sigma_local_mort / p.sigma[0]) * (p.sigma_local_mort / p.sigma[0]) : 0.0;
  out.local_cov = out.tau * out.event_cov;
  out.local_chol = std::sqrt(out.tau) * out.event_chol;
  return out;
}

}  // namespace quakesr
