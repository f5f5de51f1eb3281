#pragma once

// Reference forms of the VAE and M2 objectives, built from primitive ops or
// plain double loops, for gradient checks and identity tests.

#include <vector>

#include "ssvae/models/networks.hpp"
#include "ssvae/rng.hpp"
#include "ssvae/ssl/m2.hpp"
#include "ssvae/vae/vae.hpp"

namespace testutil {

/// Input 16, latent 3: small enough that float sums stay well inside 1e-5.
ssvae::models::ArchConfig micro_arch();

/// Per-element terms of -elbo without the constant: 0.5 (x - x_hat)^2 / (L B)
/// and beta * 0.5 (mu^2 + sigma^2 - 1 - log sigma^2) / B.
ssvae::nn::Var neg_elbo_terms(const ssvae::vae::VaeModel& model, const ssvae::vae::GaussianPosterior& post,
                              const ssvae::Tensor& x, const ssvae::Tensor& eps, float beta);

/// Terms whose sum is the M2 objective minus a constant; same dropout draw
/// order as m2_objective.
ssvae::nn::Var m2_objective_terms(const ssvae::ssl::M2Model& m, const ssvae::Tensor& xl, const std::vector<int>& y,
                                  const ssvae::Tensor& eps_l, const ssvae::Tensor& xu, const ssvae::Tensor& eps_u,
                                  float beta, ssvae::RngStream& drop);

/// Direct joint expectation E_q(y|x)[E_q(z|x) log p(x|y,z) + log p(y) - beta KL - log q(y|x)]
/// per row, evaluated one class and one sample at a time in double precision.
std::vector<double> m2_unlabeled_direct(const ssvae::ssl::M2Model& m, const ssvae::Tensor& x,
                                        const ssvae::Tensor& eps, float beta);

}  // namespace testutil
