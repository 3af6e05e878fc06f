#pragma once

#include "simcon/encoders.hpp"
#include "simcon/matrix.hpp"

// Reference implementations used only to cross-check the production kernels.
// Everything here is written as directly as possible from the loss
// definitions: plain nested loops, exp() applied to raw tempered
// similarities, no shared code with the optimized paths beyond the matrix
// container. Values are trustworthy only at small scale and moderate
// temperatures where exp(S/tau) stays finite.

namespace simcon::oracle {

// Rows scaled to unit L2 norm.
Matrix normalize_rows(const Matrix& m);

// Pairwise dot products of rows: out[i][j] = a_i . b_j. No clamping.
Matrix similarity(const Matrix& a, const Matrix& b);

Matrix positive_mask(const Matrix& s, double lambda);
Matrix joint_positive_mask(const Matrix& s_11, const Matrix& s_22, double lambda);

// Rows of z_i / z_t must already be unit-normalized.
double info_nce(const Matrix& z_i, const Matrix& z_t, double tau);

double simcon(const Matrix& z_i, const Matrix& z_t, const Matrix& mask_i, const Matrix& mask_t,
              double tau);

double mv_simcon(const Matrix& z_i1, const Matrix& z_i2, const Matrix& z_t, double tau,
                 double lambda);

// Forward pass of an MLP head written with plain loops (tanh between layers,
// linear final layer, row renormalization).
Matrix head_forward(const Mlp& head, const Matrix& z);

double ncs(const Matrix& z_i1, const Matrix& z_i2, const Mlp& head);

double total(const Matrix& z_i1, const Matrix& z_i2, const Matrix& z_t, double tau, double lambda,
             const Mlp& head);

double lambda_at_epoch(double initial, double step, const std::vector<std::size_t>& boundaries,
                       double floor, std::size_t epoch);

double lr_at_step(double init_lr, double max_lr, double min_lr, std::size_t warmup_steps,
                  std::size_t total_steps, std::size_t step);

}  // namespace simcon::oracle
