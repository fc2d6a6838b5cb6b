#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "privdistill/common/matrix.hpp"

namespace privdistill::objectives {

enum class Divergence { kForwardKl, kReverseKl, kJsd };

// All inputs are normalized log-distributions. T is the teacher, S the student.
//   forward  KL(T || S)
//   reverse  KL(S || T)
//   jsd      beta KL(T || M) + (1 - beta) KL(S || M),  M = beta T + (1 - beta) S
double divergence(std::span<const double> teacher_log, std::span<const double> student_log,
                  Divergence kind, double jsd_beta = 0.5);

// Gradient of divergence() with respect to the student's logits, written into out.
void divergence_logit_grad(std::span<const double> teacher_log, std::span<const double> student_log,
                           Divergence kind, double jsd_beta, std::span<double> out);

struct DivergenceResult {
  double value = 0.0;                // mean over positions
  std::vector<double> per_position;
  Matrix dlogits;                    // d value / d student logits
};

// Mean-over-positions divergence between per-position teacher and student
// distributions. Only the student side receives gradient. ValidationError if a
// row does not sum to one.
DivergenceResult opd_divergence_loss(const Matrix& teacher_log, const Matrix& student_log,
                                     Divergence kind, double jsd_beta = 0.5);

// beta * mean over positions of KL(student || base).
DivergenceResult kl_anchor_term(const Matrix& student_log, const Matrix& base_log, double beta);
double kl_anchor_term(std::span<const double> per_position_kl, double beta);

void check_normalized(const Matrix& log_dist, double tol = 1e-6);

}  // namespace privdistill::objectives
