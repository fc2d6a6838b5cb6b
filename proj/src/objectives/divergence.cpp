#include "privdistill/objectives/divergence.hpp"

#include <cmath>
#include <string>

#include "privdistill/common/errors.hpp"

namespace privdistill::objectives {

namespace {

// log(beta exp(a) + (1 - beta) exp(b)), stable for -inf inputs.
double log_mix(double a, double b, double beta) {
  const double la = a + std::log(beta);
  const double lb = b + std::log1p(-beta);
  const double hi = std::max(la, lb);
  if (hi == -INFINITY) return -INFINITY;
  return hi + std::log(std::exp(la - hi) + std::exp(lb - hi));
}

// p log(p/q) with the 0 log 0 = 0 convention.
double xlogratio(double logp, double logq) {
  if (logp == -INFINITY) return 0.0;
  return std::exp(logp) * (logp - logq);
}

void require_same_shape(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("distributions have different support sizes");
  }
}

}  // namespace

double divergence(std::span<const double> t, std::span<const double> s, Divergence kind, double jsd_beta) {
  require_same_shape(t, s);
  double d = 0.0;
  switch (kind) {
    case Divergence::kForwardKl:
      for (std::size_t k = 0; k < t.size(); ++k) d += xlogratio(t[k], s[k]);
      break;
    case Divergence::kReverseKl:
      for (std::size_t k = 0; k < t.size(); ++k) d += xlogratio(s[k], t[k]);
      break;
    case Divergence::kJsd:
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double m = log_mix(t[k], s[k], jsd_beta);
        d += jsd_beta * xlogratio(t[k], m) + (1.0 - jsd_beta) * xlogratio(s[k], m);
      }
      break;
  }
  return d;
}

void divergence_logit_grad(std::span<const double> t, std::span<const double> s, Divergence kind,
                           double jsd_beta, std::span<double> out) {
  require_same_shape(t, s);
  require_same_shape(s, out);
  const std::size_t v = s.size();
  switch (kind) {
    case Divergence::kForwardKl:
      for (std::size_t k = 0; k < v; ++k) out[k] = std::exp(s[k]) - std::exp(t[k]);
      break;
    case Divergence::kReverseKl: {
      const double kl = divergence(t, s, Divergence::kReverseKl);
      for (std::size_t k = 0; k < v; ++k) {
        out[k] = s[k] == -INFINITY ? 0.0 : std::exp(s[k]) * (s[k] - t[k] - kl);
      }
      break;
    }
    case Divergence::kJsd: {
      // dD/ds_k = (1 - beta) log(s_k / m_k), then through the softmax Jacobian.
      double mean_g = 0.0;
      for (std::size_t k = 0; k < v; ++k) {
        if (s[k] == -INFINITY) {
          out[k] = 0.0;
          continue;
        }
        out[k] = (1.0 - jsd_beta) * (s[k] - log_mix(t[k], s[k], jsd_beta));
        mean_g += std::exp(s[k]) * out[k];
      }
      for (std::size_t k = 0; k < v; ++k) out[k] = std::exp(s[k]) * (out[k] - mean_g);
      break;
    }
  }
}

void check_normalized(const Matrix& log_dist, double tol) {
  for (std::size_t r = 0; r < log_dist.rows; ++r) {
    double z = 0.0;
    for (double v : log_dist.row(r)) z += std::exp(v);
    if (!(std::abs(z - 1.0) <= tol)) {
      throw ValidationError("distribution at position " + std::to_string(r) + " sums to " + std::to_string(z));
    }
  }
}

DivergenceResult opd_divergence_loss(const Matrix& teacher_log, const Matrix& student_log, Divergence kind,
                                     double jsd_beta) {
  if (teacher_log.rows != student_log.rows || teacher_log.cols != student_log.cols) {
    throw ShapeError("teacher and student distribution matrices differ in shape");
  }
  check_normalized(teacher_log);
  check_normalized(student_log);
  DivergenceResult res;
  res.dlogits = Matrix(student_log.rows, student_log.cols);
  const double inv = student_log.rows ? 1.0 / static_cast<double>(student_log.rows) : 0.0;
  for (std::size_t r = 0; r < student_log.rows; ++r) {
    const double d = divergence(teacher_log.row(r), student_log.row(r), kind, jsd_beta);
    res.per_position.push_back(d);
    res.value += d * inv;
    auto g = res.dlogits.row(r);
    divergence_logit_grad(teacher_log.row(r), student_log.row(r), kind, jsd_beta, g);
    for (double& x : g) x *= inv;
  }
  return res;
}

DivergenceResult kl_anchor_term(const Matrix& student_log, const Matrix& base_log, double beta) {
  if (!(beta >= 0.0)) {
    throw ConfigError("KL anchor beta must be non-negative");
  }
  // KL(S || B) is the reverse divergence with the base in the teacher slot.
  DivergenceResult res = opd_divergence_loss(base_log, student_log, Divergence::kReverseKl);
  res.value *= beta;
  for (double& x : res.dlogits.data) x *= beta;
  return res;
}

double kl_anchor_term(std::span<const double> per_position_kl, double beta) {
  if (!(beta >= 0.0)) {
    throw ConfigError("KL anchor beta must be non-negative");
  }
  if (per_position_kl.empty() || beta == 0.0) {
    return 0.0;
  }
  double s = 0.0;
  for (double v : per_position_kl) s += v;
  return beta * s / static_cast<double>(per_position_kl.size());
}

}  // namespace privdistill::objectives
