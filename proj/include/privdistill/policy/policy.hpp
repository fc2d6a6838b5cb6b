#pragma once

#include <memory>
#include <span>
#include <vector>

#include "privdistill/common/matrix.hpp"
#include "privdistill/policy/network.hpp"
#include "privdistill/policy/params.hpp"
#include "privdistill/policy/tokens.hpp"
#include "privdistill/policy/vocabulary.hpp"

namespace privdistill::policy {

// In-place log-softmax of every row.
void log_softmax_rows(Matrix& m);
// log(sum(exp(row))), computed stably.
double log_sum_exp(std::span<const double> row);

// A scored (prefix, response) pair: full log-distributions at every response
// position plus the forward cache needed for a backward pass.
struct ScoredSequence {
  ForwardPass pass;
  Matrix log_dist;                 // response.size() x vocab
  std::vector<double> token_logp;  // log-prob of each response token
  TokenSequence response;
};

// Autoregressive policy over a fixed vocabulary. The object holds only the
// architecture; parameter vectors are passed per call, so one Policy serves the
// student, the privileged teacher and the frozen base. All methods are const and
// safe to call concurrently.
class Policy {
 public:
  Policy(Vocabulary vocab, Architecture arch);

  const Vocabulary& vocab() const { return vocab_; }
  const Architecture& arch() const { return arch_; }
  const Network& network() const { return *network_; }

  // [BOS] + prompt with the privileged tokens spliced in per attachment mode:
  //   system:      [BOS] priv [SEP] prompt
  //   user-prefix: [BOS] prompt[0] priv [SEP] prompt[1:]
  // Empty privileged tokens add nothing.
  TokenSequence build_prefix(const TokenSequence& prompt, const ContextAttachment& attachment) const;

  // Next-token log-distribution after `context` (which should start with BOS).
  std::vector<double> log_prob_next(const PolicyParams& params, const TokenSequence& context) const;

  // log pi(response_t | prefix, response_<t) for each t.
  std::vector<double> log_prob_sequence(const PolicyParams& params, const TokenSequence& prompt,
                                        const ContextAttachment& attachment,
                                        const TokenSequence& response) const;

  // Gradient of sum_t weights_t * log pi(response_t | ...). Weights are constants.
  std::vector<double> grad_weighted_logprob(const PolicyParams& params, const TokenSequence& prompt,
                                            const ContextAttachment& attachment,
                                            const TokenSequence& response,
                                            std::span<const double> weights) const;

  // Lower-level scoring used by rollouts and updates. Requires a non-empty response.
  ScoredSequence score(const PolicyParams& params, const TokenSequence& prefix,
                       const TokenSequence& response) const;
  // Accumulates d(sum dlogits * logits)/d(params) into grad.
  void backward(const PolicyParams& params, const ScoredSequence& scored, const Matrix& dlogits,
                std::span<double> grad) const;

  void check_params(const PolicyParams& params) const;

 private:
  Vocabulary vocab_;
  Architecture arch_;
  std::shared_ptr<const Network> network_;
};

}  // namespace privdistill::policy
