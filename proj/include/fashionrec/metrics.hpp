#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fashionrec/embedding.hpp"
#include "fashionrec/jsonl.hpp"

namespace fashionrec {

// Sentence similarity of generated vs ground-truth text, x100.
double sbert_similarity(const std::string& generated, const std::string& ground_truth,
                        const Embedder& text_embedder);

// Generated text vs ground-truth image, x100.
double cts(const std::string& generated_text, const std::string& gt_image_ref, const Embedder& embedder);

// Generated image vs ground-truth image, x100.
double cis(const std::string& generated_image_ref, const std::string& gt_image_ref, const Embedder& embedder);

// Generated image vs the unweighted mean of the history image embeddings, x100.
// Throws kInput on empty history and kZeroNorm when the mean cancels out.
double personalization(const std::string& generated_image_ref, const std::vector<std::string>& history_image_refs,
                       const Embedder& embedder);

struct EvalPair {
  std::string id;
  std::optional<std::string> generated_text;
  std::optional<std::string> gt_text;
  std::optional<std::string> generated_image_ref;
  std::optional<std::string> gt_image_ref;
  std::vector<std::string> history_image_refs;

  static EvalPair from_json(const Json& row);
};

struct MetricValue {
  std::optional<double> mean;  // absent when no pair carried the operands
  std::size_t n = 0;
};

struct MetricReport {
  MetricValue sbert, cts, cis, per;
  std::size_t pairs = 0;

  Json to_json() const;
  std::string to_table() const;
};

// Per-metric means over the pairs that carry that metric's operands. Values
// are summed in sorted order, so the report does not depend on pair order.
MetricReport evaluate_run(const std::vector<EvalPair>& pairs, const Embedder& text_embedder,
                          const Embedder& embedder);

// Row t holds the unnormalized log-scores the model emitted for sequence
// position t; every row has the same vocabulary size.
class LogitTable {
 public:
  LogitTable() = default;
  explicit LogitTable(std::vector<std::vector<double>> rows);

  std::size_t steps() const { return rows_.size(); }
  std::size_t vocab() const { return rows_.empty() ? 0 : rows_.front().size(); }
  std::span<const double> row(std::size_t t) const { return rows_.at(t); }

  // log softmax(row t)[token], via log-sum-exp.
  double log_prob(std::size_t t, std::size_t token) const;

 private:
  std::vector<std::vector<double>> rows_;
};

// -sum of log-probabilities of the response tokens. Token i of the response
// sits at position response_start + i. Prompt positions contribute nothing.
double mmr_loss(const LogitTable& logits, std::span<const std::size_t> response_tokens,
                std::size_t response_start);

struct MaskSpec {
  std::size_t length = 0;  // M
  // Masked position (0-based, < length) -> original token id.
  std::vector<std::pair<std::size_t, std::size_t>> masked;
};

// -sum over masked positions of log P(original token). Empty mask gives 0 and
// logs a warning.
double t2i_loss(const LogitTable& logits, const MaskSpec& mask);

}  // namespace fashionrec
