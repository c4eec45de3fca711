#include "fashionrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "fashionrec/error.hpp"

namespace fashionrec {

namespace {

void require_text(const std::string& s, const char* what) {
  if (s.empty()) throw Error(ErrorCode::kInput, std::string(what) + " is empty");
}

}  // namespace

double sbert_similarity(const std::string& generated, const std::string& ground_truth,
                        const Embedder& text_embedder) {
  require_text(generated, "generated text");
  require_text(ground_truth, "ground-truth text");
  return 100.0 * cosine(text_embedder.embed_text(generated), text_embedder.embed_text(ground_truth));
}

double cts(const std::string& generated_text, const std::string& gt_image_ref, const Embedder& embedder) {
  require_text(generated_text, "generated text");
  require_text(gt_image_ref, "ground-truth image reference");
  return 100.0 * cosine(embedder.embed_text(generated_text), embedder.embed_image(gt_image_ref));
}

double cis(const std::string& generated_image_ref, const std::string& gt_image_ref, const Embedder& embedder) {
  require_text(generated_image_ref, "generated image reference");
  require_text(gt_image_ref, "ground-truth image reference");
  return 100.0 * cosine(embedder.embed_image(generated_image_ref), embedder.embed_image(gt_image_ref));
}

double personalization(const std::string& generated_image_ref, const std::vector<std::string>& history_image_refs,
                       const Embedder& embedder) {
  require_text(generated_image_ref, "generated image reference");
  if (history_image_refs.empty()) throw Error(ErrorCode::kInput, "personalization needs at least one history image");
  std::vector<double> mean(embedder.dim(), 0.0);
  for (const auto& ref : history_image_refs) {
    const auto e = embedder.embed_image(ref);
    if (e.dim() != mean.size()) throw Error(ErrorCode::kDimensionMismatch, "history embedding dim mismatch");
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += e[d];
  }
  for (auto& v : mean) v /= static_cast<double>(history_image_refs.size());
  return 100.0 * cosine(EmbeddingVector(std::move(mean)), embedder.embed_image(generated_image_ref));
}

EvalPair EvalPair::from_json(const Json& row) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    auto it = row.find(key);
    if (it == row.end() || !it->is_string() || it->get<std::string>().empty()) return std::nullopt;
    return it->get<std::string>();
  };
  EvalPair p;
  p.id = row.value("id", std::string());
  p.generated_text = opt("gen_text");
  p.gt_text = opt("gt_text");
  p.generated_image_ref = opt("gen_image");
  p.gt_image_ref = opt("gt_image");
  if (auto it = row.find("history_images"); it != row.end() && it->is_array()) {
    p.history_image_refs = it->get<std::vector<std::string>>();
  }
  return p;
}

namespace {

MetricValue summarize(std::vector<double> values) {
  MetricValue v;
  v.n = values.size();
  if (values.empty()) return v;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double x : values) sum += x;
  v.mean = std::clamp(sum / static_cast<double>(values.size()), -100.0, 100.0);
  return v;
}

Json metric_json(const MetricValue& m) {
  return Json{{"mean", m.mean ? Json(*m.mean) : Json(nullptr)}, {"n", m.n}};
}

}  // namespace

Json MetricReport::to_json() const {
  return Json{{"pairs", pairs},
              {"sbert", metric_json(sbert)},
              {"cts", metric_json(cts)},
              {"cis", metric_json(cis)},
              {"per", metric_json(per)}};
}

std::string MetricReport::to_table() const {
  std::string out = "metric        mean      n\n";
  auto line = [&](const char* name, const MetricValue& m) {
    char buf[64];
    if (m.mean) {
      std::snprintf(buf, sizeof(buf), "%-8s %9.2f %6zu\n", name, *m.mean, m.n);
    } else {
      std::snprintf(buf, sizeof(buf), "%-8s %9s %6zu\n", name, "-", m.n);
    }
    out += buf;
  };
  line("S-BERT", sbert);
  line("CTS", cts);
  line("CIS", cis);
  line("Per.", per);
  return out;
}

MetricReport evaluate_run(const std::vector<EvalPair>& pairs, const Embedder& text_embedder,
                          const Embedder& embedder) {
  std::vector<double> sbert_v, cts_v, cis_v, per_v;
  auto attempt = [](std::vector<double>& sink, const char* metric, const std::string& id, auto&& fn) {
    try {
      sink.push_back(fn());
    } catch (const Error& e) {
      spdlog::warn("{}: skipping pair {} ({})", metric, id, e.what());
    }
  };
  for (const auto& p : pairs) {
    if (p.generated_text && p.gt_text) {
      attempt(sbert_v, "sbert", p.id, [&] { return sbert_similarity(*p.generated_text, *p.gt_text, text_embedder); });
    }
    if (p.generated_text && p.gt_image_ref) {
      attempt(cts_v, "cts", p.id, [&] { return fashionrec::cts(*p.generated_text, *p.gt_image_ref, embedder); });
    }
    if (p.generated_image_ref && p.gt_image_ref) {
      attempt(cis_v, "cis", p.id, [&] { return fashionrec::cis(*p.generated_image_ref, *p.gt_image_ref, embedder); });
    }
    if (p.generated_image_ref && !p.history_image_refs.empty()) {
      attempt(per_v, "per", p.id,
              [&] { return personalization(*p.generated_image_ref, p.history_image_refs, embedder); });
    }
  }
  MetricReport report;
  report.pairs = pairs.size();
  report.sbert = summarize(std::move(sbert_v));
  report.cts = summarize(std::move(cts_v));
  report.cis = summarize(std::move(cis_v));
  report.per = summarize(std::move(per_v));
  return report;
}

LogitTable::LogitTable(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) return;
  const std::size_t v = rows_.front().size();
  if (v == 0) throw Error(ErrorCode::kInput, "logit table has an empty vocabulary");
  for (const auto& row : rows_) {
    if (row.size() != v) throw Error(ErrorCode::kInput, "logit rows differ in vocabulary size");
    for (double x : row) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kInput, "logit table has a non-finite entry");
    }
  }
}

double LogitTable::log_prob(std::size_t t, std::size_t token) const {
  if (t >= rows_.size()) throw Error(ErrorCode::kOutOfRange, "logit step " + std::to_string(t) + " out of range");
  const auto& row = rows_[t];
  if (token >= row.size()) {
    throw Error(ErrorCode::kOutOfRange, "token id " + std::to_string(token) + " outside vocabulary");
  }
  const double max = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double x : row) sum += std::exp(x - max);
  return row[token] - max - std::log(sum);
}

double mmr_loss(const LogitTable& logits, std::span<const std::size_t> response_tokens, std::size_t response_start) {
  if (response_start + response_tokens.size() > logits.steps()) {
    throw Error(ErrorCode::kOutOfRange, "logit table does not cover every response position");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < response_tokens.size(); ++i) {
    loss -= logits.log_prob(response_start + i, response_tokens[i]);
  }
  return loss;
}

double t2i_loss(const LogitTable& logits, const MaskSpec& mask) {
  if (mask.length > logits.steps()) throw Error(ErrorCode::kOutOfRange, "logit table shorter than the sequence");
  if (mask.masked.empty()) {
    spdlog::warn("t2i_loss: empty mask set, loss defined as 0");
    return 0.0;
  }
  std::vector<bool> seen(mask.length, false);
  double loss = 0.0;
  for (const auto& [position, token] : mask.masked) {
    if (position < mask.length && seen[position]) {
      throw Error(ErrorCode::kInput, "masked position " + std::to_string(position) + " listed twice");
    }
    if (position < mask.length) seen[position] = true;
    if (position >= mask.length) {
      throw Error(ErrorCode::kOutOfRange, "masked position " + std::to_string(position) + " outside sequence");
    }
    loss -= logits.log_prob(position, token);
  }
  return loss;
}

}  // namespace fashionrec
