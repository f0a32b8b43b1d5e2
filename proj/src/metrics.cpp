#include "jpis/metrics.hpp"

#include <algorithm>

#include "jpis/errors.hpp"

namespace jpis {

SpanCounts count_spans(const std::vector<std::string>& gold,
                       const std::vector<std::string>& predicted) {
  const data::SpanSet g = data::bio_decode_spans(gold);
  const data::SpanSet p = data::bio_decode_spans(predicted);
  SpanCounts c;
  c.gold = g.size();
  c.predicted = p.size();
  for (const auto& s : p) c.matched += g.count(s);
  return c;
}

Metrics score(const std::vector<data::CorpusRecord>& gold,
              const std::vector<LabelledOutput>& predicted) {
  if (gold.size() != predicted.size()) {
    throw ValidationError("score: " + std::to_string(gold.size()) + " gold records but " +
                          std::to_string(predicted.size()) + " predictions");
  }
  Metrics m;
  m.n_utterances = gold.size();
  if (gold.empty()) return m;

  std::size_t intent_ok = 0, seq_ok = 0, overall_ok = 0;
  SpanCounts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool intent = gold[i].intent == predicted[i].intent;
    const bool seq = gold[i].tags == predicted[i].tags;
    intent_ok += intent;
    seq_ok += seq;
    overall_ok += intent && seq;
    const SpanCounts c = count_spans(gold[i].tags, predicted[i].tags);
    total.matched += c.matched;
    total.predicted += c.predicted;
    total.gold += c.gold;
  }
  const double n = static_cast<double>(gold.size());
  m.intent_accuracy = intent_ok / n;
  m.sequence_accuracy = seq_ok / n;
  m.overall_accuracy = overall_ok / n;
  m.slot_precision = total.predicted ? double(total.matched) / total.predicted : 0.0;
  m.slot_recall = total.gold ? double(total.matched) / total.gold : 0.0;
  const double pr = m.slot_precision + m.slot_recall;
  m.slot_f1 = pr > 0.0 ? 2.0 * m.slot_precision * m.slot_recall / pr : 0.0;
  return m;
}

namespace {
// Summed in sorted order so the mean does not depend on run order.
double order_free_mean(const std::vector<Metrics>& runs, double Metrics::*field) {
  std::vector<double> v;
  v.reserve(runs.size());
  for (const auto& r : runs) v.push_back(r.*field);
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}
}  // namespace

Metrics mean_metrics(const std::vector<Metrics>& runs) {
  Metrics m;
  if (runs.empty()) return m;
  for (auto field : {&Metrics::intent_accuracy, &Metrics::slot_precision, &Metrics::slot_recall,
                     &Metrics::slot_f1, &Metrics::overall_accuracy, &Metrics::sequence_accuracy}) {
    m.*field = order_free_mean(runs, field);
  }
  m.n_utterances = runs.front().n_utterances;
  return m;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"intent_accuracy", m.intent_accuracy}, {"slot_precision", m.slot_precision},
          {"slot_recall", m.slot_recall},         {"slot_f1", m.slot_f1},
          {"overall_accuracy", m.overall_accuracy},
          {"sequence_accuracy", m.sequence_accuracy},
          {"n_utterances", m.n_utterances}};
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j = metrics_to_json(r.mean);
  j["per_seed"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
    nlohmann::json s = metrics_to_json(r.per_seed[i]);
    if (i < r.seeds.size()) s["seed"] = r.seeds[i];
    j["per_seed"].push_back(std::move(s));
  }
  return j;
}

}  // namespace jpis
