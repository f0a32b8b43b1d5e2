#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpis/data.hpp"

namespace jpis {

struct Metrics {
  double intent_accuracy = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  double overall_accuracy = 0.0;
  // Utterances whose predicted tag sequence equals the gold one verbatim.
  double sequence_accuracy = 0.0;
  std::size_t n_utterances = 0;

  bool operator==(const Metrics&) const = default;
};

struct MetricsReport {
  Metrics mean;
  std::vector<Metrics> per_seed;
  std::vector<std::uint64_t> seeds;
};

struct LabelledOutput {
  std::string intent;
  std::vector<std::string> tags;
};

struct SpanCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};
SpanCounts count_spans(const std::vector<std::string>& gold,
                       const std::vector<std::string>& predicted);

/// Slot F1 is micro-averaged over repaired spans; an utterance is overall
/// correct when its intent is right and its raw tag sequence equals gold.
Metrics score(const std::vector<data::CorpusRecord>& gold,
              const std::vector<LabelledOutput>& predicted);

/// Arithmetic mean field by field; n_utterances is taken from the first run.
Metrics mean_metrics(const std::vector<Metrics>& runs);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json report_to_json(const MetricsReport& r);

}  // namespace jpis
