#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpis/data.hpp"

namespace jpis::data {

/// Template-grammar corpus with profile-dependent ambiguity.
///
/// Six intents in three confusable pairs (flight/train booking, music/video
/// playback, weather/route queries) and four slot types (city, date,
/// district, title). An `ambiguity_rate` fraction of utterances use a
/// template shared by both intents of a pair; the gold intent is drawn
/// uniformly from the pair and the matching UP preference distribution
/// peaks on it. Another `ambiguity_rate` fraction, disjoint from the first
/// while the rate is at most 0.5, carries a place name that is tagged city
/// or district depending on the peak of the CA trip-scope distribution.
/// Everything else is determined by the text; profile fields that carry no
/// signal are random distributions.
struct SynthCorpus {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> valid;
  std::vector<CorpusRecord> test;
  ProfileManifest manifest;
  /// Generation parameters and per-split label counts.
  nlohmann::json metadata;
};

/// Four UP fields then four CA fields, all flagged as distributions.
ProfileManifest synth_manifest();

/// `size` training records plus size/8 validation and size/8 test records.
/// Rejects ambiguity_rate outside [0, 1] and sizes for which some intent or
/// slot type occurs fewer than 20 times in the training split.
SynthCorpus synth_generate(std::uint64_t seed, std::size_t size, double ambiguity_rate);

}  // namespace jpis::data
