#include "jpis/synth.hpp"

#include <array>
#include <map>
#include <random>
#include <string>

#include "jpis/errors.hpp"
#include "jpis/parameter.hpp"

namespace jpis::data {
namespace {

using Words = std::vector<std::string>;

const std::vector<Words> kCities = {
    {"hanoi"}, {"paris"}, {"tokyo"}, {"london"}, {"berlin"}, {"rome"}, {"seoul"},
    {"new", "york"}, {"san", "francisco"}, {"ho", "chi", "minh", "city"}};
const std::vector<Words> kDistricts = {
    {"downtown"}, {"old", "quarter"}, {"west", "lake"}, {"harbor", "front"},
    {"market", "square"}, {"china", "town"}, {"university", "district"}};
// Tagged city or district depending on the trip-scope context.
const std::vector<Words> kSharedPlaces = {
    {"springfield"}, {"riverside"}, {"fairview"}, {"georgetown"}, {"lake", "wood"}};
const std::vector<Words> kDates = {
    {"today"}, {"tomorrow"}, {"tonight"}, {"next", "monday"},
    {"this", "weekend"}, {"on", "friday"}, {"next", "week"}};
const std::vector<Words> kTitles = {
    {"blue", "sky"}, {"moon", "river"}, {"hero"}, {"silent", "night"},
    {"the", "long", "road"}, {"city", "of", "stars"}, {"yesterday", "once", "more"}};

enum Intent { kFlight, kTrain, kMusic, kVideo, kWeather, kRoute, kIntentCount };
const std::array<const char*, kIntentCount> kIntentNames = {
    "book_flight", "book_train", "play_music", "play_video", "query_weather",
    "query_route"};

// Indices into the UP / CA blocks of synth_manifest().
enum UpField { kTransportPref, kMediaPref, kServicePref, kDevice };
enum CaField { kTripScope, kMovement, kLocation, kTimePeriod };

class Builder {
 public:
  explicit Builder(Rng& rng) : rng_(rng) {}

  void words(std::initializer_list<const char*> ws) {
    for (const char* w : ws) push(w, "O");
  }
  void slot(const Words& value, const std::string& type) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      push(value[i], (i == 0 ? "B-" : "I-") + type);
    }
  }
  // A place slot. Under a shared scope the value is a place name that exists
  // at both scopes and the trip-scope context alone decides its type.
  void place(const std::vector<Words>& own, const std::string& type) {
    if (shared_scope_ < 0) {
      slot(pick(own), type);
    } else {
      slot(pick(kSharedPlaces), shared_scope_ == 0 ? "city" : "district");
    }
  }
  void share_scope(int scope) { shared_scope_ = scope; }
  void maybe_date() {
    if (coin()) slot(pick(kDates), "date");
  }
  const Words& pick(const std::vector<Words>& options) {
    return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng_)];
  }
  bool coin() { return std::bernoulli_distribution(0.5)(rng_); }
  std::size_t choose(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }

  CorpusRecord take(Intent intent) {
    CorpusRecord r;
    r.tokens = std::move(tokens_);
    r.tags = std::move(tags_);
    r.intent = kIntentNames[intent];
    tokens_.clear();
    tags_.clear();
    return r;
  }

 private:
  void push(std::string w, std::string tag) {
    tokens_.push_back(std::move(w));
    tags_.push_back(std::move(tag));
  }

  Rng& rng_;
  int shared_scope_ = -1;
  Words tokens_;
  Words tags_;
};

// Flat Dirichlet draw.
std::vector<double> random_distribution(std::size_t dim, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> v(dim);
  double total = 0.0;
  for (double& x : v) total += (x = expo(rng));
  for (double& x : v) x /= total;
  return v;
}

// Distribution whose mode is `peak` with mass in [0.8, 1.0).
std::vector<double> peaked_distribution(std::size_t dim, std::size_t peak, Rng& rng) {
  const double top = std::uniform_real_distribution<double>(0.6, 0.9)(rng);
  std::vector<double> rest = random_distribution(dim - 1, rng);
  std::vector<double> v(dim);
  for (std::size_t i = 0, k = 0; i < dim; ++i) {
    v[i] = i == peak ? top : (1.0 - top) * rest[k++];
  }
  return v;
}

ProfileSet random_profile(const ProfileManifest& manifest, Rng& rng) {
  ProfileSet p;
  for (std::size_t j = 0; j < manifest.m(); ++j) {
    p.up.push_back(random_distribution(manifest.user_field(j).dim, rng));
  }
  for (std::size_t j = 0; j < manifest.t(); ++j) {
    p.ca.push_back(random_distribution(manifest.context_field(j).dim, rng));
  }
  return p;
}

void unambiguous(Builder& b, Intent intent) {
  switch (intent) {
    case kFlight:
      switch (b.choose(3)) {
        case 0: b.words({"book", "a", "flight", "to"}); break;
        case 1: b.words({"fly", "to"}); break;
        default: b.words({"i", "need", "a", "plane", "ticket", "to"}); break;
      }
      b.place(kCities, "city");
      b.maybe_date();
      break;
    case kTrain:
      switch (b.choose(3)) {
        case 0: b.words({"book", "a", "train", "ticket", "to"}); break;
        case 1: b.words({"take", "the", "train", "to"}); break;
        default: b.words({"i", "need", "a", "rail", "pass", "to"}); break;
      }
      b.place(kCities, "city");
      b.maybe_date();
      break;
    case kMusic:
      switch (b.choose(3)) {
        case 0: b.words({"play", "the", "song"}); break;
        case 1: b.words({"listen", "to", "music"}); break;
        default: b.words({"put", "on", "the", "album"}); break;
      }
      b.slot(b.pick(kTitles), "title");
      break;
    case kVideo:
      switch (b.choose(3)) {
        case 0: b.words({"play", "the", "movie"}); break;
        case 1: b.words({"watch", "the", "video"}); break;
        default: b.words({"stream", "the", "film"}); break;
      }
      b.slot(b.pick(kTitles), "title");
      break;
    case kWeather:
      if (b.coin()) {
        b.words({"what", "is", "the", "weather", "in"});
      } else {
        b.words({"will", "it", "rain", "in"});
      }
      b.place(kCities, "city");
      b.maybe_date();
      break;
    case kRoute:
      switch (b.choose(3)) {
        case 0: b.words({"navigate", "to"}); break;
        case 1: b.words({"how", "do", "i", "get", "to"}); break;
        default: b.words({"show", "the", "route", "to"}); break;
      }
      b.place(kDistricts, "district");
      break;
    default:
      break;
  }
}

// One uniform draw u places a record on [0, 1). Intent ambiguity covers
// u < rate and slot ambiguity covers u >= 1 - rate, so the two only share
// records once rate exceeds 0.5. Keeping them apart matters: fusion is a
// single convex combination of profile columns, and an utterance needing both
// the preference and the trip-scope column trains far more slowly.
CorpusRecord generate_one(double ambiguity_rate, const ProfileManifest& manifest,
                          Rng& rng) {
  Builder b(rng);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const bool intent_ambiguous = u < ambiguity_rate;
  const bool slot_ambiguous = u >= 1.0 - ambiguity_rate;
  ProfileSet profile = random_profile(manifest, rng);
  if (slot_ambiguous) {
    const std::size_t scope = b.choose(2);
    profile.ca[kTripScope] = peaked_distribution(2, scope, rng);
    b.share_scope(static_cast<int>(scope));
  }

  Intent intent;
  if (!intent_ambiguous) {
    // Slot ambiguity needs a place slot, which the media intents lack.
    static constexpr std::array<Intent, 4> kPlaced = {kFlight, kTrain, kWeather, kRoute};
    intent = slot_ambiguous ? kPlaced[b.choose(kPlaced.size())]
                            : static_cast<Intent>(b.choose(kIntentCount));
    unambiguous(b, intent);
  } else {
    const std::size_t pair = b.choose(3);
    const std::size_t member = b.choose(2);
    intent = static_cast<Intent>(2 * pair + member);
    const UpField pref = pair == 0 ? kTransportPref : pair == 1 ? kMediaPref : kServicePref;
    profile.up[pref] = peaked_distribution(2, member, rng);
    if (pair == 1) {
      b.words({"play"});
      b.slot(b.pick(kTitles), "title");
    } else {
      if (pair == 0) {
        b.words({"book", "a", "ticket", "to"});
      } else {
        b.words({"how", "about"});
      }
      b.place(kCities, "city");
      b.maybe_date();
    }
  }
  CorpusRecord r = b.take(intent);
  r.profile = std::move(profile);
  return r;
}

nlohmann::json label_counts(const std::vector<CorpusRecord>& records) {
  std::map<std::string, std::size_t> intents, slots;
  for (const auto& r : records) {
    ++intents[r.intent];
    for (const auto& s : bio_decode_spans(r.tags)) ++slots[s.type];
  }
  return {{"records", records.size()}, {"intents", intents}, {"slot_types", slots}};
}

}  // namespace

ProfileManifest synth_manifest() {
  using encoder::ProfileKind;
  ProfileManifest m;
  m.fields = {
      {ProfileKind::UserProfile, "transport_pref", 2, true},
      {ProfileKind::UserProfile, "media_pref", 2, true},
      {ProfileKind::UserProfile, "service_pref", 2, true},
      {ProfileKind::UserProfile, "device", 3, true},
      {ProfileKind::ContextAwareness, "trip_scope", 2, true},
      {ProfileKind::ContextAwareness, "movement", 4, true},
      {ProfileKind::ContextAwareness, "location", 3, true},
      {ProfileKind::ContextAwareness, "time_period", 4, true},
  };
  return m;
}

SynthCorpus synth_generate(std::uint64_t seed, std::size_t size, double ambiguity_rate) {
  if (!(ambiguity_rate >= 0.0 && ambiguity_rate <= 1.0)) {
    throw ValidationError("synth: ambiguity_rate must lie in [0, 1]");
  }
  SynthCorpus corpus;
  corpus.manifest = synth_manifest();
  Rng rng(seed);
  auto split = [&](std::size_t n) {
    std::vector<CorpusRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(generate_one(ambiguity_rate, corpus.manifest, rng));
    }
    return out;
  };
  corpus.train = split(size);
  corpus.valid = split(size / 8);
  corpus.test = split(size / 8);

  const nlohmann::json train_counts = label_counts(corpus.train);
  for (const char* kind : {"intents", "slot_types"}) {
    const std::size_t expected = kind == std::string("intents") ? 6 : 4;
    const auto& counts = train_counts.at(kind);
    bool covered = counts.size() == expected;
    for (const auto& [label, n] : counts.items()) covered = covered && n.get<std::size_t>() >= 20;
    if (!covered) {
      throw ValidationError("synth: size " + std::to_string(size) +
                            " too small; every intent and slot type needs >= 20 "
                            "training occurrences");
    }
  }
  corpus.metadata = {{"seed", seed},
                     {"size", size},
                     {"ambiguity_rate", ambiguity_rate},
                     {"train", train_counts},
                     {"valid", label_counts(corpus.valid)},
                     {"test", label_counts(corpus.test)}};
  return corpus;
}

}  // namespace jpis::data
