#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "jpis/data.hpp"
#include "jpis/errors.hpp"
#include "jpis/proslu.hpp"
#include "jpis/synth.hpp"
#include "oracles.hpp"

using namespace jpis;
using namespace jpis::data;
namespace fs = std::filesystem;

namespace {

using Tags = std::vector<std::string>;

SpanSet from_reference(const std::vector<oracle::RefSpan>& ref) {
  SpanSet out;
  for (const auto& s : ref) out.insert({s.start, s.end, s.type});
  return out;
}

ProfileManifest tiny_manifest() {
  ProfileManifest m;
  m.fields = {{encoder::ProfileKind::UserProfile, "u", 2, true},
              {encoder::ProfileKind::ContextAwareness, "c", 1, false}};
  return m;
}

CorpusRecord tiny_record(Tags tokens, std::string intent, Tags tags) {
  return {std::move(tokens), std::move(intent), std::move(tags), {{{0.25, 0.75}}, {{3.5}}}};
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("jpis_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string joined(const Tags& t) {
  std::string s;
  for (const auto& w : t) s += w + " ";
  return s;
}

}  // namespace

TEST_CASE("BIO decoding examples") {
  CHECK(bio_decode_spans(Tags{"O", "B-X", "I-X", "O"}) == SpanSet{{1, 2, "X"}});
  CHECK(bio_decode_spans(Tags{"I-X", "I-X"}) == SpanSet{{0, 1, "X"}});
  CHECK(bio_decode_spans(Tags{"B-X", "I-Y"}) == SpanSet{{0, 0, "X"}, {1, 1, "Y"}});
  CHECK(bio_decode_spans(Tags{"O", "O"}).empty());
  CHECK(bio_decode_spans(Tags{"B-X", "B-X"}) == SpanSet{{0, 0, "X"}, {1, 1, "X"}});
  CHECK_THROWS_AS(bio_decode_spans(Tags{"O", "Q-X"}), ValidationError);
  CHECK_THROWS_AS(bio_decode_spans(Tags{"B-"}), ValidationError);
  CHECK_THROWS_AS(parse_tag("b-X"), ValidationError);
  CHECK(parse_tag("I-city").type == "city");
}

TEST_CASE("BIO decoding matches the reference chunker on every short sequence") {
  const Tags alphabet{"O", "B-X", "I-X", "B-Y", "I-Y"};
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      Tags tags;
      for (std::size_t i : idx) tags.push_back(alphabet[i]);
      CHECK_MESSAGE(bio_decode_spans(tags) == from_reference(oracle::conlleval_chunks(tags)),
                    joined(tags));
      int pos = static_cast<int>(n) - 1;
      while (pos >= 0 && ++idx[pos] == alphabet.size()) idx[pos--] = 0;
      if (pos < 0) break;
    }
  }
}

TEST_CASE("span encoding round trip") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 9;
    SpanSet spans;
    for (std::size_t i = 0; i < n;) {
      const std::size_t skip = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
      i += skip;
      if (i >= n) break;
      const std::size_t len = std::uniform_int_distribution<std::size_t>(1, n - i)(rng);
      spans.insert({static_cast<int>(i), static_cast<int>(i + len - 1), trial % 2 ? "a" : "b"});
      i += len;
    }
    const Tags bio = spans_to_bio(spans, n);
    CHECK(bio.size() == n);
    CHECK(bio_decode_spans(bio) == spans);
  }
  CHECK_THROWS(spans_to_bio(SpanSet{{0, 2, "a"}, {2, 3, "b"}}, 5));
  CHECK_THROWS(spans_to_bio(SpanSet{{0, 5, "a"}}, 5));
}

TEST_CASE("vocabularies") {
  const std::vector<CorpusRecord> records{
      tiny_record({"fly", "to", "hanoi"}, "B", {"O", "O", "B-X"}),
      tiny_record({"to", "paris"}, "A", {"O", "B-X"})};
  const Vocabularies v = build_vocab(records);
  CHECK(v.labels.intents() == Tags{"A", "B"});
  CHECK(v.labels.tags() == Tags{"O", "B-X", "I-X"});
  CHECK(v.labels.n_tags() == 2 * v.labels.n_slot_types() + 1);
  CHECK(v.tokens.token(TokenVocabulary::kPad) == "<pad>");
  CHECK(v.tokens.token(TokenVocabulary::kUnk) == "<unk>");
  CHECK(v.tokens.size() == 6);
  CHECK(v.tokens.id("zzz") == TokenVocabulary::kUnk);
  CHECK(v.tokens.id("fly") < v.tokens.id("to"));
  CHECK_FALSE(v.labels.intent_id("C").has_value());
  CHECK(v.labels.intent_id("B") == 1);
  CHECK(v.labels.tag_id("I-X") == 2);

  // Rebuilding from a reordered list gives the same vocabularies.
  const Vocabularies w = build_vocab({records[1], records[0]});
  CHECK(w.tokens.tokens() == v.tokens.tokens());
  CHECK(w.labels == v.labels);

  LabelVocabulary two({"i"}, {"b", "a"});
  CHECK(two.tags() == Tags{"O", "B-b", "I-b", "B-a", "I-a"});
}

TEST_CASE("corpus parsing reports the failing line") {
  const ProfileManifest m = tiny_manifest();
  const std::string good =
      R"({"tokens":["a","b"],"intent":"x","tags":["O","B-s"],"up":[[0.5,0.5]],"ca":[[2.0]]})";
  auto parse = [&](const std::string& text) {
    std::istringstream in(text);
    return parse_corpus(in, m, "corpus.jsonl");
  };
  CHECK(parse("").empty());
  CHECK(parse(good + "\n" + good + "\n").size() == 2);

  const std::string mismatch =
      R"({"tokens":["a"],"intent":"x","tags":["O","B-s"],"up":[[0.5,0.5]],"ca":[[2.0]]})";
  CHECK_THROWS_WITH_AS(parse(good + "\n" + mismatch), doctest::Contains("corpus.jsonl:2"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse("{not json"), doctest::Contains("corpus.jsonl:1"), ValidationError);
  const std::string wrong_dim =
      R"({"tokens":["a"],"intent":"x","tags":["O"],"up":[[0.5,0.3,0.2]],"ca":[[2.0]]})";
  CHECK_THROWS_WITH_AS(parse(wrong_dim), doctest::Contains(":1"), ValidationError);
  const std::string extra_field =
      R"({"tokens":["a"],"intent":"x","tags":["O"],"up":[[0.5,0.5]],"ca":[[2.0],[1.0]]})";
  CHECK_THROWS_AS(parse(extra_field), ValidationError);
  const std::string empty =
      R"({"tokens":[],"intent":"x","tags":[],"up":[[0.5,0.5]],"ca":[[2.0]]})";
  CHECK_THROWS_AS(parse(empty), ValidationError);
  const std::string bad_tag =
      R"({"tokens":["a"],"intent":"x","tags":["S-s"],"up":[[0.5,0.5]],"ca":[[2.0]]})";
  CHECK_THROWS_AS(parse(bad_tag), ValidationError);
}

TEST_CASE("save then load is the identity") {
  const fs::path dir = scratch_dir("roundtrip");
  const SynthCorpus c = synth_generate(3, 400, 0.5);
  save_corpus(dir / "train.jsonl", c.train);
  CHECK(load_corpus(dir / "train.jsonl", c.manifest) == c.train);
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl", c.manifest), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic corpus generation") {
  SUBCASE("deterministic per seed") {
    const SynthCorpus a = synth_generate(7, 400, 0.5), b = synth_generate(7, 400, 0.5);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    CHECK(a.metadata == b.metadata);
    CHECK_FALSE(synth_generate(8, 400, 0.5).train == a.train);
  }
  SUBCASE("split sizes, label coverage and metadata") {
    const SynthCorpus c = synth_generate(7, 2000, 0.5);
    CHECK(c.train.size() == 2000);
    CHECK(c.valid.size() == 250);
    CHECK(c.test.size() == 250);
    const Vocabularies v = build_vocab(c.train);
    CHECK(v.labels.n_intents() >= 4);
    CHECK(v.labels.n_slot_types() >= 4);
    for (const auto& [intent, n] : c.metadata["train"]["intents"].items()) CHECK(n.get<int>() >= 20);
    for (const auto& [slot, n] : c.metadata["train"]["slot_types"].items()) CHECK(n.get<int>() >= 20);
    CHECK(c.metadata["train"]["intents"].size() == v.labels.n_intents());
    for (const auto* split : {&c.train, &c.valid, &c.test})
      for (const auto& r : *split) CHECK_NOTHROW(validate_record(r, c.manifest));
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(synth_generate(1, 100, 1.5), ValidationError);
    CHECK_THROWS_AS(synth_generate(1, 100, -0.1), ValidationError);
    CHECK_THROWS_AS(synth_generate(1, 10, 0.5), ValidationError);
  }
}

namespace {

// Which field and which label each ambiguous template is about. The
// preference field peaks on the first intent of the pair at index 0.
struct PairInfo {
  std::size_t up_field;
  std::string first, second;
};

std::optional<PairInfo> ambiguous_pair(const CorpusRecord& r) {
  const std::string t = joined(r.tokens);
  if (t.rfind("book a ticket to ", 0) == 0) return PairInfo{0, "book_flight", "book_train"};
  if (r.tokens[0] == "play" && r.tags.size() >= 2 && r.tags[1] == "B-title")
    return PairInfo{1, "play_music", "play_video"};
  if (t.rfind("how about ", 0) == 0) return PairInfo{2, "query_weather", "query_route"};
  return std::nullopt;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Best accuracy of any predictor that sees only the tokens: for each distinct
// token sequence take the majority label.
template <class Label>
double text_only_ceiling(const std::vector<CorpusRecord>& records, Label label) {
  std::map<Tags, std::map<std::string, int>> counts;
  for (const auto& r : records) ++counts[r.tokens][label(r)];
  int best = 0;
  for (const auto& [tokens, by_label] : counts) {
    int top = 0;
    for (const auto& [l, n] : by_label) top = std::max(top, n);
    best += top;
  }
  return static_cast<double>(best) / static_cast<double>(records.size());
}

}  // namespace

TEST_CASE("synthetic construction bounds") {
  auto intent_of = [](const CorpusRecord& r) { return r.intent; };
  auto labels_of = [](const CorpusRecord& r) { return r.intent + "|" + joined(r.tags); };

  SUBCASE("rate 0: the text determines every label") {
    const SynthCorpus c = synth_generate(11, 3000, 0.0);
    CHECK(text_only_ceiling(c.train, labels_of) == 1.0);
    for (const auto& r : c.train) CHECK_FALSE(ambiguous_pair(r).has_value());
  }
  SUBCASE("rate 1: every utterance fits exactly two intents, the profile decides") {
    const SynthCorpus c = synth_generate(11, 3000, 1.0);
    std::map<Tags, std::set<std::string>> intents_per_text;
    for (const auto& r : c.train) {
      const auto pair = ambiguous_pair(r);
      REQUIRE(pair.has_value());
      CHECK((r.intent == pair->first || r.intent == pair->second));
      intents_per_text[r.tokens].insert(r.intent);
      // Reading the matching preference field recovers the gold intent.
      const std::size_t peak = argmax(r.profile.up[pair->up_field]);
      CHECK(r.intent == (peak == 0 ? pair->first : pair->second));
    }
    for (const auto& [tokens, intents] : intents_per_text) CHECK(intents.size() <= 2);
    // Without the profile no rule beats a coin flip by more than sampling noise.
    const double ceiling = text_only_ceiling(c.train, intent_of);
    CHECK(ceiling > 0.5);
    CHECK(ceiling < 0.62);
  }
  SUBCASE("trip scope decides shared place names") {
    for (double rate : {0.5, 1.0}) {
      const SynthCorpus c = synth_generate(12, 3000, rate);
      std::size_t shared = 0;
      for (const auto& r : c.train) {
        for (const auto& s : bio_decode_spans(r.tags)) {
          if (s.type != "city" && s.type != "district") continue;
          const std::string name = r.tokens[s.start];
          if (name != "springfield" && name != "riverside" && name != "fairview" &&
              name != "georgetown" && name != "lake")
            continue;
          ++shared;
          CHECK(s.type == (argmax(r.profile.ca[0]) == 0 ? "city" : "district"));
        }
      }
      CHECK(shared > 500);
    }
  }
  SUBCASE("rate 0.5: about half the utterances are intent-ambiguous") {
    const SynthCorpus c = synth_generate(13, 4000, 0.5);
    std::size_t ambiguous = 0;
    for (const auto& r : c.train) ambiguous += ambiguous_pair(r).has_value();
    const double frac = static_cast<double>(ambiguous) / 4000.0;
    CHECK(frac > 0.46);
    CHECK(frac < 0.54);
    const double ceiling = text_only_ceiling(c.train, intent_of);
    CHECK(ceiling < 0.80);
  }
}

TEST_CASE("ProSLU conversion") {
  CHECK(split_code_points("订 一张 票") == Tags{"订", "一", "张", "票"});
  CHECK(split_code_points("ab") == Tags{"a", "b"});

  const nlohmann::ordered_json native = {
      {"文本", "订票"},
      {"序列标注", "O O"},
      {"意图", "book"},
      {"用户画像", {{"pref", {0.3, 0.7}}, {"age", {1.0}}}},
      {"上下文信息", {{"move", {0.1, 0.9}}}}};
  const CorpusRecord r = convert_proslu_record(native);
  CHECK(r.tokens == Tags{"订", "票"});
  CHECK(r.tags == Tags{"O", "O"});
  CHECK(r.intent == "book");
  CHECK(r.profile.up.size() == 2);
  CHECK(r.profile.ca[0] == std::vector<double>{0.1, 0.9});
  CHECK_THROWS_AS(convert_proslu_record(nlohmann::ordered_json{{"tokens", {"a"}}}), ValidationError);

  const fs::path dir = scratch_dir("proslu");
  const nlohmann::ordered_json a = {{"tokens", {"a", "b"}}, {"tags", {"O", "B-x"}}, {"intent", "i"},
                            {"up", {{"pref", {0.5, 0.5}}, {"age", {3.0}}}},
                            {"ca", {{"move", {0.2, 0.8}}}}};
  std::ofstream(dir / "train.json") << nlohmann::ordered_json::array({a, a}).dump();
  std::ofstream(dir / "dev.json") << nlohmann::ordered_json{{"u1", a}}.dump();
  std::ofstream(dir / "test.json") << a.dump() << "\n" << a.dump() << "\n";
  const ConvertedCorpus c = convert_proslu(dir);
  CHECK(c.train.size() == 2);
  CHECK(c.valid.size() == 1);
  CHECK(c.test.size() == 2);
  REQUIRE(c.manifest.fields.size() == 3);
  CHECK(c.manifest.fields[0].name == "pref");
  CHECK(c.manifest.fields[0].distribution);
  CHECK_FALSE(c.manifest.fields[1].distribution);
  CHECK(c.manifest.m() == 2);
  CHECK(c.manifest.t() == 1);
  fs::remove_all(dir);
}
