#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "jpis/config.hpp"
#include "jpis/errors.hpp"
#include "jpis/metrics.hpp"
#include "jpis/synth.hpp"
#include "jpis/train.hpp"
#include "oracles.hpp"

using namespace jpis;
namespace fs = std::filesystem;

namespace {

using Tags = std::vector<std::string>;

data::CorpusRecord gold_record(std::string intent, Tags tags) {
  data::CorpusRecord r;
  r.tokens.assign(tags.size(), "w");
  r.intent = std::move(intent);
  r.tags = std::move(tags);
  return r;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

bool same_params(const ParameterStore& a, const ParameterStore& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || !bit_equal(a[i].value, b[i].value)) return false;
  return true;
}

// Small enough that a handful of epochs take well under a second each.
struct Fixture {
  data::SynthCorpus corpus = data::synth_generate(9, 400, 0.5);
  TrainConfig config;

  Fixture() {
    ModelConfig& m = config.model;
    m.encoder.word_dim = 12;
    m.encoder.lstm_hidden = 6;
    m.encoder.sa_dim = 8;
    m.encoder.key_dim = 5;
    m.encoder.d_p = 7;
    m.encoder.dropout = 0.4;
    m.encoder.manifest = corpus.manifest;
    m.d_a = 6;
    m.d_c = 9;
    m.d_y = 5;
    config.epochs = 2;
    config.learning_rate = 2e-3;
    config.seeds = {1};
  }
  std::vector<data::CorpusRecord> train_head(std::size_t n) const {
    return {corpus.train.begin(), corpus.train.begin() + static_cast<std::ptrdiff_t>(n)};
  }
};

}  // namespace

TEST_CASE("span counting and scoring") {
  SUBCASE("half the spans right") {
    const SpanCounts c = count_spans({"B-X", "I-X", "O", "B-Y"}, {"B-X", "I-X", "B-Y", "I-Y"});
    CHECK(c.matched == 1);
    CHECK(c.predicted == 2);
    CHECK(c.gold == 2);
    const Metrics m = score({gold_record("a", {"B-X", "I-X", "O", "B-Y"})},
                            {{"a", {"B-X", "I-X", "B-Y", "I-Y"}}});
    CHECK(m.slot_precision == 0.5);
    CHECK(m.slot_recall == 0.5);
    CHECK(m.slot_f1 == 0.5);
    CHECK(m.intent_accuracy == 1.0);
    CHECK(m.overall_accuracy == 0.0);
  }
  SUBCASE("perfect predictions") {
    const std::vector<data::CorpusRecord> gold{gold_record("a", {"B-X", "O"}),
                                              gold_record("b", {"O", "B-Y"})};
    const Metrics m = score(gold, {{"a", {"B-X", "O"}}, {"b", {"O", "B-Y"}}});
    CHECK(m.intent_accuracy == 1.0);
    CHECK(m.slot_f1 == 1.0);
    CHECK(m.overall_accuracy == 1.0);
    CHECK(m.sequence_accuracy == 1.0);
    CHECK(m.n_utterances == 2);
  }
  SUBCASE("no spans anywhere gives F1 = 0") {
    const Metrics m = score({gold_record("a", {"O"})}, {{"a", {"O"}}});
    CHECK(m.slot_f1 == 0.0);
    CHECK(m.overall_accuracy == 1.0);
  }
  SUBCASE("a repaired span matches for F1 but not for overall accuracy") {
    const Metrics m = score({gold_record("a", {"B-X", "I-X"})}, {{"a", {"I-X", "I-X"}}});
    CHECK(m.slot_f1 == 1.0);
    CHECK(m.overall_accuracy == 0.0);
  }
  SUBCASE("unknown gold intent is simply wrong") {
    const Metrics m = score({gold_record("unseen", {"O"})}, {{"a", {"O"}}});
    CHECK(m.intent_accuracy == 0.0);
  }
  CHECK_THROWS_AS(score({gold_record("a", {"O"})}, {}), ValidationError);
}

TEST_CASE("metric invariants on random predictions") {
  std::mt19937_64 rng(41);
  const Tags alphabet{"O", "B-X", "I-X", "B-Y", "I-Y"};
  const Tags intents{"a", "b"};
  auto tags = [&](std::size_t n) {
    Tags t(n);
    for (auto& s : t) s = alphabet[rng() % alphabet.size()];
    return t;
  };
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<data::CorpusRecord> gold;
    std::vector<LabelledOutput> pred;
    std::size_t matched = 0, predicted = 0, gold_spans = 0;
    for (int i = 0; i < 6; ++i) {
      const std::size_t n = 1 + rng() % 4;
      gold.push_back(gold_record(intents[rng() % 2], tags(n)));
      // Half the time copy the gold tags so every metric moves around.
      pred.push_back({intents[rng() % 2], rng() % 2 ? gold.back().tags : tags(n)});
      const auto g = oracle::conlleval_chunks(gold.back().tags);
      const auto p = oracle::conlleval_chunks(pred.back().tags);
      predicted += p.size();
      gold_spans += g.size();
      for (const auto& s : p) matched += std::count(g.begin(), g.end(), s);
    }
    const Metrics m = score(gold, pred);
    CHECK(m.overall_accuracy <= std::min(m.intent_accuracy, m.sequence_accuracy));
    const double p = predicted ? double(matched) / predicted : 0.0;
    const double r = gold_spans ? double(matched) / gold_spans : 0.0;
    CHECK(m.slot_precision == doctest::Approx(p));
    CHECK(m.slot_recall == doctest::Approx(r));
    CHECK(m.slot_f1 == doctest::Approx(p + r > 0 ? 2 * p * r / (p + r) : 0.0));
    for (double v : {m.intent_accuracy, m.slot_f1, m.overall_accuracy}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(score(gold, pred) == m);
  }
}

TEST_CASE("mean over seeds") {
  Metrics a, b, c;
  a.intent_accuracy = 0.1;
  b.intent_accuracy = 0.7;
  c.intent_accuracy = 0.3;
  a.n_utterances = b.n_utterances = c.n_utterances = 4;
  const Metrics m = mean_metrics({a, b, c});
  CHECK(m.intent_accuracy == doctest::Approx(1.1 / 3));
  CHECK(mean_metrics({a}) == a);
  std::vector<Metrics> runs{a, b, c};
  std::sort(runs.begin(), runs.end(),
            [](const Metrics& x, const Metrics& y) { return x.intent_accuracy < y.intent_accuracy; });
  do {
    CHECK(mean_metrics(runs) == m);
  } while (std::next_permutation(runs.begin(), runs.end(), [](const Metrics& x, const Metrics& y) {
    return x.intent_accuracy < y.intent_accuracy;
  }));
}

TEST_CASE("Adam") {
  SUBCASE("first step moves by lr against the gradient sign") {
    ParameterStore s;
    Parameter& p = s.add("w", Tensor::from_rows({{1.0, -2.0, 3.0}}));
    p.grad = Tensor::from_rows({{0.5, -4.0, 1e-3}});
    p.has_grad = true;
    Adam adam(0.01);
    adam.step(s);
    CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(p.value(0, 2) == doctest::Approx(3.0 - 0.01).epsilon(1e-4));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterStore s;
    Parameter& p = s.add("w", Tensor::from_rows({{1.0, -2.0}}));
    p.grad = Tensor::matrix(1, 2);
    p.has_grad = true;
    Adam adam(0.01);
    adam.step(s);
    CHECK(p.value == Tensor::from_rows({{1.0, -2.0}}));
  }
  SUBCASE("x^2 from 1 shrinks every step") {
    ParameterStore s;
    Parameter& x = s.add("x", Tensor::scalar(1.0));
    Adam adam(1e-2);
    double prev = 1.0;
    for (int step = 0; step < 100; ++step) {
      s.zero_grad();
      Tape tape;
      Var v = tape.param(x);
      tape.backward(mul(v, v));
      adam.step(s);
      const double now = std::fabs(x.value.item());
      CHECK(now < prev);
      prev = now;
    }
    CHECK(adam.steps() == 100);
  }
  SUBCASE("parameters without a gradient are skipped") {
    ParameterStore s;
    Parameter& a = s.add("a", Tensor::scalar(1.0));
    Parameter& b = s.add("b", Tensor::scalar(1.0));
    a.grad = Tensor::scalar(1.0);
    a.has_grad = true;
    Adam adam(0.1);
    adam.step(s);
    CHECK(a.value.item() < 1.0);
    CHECK(b.value.item() == 1.0);
  }
  SUBCASE("stepping before any backward pass is an error") {
    ParameterStore s;
    s.add("a", Tensor::scalar(1.0));
    Adam adam(0.1);
    CHECK_THROWS_AS(adam.step(s), ValidationError);
  }
}

TEST_CASE("seed streams are distinct and stable") {
  CHECK(derive_seed(1, RngStream::Init) == derive_seed(1, RngStream::Init));
  CHECK(derive_seed(1, RngStream::Init) != derive_seed(1, RngStream::Shuffle));
  CHECK(derive_seed(1, RngStream::Shuffle) != derive_seed(1, RngStream::Dropout));
  CHECK(derive_seed(1, RngStream::Init) != derive_seed(2, RngStream::Init));
}

TEST_CASE("train config validation and JSON") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  TrainConfig bad = c;
  bad.lambda = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.lr_grid.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(c.lr_grid.size() * c.lambda_grid.size() == 36);

  Fixture f;
  f.config.model.ablation = Ablation::NoUserProfile;
  f.config.intent_teacher_forcing = false;
  f.config.seeds = {4, 9};
  const nlohmann::json j = train_config_to_json(f.config);
  CHECK(train_config_to_json(train_config_from_json(j)) == j);
  nlohmann::json typo = j;
  typo["learning_rte"] = 0.1;
  CHECK_THROWS_WITH_AS(train_config_from_json(typo), doctest::Contains("learning_rte"),
                       ValidationError);
  nlohmann::json partial = {{"epochs", 3}};
  const TrainConfig p = train_config_from_json(partial);
  CHECK(p.epochs == 3);
  CHECK(p.batch_size == 32);
  CHECK(p.model.encoder.dropout == 0.4);

  const fs::path path = fs::temp_directory_path() / "jpis_test_config.json";
  save_train_config(path, f.config);
  CHECK(train_config_to_json(load_train_config(path)) == j);
  fs::remove(path);
}

TEST_CASE("training") {
  Fixture f;
  SUBCASE("epochs = 0 returns the initial model evaluated once") {
    f.config.epochs = 0;
    const TrainResult r = train(f.config, 3, f.train_head(60), f.corpus.valid);
    CHECK(r.best_epoch == 0);
    CHECK(r.log.size() == 1);
    const JpisModel fresh(f.config.model, data::build_vocab(f.train_head(60)),
                          derive_seed(3, RngStream::Init));
    CHECK(same_params(r.model.params(), fresh.params()));
    CHECK(r.best_valid == evaluate(fresh, f.corpus.valid));
  }
  SUBCASE("same seed, same log and parameters") {
    const TrainResult a = train(f.config, 5, f.train_head(100), f.corpus.valid);
    const TrainResult b = train(f.config, 5, f.train_head(100), f.corpus.valid);
    CHECK(a.log == b.log);
    CHECK(same_params(a.model.params(), b.model.params()));
    const TrainResult c = train(f.config, 6, f.train_head(100), f.corpus.valid);
    CHECK_FALSE(a.log == c.log);
  }
  SUBCASE("selected epoch has the best validation overall accuracy, earliest on ties") {
    f.config.epochs = 4;
    std::vector<EpochLog> seen;
    const TrainResult r =
        train(f.config, 2, f.train_head(100), f.corpus.valid, [&](const EpochLog& e) { seen.push_back(e); });
    CHECK(seen == r.log);
    REQUIRE(r.log.size() == 4);
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.log.size(); ++i)
      if (r.log[i].valid.overall_accuracy > r.log[best].valid.overall_accuracy) best = i;
    CHECK(r.best_epoch == r.log[best].epoch);
    CHECK(r.best_valid == r.log[best].valid);
    CHECK(evaluate(r.model, f.corpus.valid) == r.best_valid);
    for (const auto& e : r.log) {
      CHECK(e.loss == doctest::Approx(f.config.lambda * e.intent_loss +
                                      (1 - f.config.lambda) * e.slot_loss));
      CHECK(e.valid.overall_accuracy <= e.valid.intent_accuracy);
    }
  }
  SUBCASE("evaluation is pure") {
    const TrainResult r = train(f.config, 1, f.train_head(60), f.corpus.valid);
    CHECK(evaluate(r.model, f.corpus.test) == evaluate(r.model, f.corpus.test));
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(train(f.config, 1, {}, f.corpus.valid), ValidationError);
    f.config.lambda = -1;
    CHECK_THROWS_AS(train(f.config, 1, f.train_head(10), f.corpus.valid), ValidationError);
  }
  SUBCASE("divergence names the epoch and batch") {
    f.config.learning_rate = 1e300;
    f.config.epochs = 3;
    CHECK_THROWS_WITH_AS(train(f.config, 1, f.train_head(64), f.corpus.valid),
                         doctest::Contains("epoch"), NumericalError);
  }
}

TEST_CASE("loss falls over the first ten epochs for every default seed") {
  Fixture f;
  f.config.epochs = 10;
  f.config.learning_rate = 4e-4;
  for (std::uint64_t seed : TrainConfig{}.seeds) {
    const TrainResult r = train(f.config, seed, f.train_head(200), f.train_head(1));
    CHECK_MESSAGE(r.log[9].loss < r.log[0].loss, "seed " << seed);
  }
}

TEST_CASE("grid search") {
  Fixture f;
  f.config.epochs = 1;
  const auto train_set = f.train_head(60);
  SUBCASE("a 1x1 grid is a single training run") {
    f.config.lr_grid = {f.config.learning_rate};
    f.config.lambda_grid = {f.config.lambda};
    const GridResult g = grid_search(f.config, train_set, f.corpus.valid);
    const TrainResult t = train(f.config, f.config.seeds[0], train_set, f.corpus.valid);
    REQUIRE(g.table.size() == 1);
    REQUIRE(g.best_run.has_value());
    CHECK(g.best_run->log == t.log);
    CHECK(same_params(g.best_run->model.params(), t.model.params()));
    CHECK(g.table[0].valid == t.best_valid);
  }
  SUBCASE("ties go to the earlier pair, table is lr-major") {
    f.config.lr_grid = {1e-3, 1e-3};
    f.config.lambda_grid = {0.3, 0.3};
    std::vector<GridPoint> seen;
    const GridResult g = grid_search(f.config, train_set, f.corpus.valid,
                                     [&](const GridPoint& p) { seen.push_back(p); });
    CHECK(g.table.size() == 4);
    CHECK(seen.size() == 4);
    CHECK(g.best == 0);
  }
  SUBCASE("best pair has the highest validation overall accuracy") {
    f.config.lr_grid = {1e-4, 3e-3};
    f.config.lambda_grid = {0.2, 0.8};
    const GridResult g = grid_search(f.config, train_set, f.corpus.valid);
    CHECK(g.table[0].learning_rate == 1e-4);
    CHECK(g.table[1].lambda == 0.8);
    CHECK(g.table[2].learning_rate == 3e-3);
    for (std::size_t i = 0; i < g.table.size(); ++i) {
      CHECK(g.table[g.best].valid.overall_accuracy >= g.table[i].valid.overall_accuracy);
      if (i < g.best)
        CHECK(g.table[i].valid.overall_accuracy < g.table[g.best].valid.overall_accuracy);
    }
  }
}

TEST_CASE("multi-seed runs") {
  Fixture f;
  f.config.epochs = 1;
  const auto train_set = f.train_head(60);
  f.config.seeds = {3, 1, 2};
  const MultiSeedResult a = multi_seed(f.config, train_set, f.corpus.valid, f.corpus.test);
  CHECK(a.test.per_seed.size() == 3);
  CHECK(a.logs.size() == 3);
  CHECK(a.test.seeds == std::vector<std::uint64_t>{3, 1, 2});
  CHECK(a.test.mean == mean_metrics(a.test.per_seed));
  f.config.seeds = {2, 3, 1};
  const MultiSeedResult b = multi_seed(f.config, train_set, f.corpus.valid, f.corpus.test);
  CHECK(b.test.mean == a.test.mean);
  f.config.seeds = {1};
  const MultiSeedResult one = multi_seed(f.config, train_set, f.corpus.valid, f.corpus.test);
  CHECK(one.test.mean == one.test.per_seed[0]);
  CHECK(one.test.per_seed[0] == a.test.per_seed[1]);
  const nlohmann::json j = report_to_json(a.test);
  CHECK(j["per_seed"].size() == 3);
  CHECK(j.contains("intent_accuracy"));
}
