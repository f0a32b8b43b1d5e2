#include "jpis/diagnostics.hpp"

#include <random>

#include "jpis/train.hpp"

namespace jpis {

TinySetup make_tiny_setup(Ablation ablation, std::uint64_t seed) {
  ModelConfig config;
  auto& e = config.encoder;
  e.word_dim = e.lstm_hidden = e.sa_dim = e.key_dim = e.d_p = 8;
  e.dropout = 0.0;
  config.d_a = config.d_c = config.d_y = 8;
  config.ablation = ablation;
  using encoder::ProfileKind;
  e.manifest.fields = {{ProfileKind::UserProfile, "pref", 3, true},
                       {ProfileKind::UserProfile, "device", 2, true},
                       {ProfileKind::ContextAwareness, "place", 2, true},
                       {ProfileKind::ContextAwareness, "motion", 3, true}};

  data::Vocabularies vocab{data::TokenVocabulary({"a", "b", "c", "d", "e"}),
                           data::LabelVocabulary({"i0", "i1", "i2"}, {"s0", "s1", "s2", "s3"})};
  JpisModel model(config, std::move(vocab), seed);

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  auto distribution = [&](std::size_t dim) {
    std::vector<double> v(dim);
    double total = 0.0;
    for (double& x : v) total += (x = unit(rng));
    for (double& x : v) x /= total;
    return v;
  };
  Example ex;
  ex.tokens = {2, 4, 6};
  ex.profile.up = {distribution(3), distribution(2)};
  ex.profile.ca = {distribution(2), distribution(3)};
  ex.intent = 1;
  const auto& labels = model.labels();
  ex.tags = {*labels.tag_id("B-s1"), *labels.tag_id("I-s1"), *labels.tag_id("B-s3")};
  return {std::move(model), std::move(ex)};
}

double fit_tiny(TinySetup& setup, double target_loss, std::size_t max_steps) {
  Adam adam(0.02);
  double loss = 0.0;
  for (std::size_t step = 0; step <= max_steps; ++step) {
    Tape tape;
    Var joint = setup.model.loss(tape, setup.example, kTinyLambda, true).joint;
    loss = joint.value().item();
    if (loss < target_loss || step == max_steps) break;
    setup.model.params().zero_grad();
    tape.backward(joint);
    adam.step(setup.model.params());
  }
  setup.model.params().zero_grad();
  return loss;
}

GradCheckReport tiny_grad_check(Ablation ablation, std::uint64_t seed, double epsilon,
                                double target_loss) {
  TinySetup setup = make_tiny_setup(ablation, seed);
  if (target_loss > 0.0) fit_tiny(setup, target_loss, 2000);
  JpisModel& model = setup.model;
  const Example& ex = setup.example;
  LossProgram program = [&](Tape& tape) {
    return model.loss(tape, ex, kTinyLambda, /*teacher_forcing=*/true).joint;
  };
  return grad_check_report(program, model.params(), epsilon);
}

}  // namespace jpis
