#include <doctest.h>

#include <fstream>
#include <numbers>

#include "cl3d/core/synthetic.hpp"
#include "cl3d/error.hpp"
#include "cl3d/neural/losses.hpp"
#include "cl3d/neural/pointnet.hpp"
#include "cl3d/neural/training.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace cl3d;

namespace {

const ModelShape kToy{12, 10, 8, 9, 3};

Eigen::RowVectorXd row(std::initializer_list<double> v) {
  Eigen::RowVectorXd r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

}  // namespace

TEST_CASE("forward pass") {
  Rng rng(1);
  const PointNet model(kToy, 5);
  const Points cloud = test::random_points(16, rng);

  SUBCASE("point order does not matter") {
    const ForwardTrace base = model.forward(cloud);
    std::vector<Eigen::Index> perm(16);
    for (int i = 0; i < 16; ++i) perm[i] = i;
    for (int trial = 0; trial < 20; ++trial) {
      for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
      Points shuffled(16, 3);
      for (int i = 0; i < 16; ++i) shuffled.row(i) = cloud.row(perm[i]);
      CHECK((model.forward(shuffled).logits - base.logits).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("a single point's global feature is its local feature") {
    const ForwardTrace t = model.forward(cloud.topRows(1));
    CHECK((t.global - t.local.row(0)).norm() == 0.0);
  }
  SUBCASE("duplicating the argmax point leaves the global feature unchanged") {
    const ForwardTrace t = model.forward(cloud);
    Points more(17, 3);
    more << cloud, cloud.row(t.argmax[0]);
    CHECK((model.forward(more).global - t.global).norm() == 0.0);
  }
  SUBCASE("a zero head gives uniform probabilities") {
    PointNet m = model;
    m.parameters()[PointNet::W5].setZero();
    const ForwardTrace t = m.forward(cloud);
    CHECK(t.logits.isZero(0.0));
    CHECK((softmax(t.logits).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("batched and single forward agree") {
    const Points other = test::random_points(9, rng);
    std::vector<const Points*> batch{&cloud, &other};
    const BatchTrace b = model.forward_batch(batch);
    CHECK((b.logits.row(1) - model.forward(other).logits).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("non-finite activations are reported") {
    PointNet m = model;
    m.parameters()[PointNet::W1](0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(m.forward(cloud), NumericalError);
  }
}

TEST_CASE("backward pass matches finite differences") {
  Rng rng(2);
  const PointNet model(kToy, 11);
  std::vector<Points> clouds{test::random_points(8, rng), test::random_points(8, rng), test::random_points(5, rng)};
  std::vector<const Points*> ptrs{&clouds[0], &clouds[1], &clouds[2]};
  for (double gamma : {0.0, 2.0}) {
    const test::GradCheck g = test::check_gradients(model, ptrs, {0, 2, 1}, gamma);
    CHECK(g.checked == model.parameter_count());
    CHECK(g.failures == 0);
  }

  SUBCASE("zero upstream gradient gives zero parameter gradients") {
    const BatchTrace t = model.forward_batch(ptrs);
    const auto grads = model.backward(t, RowMatrix::Zero(3, 3));
    for (const auto& g : grads) CHECK(g.isZero(0.0));
    CHECK_THROWS_AS(model.backward(t, RowMatrix::Zero(2, 3)), DataError);
  }
}

TEST_CASE("focal loss") {
  const Eigen::RowVectorXd z = row({0.3, -1.2, 2.0, 0.1});
  SUBCASE("gamma 0 is cross-entropy") {
    for (int label = 0; label < 4; ++label) {
      const LossValue f = focal_loss(z, label, 0.0);
      CHECK(std::abs(f.value + log_softmax(z)(label)) <= 1e-12);
      Eigen::RowVectorXd ce_grad = softmax(z);
      ce_grad(label) -= 1.0;
      CHECK((f.gradient - ce_grad).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("p_t = 0.5 with gamma 2") {
    CHECK(std::abs(focal_loss(row({0.0, 0.0}), 0, 2.0).value - 0.25 * std::numbers::ln2) <= 1e-12);
  }
  SUBCASE("saturated logits give zero loss") {
    CHECK(focal_loss(row({60.0, 0.0}), 0, 2.0).value < 1e-40);
  }
  SUBCASE("a vanishing probability is clamped") {
    const LossValue l = focal_loss(row({0.0, 2000.0}), 0, 0.0);
    CHECK(l.value == doctest::Approx(-std::log(1e-12)));
    CHECK(l.gradient.allFinite());
  }
  SUBCASE("loss decreases as p_t grows") {
    for (double gamma : {0.5, 1.0, 2.0, 5.0}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double m = -4.0; m <= 4.0; m += 0.25) {
        const double v = focal_loss(row({m, 0.0, 0.0}), 0, gamma).value;
        CHECK(v < prev);
        prev = v;
      }
    }
  }
  SUBCASE("alpha scales value and gradient") {
    const LossValue a = focal_loss(z, 2, 2.0), b = focal_loss(z, 2, 2.0, 3.0);
    CHECK(b.value == doctest::Approx(3.0 * a.value));
    CHECK((b.gradient - 3.0 * a.gradient).norm() < 1e-14);
  }
  SUBCASE("gradient matches finite differences") {
    for (double gamma : {0.0, 0.5, 2.0}) {
      const LossValue l = focal_loss(z, 1, gamma);
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::RowVectorXd up = z, down = z;
        up(i) += 1e-6;
        down(i) -= 1e-6;
        const double fd = (focal_loss(up, 1, gamma).value - focal_loss(down, 1, gamma).value) / 2e-6;
        CHECK(l.gradient(i) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  SUBCASE("labels are range-checked") {
    CHECK_THROWS_AS(focal_loss(z, 4, 2.0), DataError);
  }
}

TEST_CASE("distillation") {
  const Eigen::RowVectorXd old_z = row({1.0, -0.5, 0.2});
  const Eigen::RowVectorXd new_z = row({0.4, 0.3, -1.0, 2.5});
  CHECK(distill_loss(old_z, row({1.0, -0.5, 0.2, 7.0}), 2.0).value == 0.0);
  CHECK(distill_loss(old_z, new_z, 1e9).value < 1e-12);

  const LossValue l = distill_loss(old_z, new_z, 2.0);
  CHECK(l.value > 0.0);
  CHECK(l.gradient(3) == 0.0);
  for (Eigen::Index i = 0; i < 3; ++i) {
    Eigen::RowVectorXd up = new_z, down = new_z;
    up(i) += 1e-6;
    down(i) -= 1e-6;
    const double fd = (distill_loss(old_z, up, 2.0).value - distill_loss(old_z, down, 2.0).value) / 2e-6;
    CHECK(std::abs(l.gradient(i) - fd) <= 1e-4 * std::max(1e-3, std::abs(fd)));
  }
  CHECK_THROWS_AS(distill_loss(new_z, old_z, 2.0), DataError);
}

TEST_CASE("class alphas") {
  const auto a = class_alphas({0, 0, 0, 1, 2, 2}, 4, AlphaMode::InverseFrequency);
  CHECK(a[1] > a[2]);
  CHECK(a[2] > a[0]);
  CHECK(a[3] == 0.0);
  CHECK((a[0] + a[1] + a[2]) / 3.0 == doctest::Approx(1.0));
  CHECK(a[1] / a[0] == doctest::Approx(3.0));
  CHECK(class_alphas({0, 1}, 3, AlphaMode::Uniform) == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(alpha_mode_from_string(to_string(AlphaMode::InverseFrequency)) == AlphaMode::InverseFrequency);
  CHECK_THROWS_AS(alpha_mode_from_string("balanced"), ConfigError);
}

TEST_CASE("head expansion") {
  Rng rng(4);
  PointNet model(kToy, 3);
  const Points cloud = test::random_points(10, rng);
  const Eigen::RowVectorXd before = model.forward(cloud).logits;
  model.expand_classes(5);
  const Eigen::RowVectorXd after = model.forward(cloud).logits;
  CHECK(after.size() == 5);
  CHECK((after.head(3) - before).norm() == 0.0);
  CHECK(after.tail(2).isZero(0.0));
  CHECK_THROWS_AS(model.expand_classes(2), ConfigError);
}

TEST_CASE("checkpoints") {
  test::TempDir dir("ckpt");
  PointNet model(kToy, 9);
  model.expand_classes(4);
  Rng rng(77);
  rng.normal();
  write_checkpoint(dir.path() / "m.ckpt", model, rng.state());

  std::string state;
  const PointNet back = read_checkpoint(dir.path() / "m.ckpt", &state);
  CHECK(back.shape() == model.shape());
  for (int t = 0; t < PointNet::kTensorCount; ++t)
    CHECK((back.parameters()[t].array() == model.parameters()[t].array()).all());
  Rng resumed;
  resumed.set_state(state);
  CHECK(resumed.normal() == rng.normal());

  std::ofstream(dir.path() / "junk.ckpt") << "not a checkpoint at all";
  CHECK_THROWS_AS(read_checkpoint(dir.path() / "junk.ckpt"), DataError);
  const auto size = std::filesystem::file_size(dir.path() / "m.ckpt");
  std::filesystem::copy_file(dir.path() / "m.ckpt", dir.path() / "cut.ckpt");
  std::filesystem::resize_file(dir.path() / "cut.ckpt", size / 2);
  CHECK_THROWS_AS(read_checkpoint(dir.path() / "cut.ckpt"), DataError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_learning_rate(1e-3, 0, 20) == 1e-3);
  CHECK(cosine_learning_rate(1e-3, 10, 20) == doctest::Approx(5e-4));
  for (int e = 0; e < 20; ++e) {
    const double expected = 1e-3 * 0.5 * (1.0 + std::cos(std::numbers::pi * e / 20.0));
    CHECK(cosine_learning_rate(1e-3, e, 20) == doctest::Approx(expected).epsilon(1e-15));
    if (e > 0) CHECK(cosine_learning_rate(1e-3, e, 20) < cosine_learning_rate(1e-3, e - 1, 20));
  }
}

TEST_CASE("training") {
  ClassSpec round{"round", {{Primitive::Sphere, Eigen::Vector3d::Ones(), 1.0, 0.3}}};
  ClassSpec flat{"flat", {{Primitive::Box, Eigen::Vector3d(1, 1, 0.1), 1.0, 0.3}}};
  SyntheticOptions opts;
  opts.points = 32;
  auto a = generate_synthetic(round, 0, 24, 1, opts, "r/");
  auto b = generate_synthetic(flat, 1, 24, 2, opts, "f/");
  std::vector<TrainingExample> pool;
  for (const auto& s : a) pool.push_back({&s.cloud.points(), 0});
  for (const auto& s : b) pool.push_back({&s.cloud.points(), 1});

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 8;
  cfg.feature_width = 16;
  PointNet model(ModelShape{16, 16, 16, 16, 2}, 4);

  SUBCASE("loss falls on a separable task and the first stage has no distillation") {
    const TrainLog log = train_stage(model, pool, nullptr, cfg, 3);
    REQUIRE(log.epoch_loss.size() == 8);
    CHECK(log.epoch_loss.back() < log.epoch_loss.front());
    for (double d : log.epoch_distill) CHECK(d == 0.0);
    CHECK(log.learning_rates.front() == cfg.learning_rate);
    CHECK(evaluate(model, pool) == 1.0);
  }
  SUBCASE("training is deterministic per seed") {
    PointNet other = model;
    train_stage(model, pool, nullptr, cfg, 3);
    train_stage(other, pool, nullptr, cfg, 3);
    CHECK((model.parameters()[PointNet::W5].array() == other.parameters()[PointNet::W5].array()).all());
  }
  SUBCASE("distillation against an identical old model starts at zero") {
    const PointNet old = model;
    cfg.epochs = 1;
    cfg.learning_rate = 1e-12;
    const TrainLog log = train_stage(model, pool, &old, cfg, 3);
    CHECK(log.epoch_distill[0] < 1e-12);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(train_stage(model, std::span<const TrainingExample>{}, nullptr, cfg, 1), DataError);
    std::vector<TrainingExample> bad{{pool[0].points, 5}};
    CHECK_THROWS_AS(train_stage(model, bad, nullptr, cfg, 1), DataError);
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("evaluation") {
  Rng rng(12);
  PointNet model(ModelShape{4, 4, 4, 4, 4}, 1);
  model.parameters()[PointNet::W5].setZero();
  const Points cloud = test::random_points(3, rng);
  std::vector<const Points*> one{&cloud};
  CHECK(predict(model, one) == std::vector<int>{0});

  // A constant prediction scores 1/C in expectation on uniform labels.
  const int n = 4000;
  std::vector<TrainingExample> examples;
  for (int i = 0; i < n; ++i) examples.push_back({&cloud, static_cast<int>(rng.uniform_index(4))});
  const double acc = evaluate(model, examples);
  CHECK(std::abs(acc - 0.25) < 3 * std::sqrt(0.25 * 0.75 / n));

  std::vector<TrainingExample> right;
  for (int i = 0; i < 10; ++i) right.push_back({&cloud, 0});
  CHECK(evaluate(model, right) == 1.0);
  CHECK_THROWS_AS(evaluate(model, std::span<const TrainingExample>{}), DataError);
}
