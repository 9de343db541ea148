#include "sme/cnn.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "sme/errors.hpp"
#include "sme/rng.hpp"
#include "sme/sigproc.hpp"

using namespace sme;

namespace {

CnnBatch random_batch(const CnnModel& model, int b_n, rng::Engine& g,
                      double scale = 1.0) {
  CnnBatch batch;
  for (int b = 0; b < b_n; ++b) {
    Eigen::MatrixXd x(model.n_bands() * model.channels, CnnModel::kTimeIn);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = scale * rng::gaussian(g);
    batch.push_back(std::move(x));
  }
  return batch;
}

std::vector<Label> alternating_labels(int n) {
  std::vector<Label> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % 2 ? Label::Remembered : Label::Forgotten;
  return y;
}

void zero_params(CnnModel& model) {
  cnn_unpack(model, Eigen::VectorXd::Zero(model.param_count()));
}

EpochSet synthetic_epochs(int per_class, int channels, double theta_gain,
                          std::uint64_t seed) {
  const auto theta = design_butterworth(FilterKind::BandPass, {4.0, 8.0}, 5, 250.0);
  rng::Engine g(seed);
  EpochSet set;
  set.fs = 250.0;
  for (int c = 0; c < channels; ++c) set.channel_names.push_back("ch" + std::to_string(c));
  for (int t = 0; t < 2 * per_class; ++t) {
    Eigen::MatrixXd x(channels, 250);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng::gaussian(g);
    const bool remembered = t % 2 == 0;
    if (remembered && theta_gain > 0) {
      for (int c = 0; c < channels / 2; ++c) {
        Eigen::VectorXd extra(250);
        for (int i = 0; i < 250; ++i) extra(i) = rng::gaussian(g);
        x.row(c) += theta_gain * filtfilt(theta, extra).transpose();
      }
    }
    set.trials.push_back(std::move(x));
    set.labels.push_back(remembered ? Label::Remembered : Label::Forgotten);
  }
  return set;
}

}  // namespace

TEST_CASE("conv geometry: nine windows and a 180-wide readout") {
  CHECK(CnnModel::kTimeOut == (250 - 30) / 25 + 1);
  TrainConfig config;
  config.seed = 3;
  const CnnModel model = cnn_init(5, default_bands(), config);
  CHECK(model.conv_w.rows() == 20);
  CHECK(model.conv_w.cols() == 4 * 30 * 5);
  CHECK(model.fc_w.cols() == 20 * 9);

  rng::Engine g(5);
  const CnnBatch batch = random_batch(model, 3, g);
  CnnCache cache;
  const Eigen::MatrixXd logits =
      cnn_forward(model, batch, CnnMode::Train, 7, &cache);
  CHECK(logits.rows() == 3);
  CHECK(logits.cols() == 2);
  CHECK(cache.conv_out.cols() == 3 * 9);
}

TEST_CASE("zero parameters give zero logits and ln 2 loss") {
  TrainConfig config;
  CnnModel model = cnn_init(4, default_bands(), config);
  zero_params(model);
  model.bn_running_mean.setZero();
  model.bn_running_var.setOnes();
  model.bn_initialized = true;

  rng::Engine g(11);
  const CnnBatch batch = random_batch(model, 4, g);
  const Eigen::MatrixXd logits = cnn_forward(model, batch, CnnMode::Eval);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);

  const double loss = cnn_loss(model, batch, alternating_labels(4), 99);
  CHECK(std::abs(loss - std::numbers::ln2) < 1e-12);
}

TEST_CASE("train-mode batch norm standardizes each map") {
  TrainConfig config;
  config.seed = 21;
  const CnnModel model = cnn_init(3, default_bands(), config);
  rng::Engine g(13);
  // Large input scale keeps the variance far above bn_eps.
  const CnnBatch batch = random_batch(model, 6, g, 10.0);
  CnnCache cache;
  cnn_forward(model, batch, CnnMode::Train, 17, &cache);
  for (int j = 0; j < CnnModel::kMaps; ++j) {
    const auto row = cache.normalized.row(j).array();
    CHECK(std::abs(row.mean()) < 1e-6);
    CHECK(std::abs((row - row.mean()).square().mean() - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax rows sum to one and loss stays non-negative") {
  TrainConfig config;
  config.seed = 31;
  const CnnModel model = cnn_init(3, default_bands(), config);
  rng::Engine g(37);
  const CnnBatch batch = random_batch(model, 5, g);
  CnnCache cache;
  const Eigen::MatrixXd logits =
      cnn_forward(model, batch, CnnMode::Train, 3, &cache);
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const double m = logits.row(b).maxCoeff();
    const double z =
        std::exp(logits(b, 0) - m) + std::exp(logits(b, 1) - m);
    const double p0 = std::exp(logits(b, 0) - m) / z;
    const double p1 = std::exp(logits(b, 1) - m) / z;
    CHECK(std::abs(p0 + p1 - 1.0) < 1e-12);
  }
  CHECK(cnn_loss(model, batch, alternating_labels(5), 3) >= 0.0);
}

TEST_CASE("gradients match central finite differences") {
  rng::Engine seeds(41);
  for (int instance = 0; instance < 3; ++instance) {
    TrainConfig config;
    config.seed = seeds();
    CnnModel model = cnn_init(3, default_bands(), config);
    rng::Engine g(seeds());
    const CnnBatch batch = random_batch(model, 4, g);
    const std::vector<Label> labels = alternating_labels(4);
    const std::uint64_t mask_seed = seeds();

    const auto [loss, grads] = cnn_loss_and_grads(model, batch, labels, mask_seed);
    (void)loss;
    const Eigen::VectorXd analytic = cnn_pack_grads(grads);

    Eigen::VectorXd params = cnn_pack(model);
    const double h = 1e-5;
    double worst = 0.0;
    // Full sweep on the first instance, strided on the rest.
    const Eigen::Index stride = instance == 0 ? 1 : 7;
    for (Eigen::Index i = 0; i < params.size(); i += stride) {
      const double saved = params(i);
      params(i) = saved + h;
      cnn_unpack(model, params);
      const double up = cnn_loss(model, batch, labels, mask_seed);
      params(i) = saved - h;
      cnn_unpack(model, params);
      const double down = cnn_loss(model, batch, labels, mask_seed);
      params(i) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double rel = std::abs(numeric - analytic(i)) /
                         std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
      worst = std::max(worst, rel);
    }
    cnn_unpack(model, params);
    CAPTURE(instance);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("identical seeds give identical losses, gradients and models") {
  const EpochSet set = synthetic_epochs(10, 3, 1.0, 51);
  TrainConfig config;
  config.seed = 1234;
  config.epochs = 3;
  config.batch_size = 8;

  const CnnModel a = cnn_train(set, default_bands(), config);
  const CnnModel b = cnn_train(set, default_bands(), config);
  CHECK(cnn_pack(a) == cnn_pack(b));
  CHECK(a.bn_running_mean == b.bn_running_mean);
  CHECK(a.bn_running_var == b.bn_running_var);
  CHECK(a.z_mean == b.z_mean);

  const CnnBatch batch = cnn_prepare(a, set);
  const std::vector<Label> labels = set.labels;
  const auto [l1, g1] = cnn_loss_and_grads(a, batch, labels, 77);
  const auto [l2, g2] = cnn_loss_and_grads(a, batch, labels, 77);
  CHECK(l1 == l2);
  CHECK(cnn_pack_grads(g1) == cnn_pack_grads(g2));

  const Eigen::MatrixXd e1 = cnn_forward(a, batch, CnnMode::Eval);
  const Eigen::MatrixXd e2 = cnn_forward(a, batch, CnnMode::Eval);
  CHECK(e1 == e2);
}

TEST_CASE("duplicating a batch duplicates eval logits and keeps the mean loss") {
  // Dropout masks are drawn per trial slot, so the exact duplication
  // property is checked on the dropout-free eval path.
  const EpochSet set = synthetic_epochs(8, 3, 1.0, 61);
  TrainConfig config;
  config.seed = 5;
  config.epochs = 1;
  config.batch_size = 8;
  const CnnModel model = cnn_train(set, default_bands(), config);
  const CnnBatch batch = cnn_prepare(model, set);

  CnnBatch doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const Eigen::MatrixXd one = cnn_forward(model, batch, CnnMode::Eval);
  const Eigen::MatrixXd two = cnn_forward(model, doubled, CnnMode::Eval);
  CHECK((two.topRows(one.rows()) - one).cwiseAbs().maxCoeff() == 0.0);
  CHECK((two.bottomRows(one.rows()) - one).cwiseAbs().maxCoeff() == 0.0);

  const auto mean_ce = [](const Eigen::MatrixXd& logits,
                          const std::vector<Label>& labels) {
    double total = 0;
    for (Eigen::Index b = 0; b < logits.rows(); ++b) {
      const double m = logits.row(b).maxCoeff();
      const double lse =
          m + std::log(std::exp(logits(b, 0) - m) + std::exp(logits(b, 1) - m));
      total += lse - logits(b, labels[b] == Label::Remembered ? 1 : 0);
    }
    return total / static_cast<double>(logits.rows());
  };
  std::vector<Label> labels = set.labels;
  std::vector<Label> labels2 = labels;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  CHECK(mean_ce(one, labels) == doctest::Approx(mean_ce(two, labels2)).epsilon(1e-15));
}

TEST_CASE("eval before training throws") {
  TrainConfig config;
  const CnnModel model = cnn_init(3, default_bands(), config);
  rng::Engine g(67);
  const CnnBatch batch = random_batch(model, 2, g);
  CHECK_THROWS_AS(cnn_forward(model, batch, CnnMode::Eval), UninitializedStats);
}

TEST_CASE("cnn fits a strongly separable synthetic set") {
  const EpochSet set = synthetic_epochs(30, 4, 2.5, 71);
  TrainConfig config;
  config.seed = 7;
  config.epochs = 100;
  const CnnModel model = cnn_train(set, default_bands(), config);
  const auto pred = cnn_predict(model, set);
  double correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == set.labels[i];
  CHECK(correct / static_cast<double>(pred.size()) >= 0.95);
}

TEST_CASE("cnn stays at chance on shuffled labels") {
  EpochSet train = synthetic_epochs(100, 3, 1.2, 81);
  const EpochSet test = synthetic_epochs(100, 3, 1.2, 82);
  rng::Engine g(83);
  rng::shuffle(train.labels, g);

  TrainConfig config;
  config.seed = 11;
  config.epochs = 30;
  const CnnModel model = cnn_train(train, default_bands(), config);
  const auto pred = cnn_predict(model, test);
  double correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels[i];
  const double acc = correct / static_cast<double>(pred.size());
  CHECK(acc > 0.43);
  CHECK(acc < 0.57);
}

TEST_CASE("training requires both conditions") {
  EpochSet set = synthetic_epochs(5, 3, 0.0, 91);
  for (auto& l : set.labels) l = Label::Remembered;
  TrainConfig config;
  CHECK_THROWS_AS(cnn_train(set, default_bands(), config), MissingCondition);
}
