#include "sme/cnn.hpp"

#include <cmath>

#include "sme/adam.hpp"
#include "sme/errors.hpp"
#include "sme/rng.hpp"
#include "sme/sigproc.hpp"

namespace sme {

namespace {

constexpr int kMaps = CnnModel::kMaps;
constexpr int kTaps = CnnModel::kTaps;
constexpr int kStride = CnnModel::kStride;
constexpr int kTimeIn = CnnModel::kTimeIn;
constexpr int kTimeOut = CnnModel::kTimeOut;

void check_batch(const CnnModel& model, const CnnBatch& batch) {
  const Eigen::Index rows = static_cast<Eigen::Index>(model.n_bands()) * model.channels;
  for (const Eigen::MatrixXd& trial : batch) {
    if (trial.rows() != rows || trial.cols() != kTimeIn) {
      throw ShapeError("trial tensor must be (bands*channels) x 250");
    }
  }
}

// Gathers convolution patches; in Train mode the inverted-dropout mask is
// drawn on the input tensor so overlapping windows see the same mask.
Eigen::MatrixXd im2col(const CnnModel& model, const CnnBatch& batch, CnnMode mode,
                       std::uint64_t dropout_seed) {
  const int bands = model.n_bands();
  const int c = model.channels;
  const Eigen::Index b_n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd patches(model.kernel_size(), b_n * kTimeOut);

  rng::Engine gen(dropout_seed);
  const double keep = 1.0 - CnnModel::kDropout;
  Eigen::MatrixXd masked;
  for (Eigen::Index b = 0; b < b_n; ++b) {
    const Eigen::MatrixXd* x = &batch[b];
    if (mode == CnnMode::Train) {
      masked = batch[b];
      for (Eigen::Index r = 0; r < masked.rows(); ++r) {
        for (Eigen::Index t = 0; t < masked.cols(); ++t) {
          masked(r, t) = rng::u01(gen) < keep ? masked(r, t) / keep : 0.0;
        }
      }
      x = &masked;
    }
    for (int w = 0; w < kTimeOut; ++w) {
      const int t0 = w * kStride;
      for (int i = 0; i < bands; ++i) {
        for (int tap = 0; tap < kTaps; ++tap) {
          for (int ch = 0; ch < c; ++ch) {
            patches((i * kTaps + tap) * c + ch, b * kTimeOut + w) =
                (*x)(i * c + ch, t0 + tap);
          }
        }
      }
    }
  }
  return patches;
}

double softmax_loss(const Eigen::MatrixXd& logits, const std::vector<Label>& labels,
                    Eigen::MatrixXd* dlogits) {
  const Eigen::Index b_n = logits.rows();
  double loss = 0.0;
  if (dlogits) dlogits->resize(b_n, 2);
  for (Eigen::Index b = 0; b < b_n; ++b) {
    const double m = logits.row(b).maxCoeff();
    const double e0 = std::exp(logits(b, 0) - m);
    const double e1 = std::exp(logits(b, 1) - m);
    const double lse = m + std::log(e0 + e1);
    const int target = labels[b] == Label::Remembered ? 1 : 0;
    loss += lse - logits(b, target);
    if (dlogits) {
      (*dlogits)(b, 0) = e0 / (e0 + e1);
      (*dlogits)(b, 1) = e1 / (e0 + e1);
      (*dlogits)(b, target) -= 1.0;
    }
  }
  if (dlogits) *dlogits /= static_cast<double>(b_n);
  return loss / static_cast<double>(b_n);
}

}  // namespace

CnnModel cnn_init(int channels, const std::vector<BandDef>& bands,
                  const TrainConfig& config) {
  if (channels < 1 || bands.empty()) {
    throw std::invalid_argument("need at least one channel and one band");
  }
  CnnModel model;
  model.channels = channels;
  model.bands = bands;
  model.config = config;

  rng::Engine gen(rng::derive_seed(config.seed, 0x1817));
  const auto he_uniform = [&gen](Eigen::MatrixXd& w, int fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = limit * (2.0 * rng::u01(gen) - 1.0);
      }
    }
  };

  model.conv_w.resize(kMaps, model.kernel_size());
  he_uniform(model.conv_w, model.kernel_size());
  model.conv_b = Eigen::VectorXd::Zero(kMaps);
  model.bn_gamma = Eigen::VectorXd::Ones(kMaps);
  model.bn_beta = Eigen::VectorXd::Zero(kMaps);
  model.bn_running_mean = Eigen::VectorXd::Zero(kMaps);
  model.bn_running_var = Eigen::VectorXd::Ones(kMaps);
  model.fc_w.resize(2, kMaps * kTimeOut);
  he_uniform(model.fc_w, kMaps * kTimeOut);
  model.fc_b = Eigen::VectorXd::Zero(2);
  model.z_mean = Eigen::MatrixXd::Zero(bands.size(), channels);
  model.z_std = Eigen::MatrixXd::Ones(bands.size(), channels);
  return model;
}

Eigen::MatrixXd cnn_forward(const CnnModel& model, const CnnBatch& batch,
                            CnnMode mode, std::uint64_t dropout_seed,
                            CnnCache* cache) {
  check_batch(model, batch);
  if (batch.empty()) throw ShapeError("empty batch");
  if (mode == CnnMode::Eval && !model.bn_initialized) {
    throw UninitializedStats("eval-mode forward before any training step");
  }
  const Eigen::Index b_n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index cols = b_n * kTimeOut;

  Eigen::MatrixXd patches = im2col(model, batch, mode, dropout_seed);
  Eigen::MatrixXd conv = model.conv_w * patches;
  conv.colwise() += model.conv_b;

  Eigen::VectorXd mean(kMaps), var(kMaps);
  if (mode == CnnMode::Train) {
    for (int j = 0; j < kMaps; ++j) {
      mean(j) = conv.row(j).mean();
      var(j) = (conv.row(j).array() - mean(j)).square().mean();
    }
  } else {
    mean = model.bn_running_mean;
    var = model.bn_running_var;
  }

  Eigen::MatrixXd normalized(kMaps, cols), activated(kMaps, cols);
  for (int j = 0; j < kMaps; ++j) {
    const double inv = 1.0 / std::sqrt(var(j) + model.bn_eps);
    normalized.row(j) = (conv.row(j).array() - mean(j)) * inv;
    activated.row(j) = (model.bn_gamma(j) * normalized.row(j).array() +
                        model.bn_beta(j))
                           .max(0.0);
  }

  Eigen::MatrixXd logits(b_n, 2);
  for (Eigen::Index b = 0; b < b_n; ++b) {
    Eigen::VectorXd flat(kMaps * kTimeOut);
    for (int j = 0; j < kMaps; ++j) {
      for (int w = 0; w < kTimeOut; ++w) {
        flat(j * kTimeOut + w) = activated(j, b * kTimeOut + w);
      }
    }
    logits.row(b) = (model.fc_w * flat + model.fc_b).transpose();
  }

  if (cache) {
    cache->patches = std::move(patches);
    cache->conv_out = std::move(conv);
    cache->batch_mean = mean;
    cache->batch_var = var;
    cache->normalized = std::move(normalized);
    cache->activated = std::move(activated);
  }
  return logits;
}

double cnn_loss(const CnnModel& model, const CnnBatch& batch,
                const std::vector<Label>& labels, std::uint64_t dropout_seed) {
  if (labels.size() != batch.size()) throw ShapeError("label/batch size mismatch");
  const Eigen::MatrixXd logits =
      cnn_forward(model, batch, CnnMode::Train, dropout_seed);
  return softmax_loss(logits, labels, nullptr);
}

std::pair<double, CnnGrads> cnn_loss_and_grads(const CnnModel& model,
                                               const CnnBatch& batch,
                                               const std::vector<Label>& labels,
                                               std::uint64_t dropout_seed,
                                               CnnCache* cache) {
  if (labels.size() != batch.size()) throw ShapeError("label/batch size mismatch");
  CnnCache local;
  CnnCache* cc = cache ? cache : &local;
  const Eigen::MatrixXd logits =
      cnn_forward(model, batch, CnnMode::Train, dropout_seed, cc);

  Eigen::MatrixXd dlogits;
  const double loss = softmax_loss(logits, labels, &dlogits);

  const Eigen::Index b_n = logits.rows();
  const Eigen::Index cols = b_n * kTimeOut;
  const double n = static_cast<double>(cols);

  CnnGrads grads;
  grads.fc_w = Eigen::MatrixXd::Zero(2, kMaps * kTimeOut);
  grads.fc_b = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd dact(kMaps, cols);
  for (Eigen::Index b = 0; b < b_n; ++b) {
    Eigen::VectorXd flat(kMaps * kTimeOut);
    for (int j = 0; j < kMaps; ++j) {
      for (int w = 0; w < kTimeOut; ++w) {
        flat(j * kTimeOut + w) = cc->activated(j, b * kTimeOut + w);
      }
    }
    grads.fc_w += dlogits.row(b).transpose() * flat.transpose();
    grads.fc_b += dlogits.row(b).transpose();
    const Eigen::VectorXd dflat = model.fc_w.transpose() * dlogits.row(b).transpose();
    for (int j = 0; j < kMaps; ++j) {
      for (int w = 0; w < kTimeOut; ++w) {
        dact(j, b * kTimeOut + w) = dflat(j * kTimeOut + w);
      }
    }
  }

  // ReLU, batch-norm (through the batch statistics), then convolution.
  grads.bn_gamma = Eigen::VectorXd::Zero(kMaps);
  grads.bn_beta = Eigen::VectorXd::Zero(kMaps);
  Eigen::MatrixXd dconv(kMaps, cols);
  for (int j = 0; j < kMaps; ++j) {
    const double inv = 1.0 / std::sqrt(cc->batch_var(j) + model.bn_eps);
    Eigen::ArrayXd dy = dact.row(j).transpose().array() *
                        (cc->activated.row(j).transpose().array() > 0.0).cast<double>();
    const Eigen::ArrayXd xhat = cc->normalized.row(j).transpose().array();
    grads.bn_gamma(j) = (dy * xhat).sum();
    grads.bn_beta(j) = dy.sum();
    const Eigen::ArrayXd dxhat = dy * model.bn_gamma(j);
    const Eigen::ArrayXd centered =
        cc->conv_out.row(j).transpose().array() - cc->batch_mean(j);
    const double dvar = (dxhat * centered).sum() * -0.5 * inv * inv * inv;
    const double dmean = -inv * dxhat.sum();
    dconv.row(j) = (dxhat * inv + centered * (2.0 * dvar / n) + dmean / n)
                       .transpose();
  }

  grads.conv_w = dconv * cc->patches.transpose();
  grads.conv_b = dconv.rowwise().sum();
  return {loss, std::move(grads)};
}

Eigen::VectorXd cnn_pack(const CnnModel& model) {
  Eigen::VectorXd flat(model.param_count());
  Eigen::Index at = 0;
  const auto put_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat(at++) = m(r, c);
    }
  };
  const auto put_vector = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) flat(at++) = v(i);
  };
  put_matrix(model.conv_w);
  put_vector(model.conv_b);
  put_vector(model.bn_gamma);
  put_vector(model.bn_beta);
  put_matrix(model.fc_w);
  put_vector(model.fc_b);
  return flat;
}

void cnn_unpack(CnnModel& model, const Eigen::VectorXd& flat) {
  if (flat.size() != model.param_count()) {
    throw ShapeError("flat parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  const auto take_matrix = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat(at++);
    }
  };
  const auto take_vector = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = flat(at++);
  };
  take_matrix(model.conv_w);
  take_vector(model.conv_b);
  take_vector(model.bn_gamma);
  take_vector(model.bn_beta);
  take_matrix(model.fc_w);
  take_vector(model.fc_b);
}

Eigen::VectorXd cnn_pack_grads(const CnnGrads& grads) {
  Eigen::VectorXd flat(grads.conv_w.size() + grads.conv_b.size() +
                       grads.bn_gamma.size() + grads.bn_beta.size() +
                       grads.fc_w.size() + grads.fc_b.size());
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < grads.conv_w.rows(); ++r) {
    for (Eigen::Index c = 0; c < grads.conv_w.cols(); ++c) {
      flat(at++) = grads.conv_w(r, c);
    }
  }
  for (Eigen::Index i = 0; i < grads.conv_b.size(); ++i) flat(at++) = grads.conv_b(i);
  for (Eigen::Index i = 0; i < grads.bn_gamma.size(); ++i) flat(at++) = grads.bn_gamma(i);
  for (Eigen::Index i = 0; i < grads.bn_beta.size(); ++i) flat(at++) = grads.bn_beta(i);
  for (Eigen::Index r = 0; r < grads.fc_w.rows(); ++r) {
    for (Eigen::Index c = 0; c < grads.fc_w.cols(); ++c) flat(at++) = grads.fc_w(r, c);
  }
  for (Eigen::Index i = 0; i < grads.fc_b.size(); ++i) flat(at++) = grads.fc_b(i);
  return flat;
}

namespace {

// (bands*channels) x time tensors, band-filtered but not yet z-scored.
CnnBatch band_stack(const EpochSet& epochs, const std::vector<BandDef>& bands) {
  const Eigen::Index c = epochs.n_channels();
  CnnBatch stack(epochs.n_trials());
  for (auto& m : stack) m.resize(bands.size() * c, epochs.n_samples());
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const EpochSet filtered = band_filter_epochs(epochs, bands[i]);
    for (std::size_t t = 0; t < filtered.n_trials(); ++t) {
      stack[t].middleRows(static_cast<Eigen::Index>(i) * c, c) = filtered.trials[t];
    }
  }
  return stack;
}

}  // namespace

CnnBatch cnn_prepare(const CnnModel& model, const EpochSet& epochs) {
  if (epochs.n_channels() != model.channels) {
    throw ShapeError("channel count does not match the trained model");
  }
  if (epochs.n_samples() != kTimeIn) {
    throw ShapeError("trials must hold 250 samples");
  }
  CnnBatch batch = band_stack(epochs, model.bands);
  for (Eigen::MatrixXd& trial : batch) {
    for (int i = 0; i < model.n_bands(); ++i) {
      for (int ch = 0; ch < model.channels; ++ch) {
        trial.row(i * model.channels + ch) =
            (trial.row(i * model.channels + ch).array() - model.z_mean(i, ch)) /
            model.z_std(i, ch);
      }
    }
  }
  return batch;
}

CnnModel cnn_train(const EpochSet& epochs, const std::vector<BandDef>& bands,
                   const TrainConfig& config) {
  if (epochs.count(Label::Remembered) < 2 || epochs.count(Label::Forgotten) < 2) {
    throw MissingCondition("training needs >= 2 trials per condition");
  }
  if (epochs.n_samples() != kTimeIn) {
    throw ShapeError("trials must hold 250 samples");
  }
  const int c = static_cast<int>(epochs.n_channels());
  const Eigen::Index n = static_cast<Eigen::Index>(epochs.n_trials());

  CnnModel model = cnn_init(c, bands, config);

  CnnBatch tensors = band_stack(epochs, bands);
  for (int i = 0; i < model.n_bands(); ++i) {
    for (int ch = 0; ch < c; ++ch) {
      double mean = 0.0;
      for (const auto& t : tensors) mean += t.row(i * c + ch).mean();
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& t : tensors) {
        var += (t.row(i * c + ch).array() - mean).square().mean();
      }
      var /= static_cast<double>(n);
      model.z_mean(i, ch) = mean;
      model.z_std(i, ch) = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
      for (auto& t : tensors) {
        t.row(i * c + ch) =
            (t.row(i * c + ch).array() - model.z_mean(i, ch)) / model.z_std(i, ch);
      }
    }
  }

  Eigen::VectorXd params = cnn_pack(model);
  AdamState opt;
  AdamConfig adam{config.lr, config.beta1, config.beta2, config.eps_adam};

  std::vector<int> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  for (int e = 0; e < config.epochs; ++e) {
    rng::Engine shuffler(rng::derive_seed(config.seed, 0x5u + static_cast<std::uint64_t>(e)));
    rng::shuffle(order, shuffler);
    const int batches =
        static_cast<int>((n + config.batch_size - 1) / config.batch_size);
    for (int k = 0; k < batches; ++k) {
      const int lo = k * config.batch_size;
      const int hi = std::min<int>(lo + config.batch_size, static_cast<int>(n));
      CnnBatch batch;
      std::vector<Label> labels;
      for (int idx = lo; idx < hi; ++idx) {
        batch.push_back(tensors[order[idx]]);
        labels.push_back(epochs.labels[order[idx]]);
      }
      const std::uint64_t step_seed = rng::derive_seed(
          config.seed, 0x0d00 + static_cast<std::uint64_t>(e) * 1000003ULL +
                           static_cast<std::uint64_t>(k));
      CnnCache cache;
      auto [loss, grads] = cnn_loss_and_grads(model, batch, labels, step_seed, &cache);
      (void)loss;

      const double mom = model.bn_momentum;
      const double cols = static_cast<double>(batch.size()) * kTimeOut;
      const double unbias = cols > 1.0 ? cols / (cols - 1.0) : 1.0;
      model.bn_running_mean = mom * model.bn_running_mean + (1 - mom) * cache.batch_mean;
      model.bn_running_var =
          mom * model.bn_running_var + (1 - mom) * (unbias * cache.batch_var);
      model.bn_initialized = true;

      adam_step(params, cnn_pack_grads(grads), opt, adam);
      cnn_unpack(model, params);
    }
  }
  return model;
}

std::vector<Label> cnn_predict(const CnnModel& model, const EpochSet& epochs) {
  const CnnBatch batch = cnn_prepare(model, epochs);
  std::vector<Label> out(batch.size());
  constexpr std::size_t chunk = 64;
  for (std::size_t at = 0; at < batch.size(); at += chunk) {
    const std::size_t len = std::min(chunk, batch.size() - at);
    const CnnBatch part(batch.begin() + at, batch.begin() + at + len);
    const Eigen::MatrixXd logits = cnn_forward(model, part, CnnMode::Eval);
    for (std::size_t i = 0; i < len; ++i) {
      out[at + i] =
          logits(static_cast<Eigen::Index>(i), 1) > logits(static_cast<Eigen::Index>(i), 0)
              ? Label::Remembered
              : Label::Forgotten;
    }
  }
  return out;
}

}  // namespace sme
