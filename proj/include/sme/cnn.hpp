#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "sme/types.hpp"

namespace sme {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
};

enum class CnnMode { Train, Eval };

// One convolutional layer over (time, electrodes) with a (30, channels)
// kernel at stride (25, 1), 20 feature maps, batch norm, ReLU, and an
// affine readout to two logits. Input trials are band-filtered and
// z-scored per (band, channel) with training-set statistics.
struct CnnModel {
  static constexpr int kMaps = 20;
  static constexpr int kTaps = 30;
  static constexpr int kStride = 25;
  static constexpr int kTimeIn = 250;
  static constexpr int kTimeOut = 9;  // floor((250 - 30) / 25) + 1
  static constexpr double kDropout = 0.25;

  int channels = 0;
  std::vector<BandDef> bands;

  Eigen::MatrixXd conv_w;  // kMaps x (bands * kTaps * channels)
  Eigen::VectorXd conv_b;  // kMaps
  Eigen::VectorXd bn_gamma, bn_beta;
  Eigen::VectorXd bn_running_mean, bn_running_var;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
  bool bn_initialized = false;
  Eigen::MatrixXd fc_w;  // 2 x (kMaps * kTimeOut)
  Eigen::VectorXd fc_b;  // 2

  Eigen::MatrixXd z_mean, z_std;  // bands x channels

  TrainConfig config;

  int n_bands() const { return static_cast<int>(bands.size()); }
  int kernel_size() const { return n_bands() * kTaps * channels; }
  Eigen::Index param_count() const {
    return conv_w.size() + conv_b.size() + bn_gamma.size() + bn_beta.size() +
           fc_w.size() + fc_b.size();
  }
};

// One trial = (bands * channels) x 250 matrix, row index = band * channels
// + channel.
using CnnBatch = std::vector<Eigen::MatrixXd>;

struct CnnGrads {
  Eigen::MatrixXd conv_w;
  Eigen::VectorXd conv_b;
  Eigen::VectorXd bn_gamma, bn_beta;
  Eigen::MatrixXd fc_w;
  Eigen::VectorXd fc_b;
};

// Intermediate activations kept for backpropagation and for the
// batch-norm running-statistics update.
struct CnnCache {
  Eigen::MatrixXd patches;     // kernel_size x (B * kTimeOut)
  Eigen::MatrixXd conv_out;    // kMaps x (B * kTimeOut)
  Eigen::VectorXd batch_mean, batch_var;
  Eigen::MatrixXd normalized;  // x-hat
  Eigen::MatrixXd activated;   // after ReLU
};

// Seeded He-uniform initialization; batch-norm stats start uninitialized.
CnnModel cnn_init(int channels, const std::vector<BandDef>& bands,
                  const TrainConfig& config);

// Returns B x 2 logits. Train mode applies inverted dropout (seeded) and
// batch statistics; Eval mode uses running statistics and no dropout.
Eigen::MatrixXd cnn_forward(const CnnModel& model, const CnnBatch& batch,
                            CnnMode mode, std::uint64_t dropout_seed = 0,
                            CnnCache* cache = nullptr);

// Mean cross-entropy of the softmax over the two logits (forward only).
double cnn_loss(const CnnModel& model, const CnnBatch& batch,
                const std::vector<Label>& labels, std::uint64_t dropout_seed);

// Exact backpropagation for every parameter group. Pure: running
// statistics are not touched; the cache out-param carries the batch
// statistics for the caller's running update.
std::pair<double, CnnGrads> cnn_loss_and_grads(const CnnModel& model,
                                               const CnnBatch& batch,
                                               const std::vector<Label>& labels,
                                               std::uint64_t dropout_seed,
                                               CnnCache* cache = nullptr);

// Flat parameter vector in serialization order
// (conv_w, conv_b, bn_gamma, bn_beta, fc_w, fc_b).
Eigen::VectorXd cnn_pack(const CnnModel& model);
void cnn_unpack(CnnModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd cnn_pack_grads(const CnnGrads& grads);

// Band-filters and z-scores trials with the model's stored statistics.
CnnBatch cnn_prepare(const CnnModel& model, const EpochSet& epochs);

// Full training loop: band filtering, z-scoring, seeded shuffling and
// minibatch Adam. Returns a model ready for Eval-mode prediction.
CnnModel cnn_train(const EpochSet& epochs, const std::vector<BandDef>& bands,
                   const TrainConfig& config);

std::vector<Label> cnn_predict(const CnnModel& model, const EpochSet& epochs);

}  // namespace sme
