#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcnet/affine.hpp"
#include "rcnet/rng.hpp"

namespace rcnet {

enum class LossKind { kMse, kSoftmaxCrossEntropy };
enum class TrainTask { kTrig, kSpiral };

// Parameter-shared repeated-composition model in trainable form:
//   h_0 = W1 x + b1,  h_s = relu(A h_{s-1} + b) for s = 1..r,  out = W2 h_r + b2.
// The same (A, b) is applied at every step, so gradients accumulate across
// steps (backpropagation through the shared block).
struct TrainableRCNet {
  int d_in = 2;
  int d_out = 1;
  int n = 8;
  int r = 1;
  Mat W1, A, W2;
  Vec b1, b, b2;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
  static TrainableRCNet make(int d_in, int d_out, int n, int r, Rng& rng);
  std::int64_t param_count() const;
  void validate() const;
};

struct Gradients {
  Mat W1, A, W2;
  Vec b1, b, b2;
  static Gradients zeros_like(const TrainableRCNet& model);
};

// Forward only; X is d_in x B, returns d_out x B.
Mat forward(const TrainableRCNet& model, const Mat& X);

// Batch forward + backward. For kMse, Y is d_out x B and the loss is the
// batch-mean squared error summed over output coordinates. For
// kSoftmaxCrossEntropy, Y is 1 x B holding integer class labels and the loss
// is the batch-mean cross entropy of the softmax over the d_out logits.
// Returns the loss and fills `grads`.
double forward_backward(const TrainableRCNet& model, const Mat& X, const Mat& Y,
                        LossKind loss, Gradients& grads);

struct AdamState {
  Gradients m, v;
  std::int64_t t = 0;
  static AdamState zeros_like(const TrainableRCNet& model);
};

// One Adam update with bias correction.
void adam_step(TrainableRCNet& model, const Gradients& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Two interleaved planar spirals: radius a + theta/pi for class a in {0,1},
// theta drawn uniformly by arc length over [0, 24 pi], plus a uniform offset
// in a disk of radius 0.006, finally mapped into the unit square by
// (x + 26) / 52. X is 2 x (2*per_class); labels are 0/1 per column, class 0
// first.
struct SpiralData {
  Mat X;
  std::vector<int> labels;
};
SpiralData generate_spiral(int per_class, Rng& rng);

struct TrainConfig {
  TrainTask task = TrainTask::kTrig;
  int n = 50;
  std::vector<int> reps = {1, 2, 3};
  int trials = 6;       // per rep count; top and bottom scores are dropped
  int epochs = 200;
  int batch = 200;
  int train_size = 15000;
  int test_size = 3000;
  int tail = 40;        // final epochs averaged into the trial score
  double lr0 = 0.002;
  double lr_decay = 0.9;   // applied every 5 epochs
  std::uint64_t seed = 0x7C0FFEE;
  std::string metrics_path;  // CSV path; empty = no file output
};

TrainConfig trig_defaults(int n);
TrainConfig spiral_defaults(int n);

struct TrainRunResult {
  int r = 0;
  std::vector<double> trial_scores;  // tail-averaged test metric per trial
  double retained_mean = 0.0;        // mean after dropping best and worst
};

struct ExperimentResult {
  std::vector<TrainRunResult> runs;  // one per entry of config.reps
};

// Trains `trials` models per rep count with sequential fixed seeds, logs
// per-epoch metrics to CSV (task,n,r,seed_group,epoch,train_loss,test_metric;
// the test metric is MSE for the regression task and accuracy for the
// classification task), and aggregates trimmed trial scores.
ExperimentResult run_experiment(const TrainConfig& config);

}  // namespace rcnet
