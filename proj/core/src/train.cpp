#include "rcnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <vector>

#include "rcnet/errors.hpp"
#include "rcnet/target.hpp"

namespace rcnet {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t base, int n, int r, int g) {
  std::uint64_t s = mix64(base ^ static_cast<std::uint64_t>(n));
  s = mix64(s ^ static_cast<std::uint64_t>(r));
  return mix64(s ^ static_cast<std::uint64_t>(g));
}

Mat uniform_mat(int rows, int cols, double lo, double hi, Rng& rng) {
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = rng.uniform(lo, hi);
  return M;
}

template <class T>
void adam_update(T& param, const T& grad, T& m, T& v, double lr, double beta1,
                 double beta2, double eps, double bc1, double bc2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

struct Dataset {
  Mat X;  // d_in x N
  Mat Y;  // d_out x N (regression) or 1 x N labels (classification)
};

Mat gather_cols(const Mat& M, const std::vector<int>& idx, int from, int count) {
  Mat out(M.rows(), count);
  for (int j = 0; j < count; ++j)
    out.col(j) = M.col(idx[static_cast<std::size_t>(from + j)]);
  return out;
}

double test_metric(const TrainableRCNet& model, const Dataset& test, TrainTask task) {
  const Mat out = forward(model, test.X);
  if (task == TrainTask::kTrig) {
    return (out - test.Y).squaredNorm() / static_cast<double>(test.X.cols());
  }
  int correct = 0;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    Eigen::Index best = 0;
    out.col(c).maxCoeff(&best);
    if (static_cast<int>(best) == static_cast<int>(test.Y(0, c))) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.cols());
}

}  // namespace

TrainableRCNet TrainableRCNet::make(int d_in, int d_out, int n, int r, Rng& rng) {
  if (d_in < 1 || d_out < 1 || n < 1 || r < 1)
    throw ValidationError("model dimensions and rep count must be positive");
  TrainableRCNet model;
  model.d_in = d_in;
  model.d_out = d_out;
  model.n = n;
  model.r = r;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double s_n = 1.0 / std::sqrt(static_cast<double>(n));
  model.W1 = uniform_mat(n, d_in, -s_in, s_in, rng);
  model.b1 = uniform_mat(n, 1, -s_in, s_in, rng);
  model.A = uniform_mat(n, n, -s_n, s_n, rng);
  model.b = uniform_mat(n, 1, -s_n, s_n, rng);
  model.W2 = uniform_mat(d_out, n, -s_n, s_n, rng);
  model.b2 = uniform_mat(d_out, 1, -s_n, s_n, rng);
  return model;
}

std::int64_t TrainableRCNet::param_count() const {
  const std::int64_t nn = n;
  return nn * d_in + nn + nn * nn + nn + static_cast<std::int64_t>(d_out) * nn + d_out;
}

void TrainableRCNet::validate() const {
  if (W1.rows() != n || W1.cols() != d_in || b1.size() != n || A.rows() != n ||
      A.cols() != n || b.size() != n || W2.rows() != d_out || W2.cols() != n ||
      b2.size() != d_out)
    throw ValidationError("trainable model has inconsistent parameter shapes");
}

Gradients Gradients::zeros_like(const TrainableRCNet& model) {
  Gradients g;
  g.W1 = Mat::Zero(model.n, model.d_in);
  g.b1 = Vec::Zero(model.n);
  g.A = Mat::Zero(model.n, model.n);
  g.b = Vec::Zero(model.n);
  g.W2 = Mat::Zero(model.d_out, model.n);
  g.b2 = Vec::Zero(model.d_out);
  return g;
}

Mat forward(const TrainableRCNet& model, const Mat& X) {
  model.validate();
  if (X.rows() != model.d_in) throw ValidationError("input rows must match d_in");
  Mat h = (model.W1 * X).colwise() + model.b1;
  for (int s = 0; s < model.r; ++s)
    h = (((model.A * h).colwise() + model.b).cwiseMax(0.0)).eval();
  return (model.W2 * h).colwise() + model.b2;
}

double forward_backward(const TrainableRCNet& model, const Mat& X, const Mat& Y,
                        LossKind loss, Gradients& grads) {
  model.validate();
  const Eigen::Index B = X.cols();
  if (B < 1) throw ValidationError("batch must be nonempty");
  if (X.rows() != model.d_in) throw ValidationError("input rows must match d_in");
  if (loss == LossKind::kMse) {
    if (Y.rows() != model.d_out || Y.cols() != B)
      throw ValidationError("regression targets must be d_out x batch");
  } else {
    if (Y.rows() != 1 || Y.cols() != B)
      throw ValidationError("class labels must be 1 x batch");
  }

  std::vector<Mat> h(static_cast<std::size_t>(model.r) + 1);
  std::vector<Mat> z(static_cast<std::size_t>(model.r) + 1);
  h[0] = (model.W1 * X).colwise() + model.b1;
  for (int s = 1; s <= model.r; ++s) {
    z[static_cast<std::size_t>(s)] =
        (model.A * h[static_cast<std::size_t>(s - 1)]).colwise() + model.b;
    h[static_cast<std::size_t>(s)] = z[static_cast<std::size_t>(s)].cwiseMax(0.0);
  }
  const Mat out = (model.W2 * h[static_cast<std::size_t>(model.r)]).colwise() + model.b2;

  Mat g_out;
  double loss_value = 0.0;
  if (loss == LossKind::kMse) {
    const Mat diff = out - Y;
    loss_value = diff.squaredNorm() / static_cast<double>(B);
    g_out = diff * (2.0 / static_cast<double>(B));
  } else {
    const Eigen::RowVectorXd col_max = out.colwise().maxCoeff();
    Mat shifted = out;
    shifted.rowwise() -= col_max;
    const Mat expo = shifted.array().exp().matrix();
    const Eigen::RowVectorXd z_norm = expo.colwise().sum();
    Mat probs = expo;
    for (Eigen::Index c = 0; c < B; ++c) probs.col(c) /= z_norm(c);
    g_out = probs;
    for (Eigen::Index c = 0; c < B; ++c) {
      const int label = static_cast<int>(Y(0, c));
      if (label < 0 || label >= model.d_out)
        throw ValidationError("class label out of range");
      loss_value -= std::log(std::max(probs(label, c), 1e-300));
      g_out(label, c) -= 1.0;
    }
    loss_value /= static_cast<double>(B);
    g_out /= static_cast<double>(B);
  }

  grads.W2 = g_out * h[static_cast<std::size_t>(model.r)].transpose();
  grads.b2 = g_out.rowwise().sum();
  Mat d = model.W2.transpose() * g_out;
  grads.A = Mat::Zero(model.n, model.n);
  grads.b = Vec::Zero(model.n);
  for (int s = model.r; s >= 1; --s) {
    const Mat mask =
        (z[static_cast<std::size_t>(s)].array() > 0.0).cast<double>().matrix();
    const Mat md = mask.cwiseProduct(d);
    grads.A += md * h[static_cast<std::size_t>(s - 1)].transpose();
    grads.b += md.rowwise().sum();
    d = model.A.transpose() * md;
  }
  grads.W1 = d * X.transpose();
  grads.b1 = d.rowwise().sum();
  return loss_value;
}

AdamState AdamState::zeros_like(const TrainableRCNet& model) {
  AdamState st;
  st.m = Gradients::zeros_like(model);
  st.v = Gradients::zeros_like(model);
  st.t = 0;
  return st;
}

void adam_step(TrainableRCNet& model, const Gradients& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  adam_update(model.W1, grads.W1, state.m.W1, state.v.W1, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(model.b1, grads.b1, state.m.b1, state.v.b1, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(model.A, grads.A, state.m.A, state.v.A, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(model.b, grads.b, state.m.b, state.v.b, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(model.W2, grads.W2, state.m.W2, state.v.W2, lr, beta1, beta2, eps, bc1, bc2);
  adam_update(model.b2, grads.b2, state.m.b2, state.v.b2, lr, beta1, beta2, eps, bc1, bc2);
}

SpiralData generate_spiral(int per_class, Rng& rng) {
  if (per_class < 1) throw ValidationError("spiral classes need at least one point");
  const double theta_max = 24.0 * kPi;
  const int grid_n = 8192;
  SpiralData data;
  data.X = Mat(2, 2 * per_class);
  data.labels.assign(static_cast<std::size_t>(2 * per_class), 0);
  for (int a = 0; a < 2; ++a) {
    // Cumulative arc length of r(t) = a + t/pi on a fine grid; inverse-CDF
    // sampling makes the draw uniform by arc length rather than by angle.
    std::vector<double> theta(static_cast<std::size_t>(grid_n));
    std::vector<double> cum(static_cast<std::size_t>(grid_n), 0.0);
    auto speed = [&](double t) {
      const double radius = a + t / kPi;
      return std::hypot(radius, 1.0 / kPi);
    };
    for (int i = 0; i < grid_n; ++i)
      theta[static_cast<std::size_t>(i)] = theta_max * i / (grid_n - 1);
    for (int i = 1; i < grid_n; ++i) {
      const double dt = theta[static_cast<std::size_t>(i)] - theta[static_cast<std::size_t>(i - 1)];
      cum[static_cast<std::size_t>(i)] =
          cum[static_cast<std::size_t>(i - 1)] +
          0.5 * dt * (speed(theta[static_cast<std::size_t>(i - 1)]) +
                      speed(theta[static_cast<std::size_t>(i)]));
    }
    for (int k = 0; k < per_class; ++k) {
      const double target_len = rng.uniform01() * cum.back();
      const auto it = std::lower_bound(cum.begin(), cum.end(), target_len);
      std::size_t hi = std::min<std::size_t>(
          static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cum.begin())),
          static_cast<std::size_t>(grid_n - 1));
      const double c0 = cum[hi - 1];
      const double c1 = cum[hi];
      const double frac = (c1 > c0) ? (target_len - c0) / (c1 - c0) : 0.0;
      const double t = theta[hi - 1] + frac * (theta[hi] - theta[hi - 1]);
      const double radius = a + t / kPi;
      double x = radius * std::cos(t);
      double y = radius * std::sin(t);
      const double rho = 0.006 * std::sqrt(rng.uniform01());
      const double ang = rng.uniform(0.0, 2.0 * kPi);
      x += rho * std::cos(ang);
      y += rho * std::sin(ang);
      const int col = a * per_class + k;
      data.X(0, col) = (x + 26.0) / 52.0;
      data.X(1, col) = (y + 26.0) / 52.0;
      data.labels[static_cast<std::size_t>(col)] = a;
    }
  }
  return data;
}

TrainConfig trig_defaults(int n) {
  TrainConfig cfg;
  cfg.task = TrainTask::kTrig;
  cfg.n = n;
  return cfg;
}

TrainConfig spiral_defaults(int n) {
  TrainConfig cfg;
  cfg.task = TrainTask::kSpiral;
  cfg.n = n;
  cfg.epochs = 300;
  cfg.train_size = 20000;
  cfg.test_size = 4000;
  cfg.tail = 60;
  cfg.lr0 = 0.001;
  cfg.lr_decay = 0.95;
  return cfg;
}

ExperimentResult run_experiment(const TrainConfig& config) {
  if (config.n < 1 || config.reps.empty() || config.trials < 1 || config.epochs < 1 ||
      config.batch < 1 || config.train_size < config.batch || config.test_size < 1 ||
      config.tail < 1 || config.tail > config.epochs)
    throw ValidationError("training configuration is inconsistent");
  for (int r : config.reps)
    if (r < 1) throw ValidationError("rep counts must be positive");

  std::ofstream csv;
  if (!config.metrics_path.empty()) {
    csv.open(config.metrics_path);
    if (!csv) throw ValidationError("cannot open metrics file for writing");
    csv << "task,n,r,seed_group,epoch,train_loss,test_metric\n";
  }
  const char* task_name = config.task == TrainTask::kTrig ? "trig" : "spiral";
  const LossKind loss =
      config.task == TrainTask::kTrig ? LossKind::kMse : LossKind::kSoftmaxCrossEntropy;
  const int d_out = config.task == TrainTask::kTrig ? 1 : 2;
  const TargetFunction trig =
      config.task == TrainTask::kTrig ? make_trig2d_target() : TargetFunction{};

  ExperimentResult result;
  for (int r : config.reps) {
    TrainRunResult run;
    run.r = r;
    for (int g = 0; g < config.trials; ++g) {
      Rng rng(trial_seed(config.seed, config.n, r, g));

      Dataset train, test;
      if (config.task == TrainTask::kTrig) {
        auto sample = [&](int count) {
          Dataset ds;
          ds.X = Mat(2, count);
          ds.Y = Mat(1, count);
          for (int c = 0; c < count; ++c) {
            ds.X(0, c) = rng.uniform01();
            ds.X(1, c) = rng.uniform01();
            ds.Y(0, c) = trig.f(ds.X.col(c));
          }
          return ds;
        };
        train = sample(config.train_size);
        test = sample(config.test_size);
      } else {
        const SpiralData tr = generate_spiral(config.train_size / 2, rng);
        const SpiralData te = generate_spiral(config.test_size / 2, rng);
        train.X = tr.X;
        test.X = te.X;
        train.Y = Mat(1, tr.X.cols());
        for (Eigen::Index c = 0; c < tr.X.cols(); ++c)
          train.Y(0, c) = tr.labels[static_cast<std::size_t>(c)];
        test.Y = Mat(1, te.X.cols());
        for (Eigen::Index c = 0; c < te.X.cols(); ++c)
          test.Y(0, c) = te.labels[static_cast<std::size_t>(c)];
        // Standardize both splits with training statistics.
        const Vec mean = train.X.rowwise().mean();
        Vec stdev(2);
        for (int i = 0; i < 2; ++i) {
          const double var =
              (train.X.row(i).array() - mean(i)).square().mean();
          stdev(i) = std::sqrt(std::max(var, 1e-12));
        }
        for (int i = 0; i < 2; ++i) {
          train.X.row(i) = (train.X.row(i).array() - mean(i)) / stdev(i);
          test.X.row(i) = (test.X.row(i).array() - mean(i)) / stdev(i);
        }
      }

      TrainableRCNet model = TrainableRCNet::make(2, d_out, config.n, r, rng);
      AdamState state = AdamState::zeros_like(model);
      Gradients grads = Gradients::zeros_like(model);

      std::vector<int> perm(static_cast<std::size_t>(train.X.cols()));
      std::iota(perm.begin(), perm.end(), 0);
      double tail_sum = 0.0;
      int tail_count = 0;
      for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = config.lr0 * std::pow(config.lr_decay, (epoch - 1) / 5);
        for (std::size_t i = perm.size(); i > 1; --i) {
          const std::size_t j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i)));
          std::swap(perm[i - 1], perm[j]);
        }
        double epoch_loss = 0.0;
        int batches = 0;
        const int usable = static_cast<int>(perm.size()) / config.batch * config.batch;
        for (int start = 0; start < usable; start += config.batch) {
          const Mat xb = gather_cols(train.X, perm, start, config.batch);
          const Mat yb = gather_cols(train.Y, perm, start, config.batch);
          epoch_loss += forward_backward(model, xb, yb, loss, grads);
          adam_step(model, grads, state, lr);
          ++batches;
        }
        epoch_loss /= std::max(batches, 1);
        const double metric = test_metric(model, test, config.task);
        if (csv.is_open()) {
          csv << task_name << ',' << config.n << ',' << r << ',' << g << ',' << epoch
              << ',' << epoch_loss << ',' << metric << '\n';
        }
        if (epoch > config.epochs - config.tail) {
          tail_sum += metric;
          ++tail_count;
        }
      }
      run.trial_scores.push_back(tail_sum / std::max(tail_count, 1));
    }

    std::vector<double> kept = run.trial_scores;
    std::sort(kept.begin(), kept.end());
    if (kept.size() >= 3) {
      kept.erase(kept.begin());
      kept.pop_back();
    }
    run.retained_mean =
        std::accumulate(kept.begin(), kept.end(), 0.0) / static_cast<double>(kept.size());
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace rcnet
