#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rcnet/errors.hpp"
#include "rcnet/rng.hpp"
#include "rcnet/train.hpp"

using namespace rcnet;

namespace {

// Collects every shared-parameter entry into one flat vector so the finite
// difference sweep can address parameters uniformly.
std::vector<double*> param_refs(TrainableRCNet& model) {
  std::vector<double*> out;
  const auto add_mat = [&out](Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(&m(i, j));
  };
  const auto add_vec = [&out](Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(&v(i));
  };
  add_mat(model.W1);
  add_vec(model.b1);
  add_mat(model.A);
  add_vec(model.b);
  add_mat(model.W2);
  add_vec(model.b2);
  return out;
}

std::vector<double> grad_flat(const TrainableRCNet& model, const Gradients& g) {
  TrainableRCNet tmp = model;
  tmp.W1 = g.W1;
  tmp.b1 = g.b1;
  tmp.A = g.A;
  tmp.b = g.b;
  tmp.W2 = g.W2;
  tmp.b2 = g.b2;
  std::vector<double> out;
  for (double* p : param_refs(tmp)) out.push_back(*p);
  return out;
}

// Smallest |pre-activation| across all steps and batch columns. Finite
// differences are only trustworthy when no unit sits on the relu kink.
double min_kink_margin(const TrainableRCNet& model, const Mat& X) {
  Mat h = model.W1 * X;
  h.colwise() += model.b1;
  double margin = std::numeric_limits<double>::infinity();
  for (int s = 1; s <= model.r; ++s) {
    Mat z = model.A * h;
    z.colwise() += model.b;
    margin = std::min(margin, z.cwiseAbs().minCoeff());
    h = z.cwiseMax(0.0);
  }
  return margin;
}

}  // namespace

TEST_CASE("trainable model: shapes, parameter count, validation") {
  Rng rng(1234);
  const TrainableRCNet m = TrainableRCNet::make(2, 1, 8, 3, rng);
  CHECK(m.W1.rows() == 8);
  CHECK(m.W1.cols() == 2);
  CHECK(m.A.rows() == 8);
  CHECK(m.A.cols() == 8);
  CHECK(m.W2.rows() == 1);
  CHECK(m.W2.cols() == 8);
  CHECK(m.param_count() == 8 * 2 + 8 + 8 * 8 + 8 + 1 * 8 + 1);

  // Init range: |entry| <= 1/sqrt(fan_in).
  CHECK(m.W1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(2.0));
  CHECK(m.A.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));

  Rng rng2(5);
  CHECK_THROWS_AS(TrainableRCNet::make(0, 1, 4, 1, rng2), ValidationError);
  CHECK_THROWS_AS(TrainableRCNet::make(2, 1, 4, 0, rng2), ValidationError);
}

TEST_CASE("forward agrees with an explicit composition loop") {
  Rng rng(77);
  const TrainableRCNet m = TrainableRCNet::make(3, 2, 6, 4, rng);
  Mat X(3, 5);
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = rng.uniform(-1.0, 1.0);
  const Mat got = forward(m, X);
  CHECK(got.rows() == 2);
  CHECK(got.cols() == 5);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    Vec h = m.W1 * X.col(c) + m.b1;
    for (int s = 0; s < m.r; ++s) h = (m.A * h + m.b).cwiseMax(0.0);
    const Vec y = m.W2 * h + m.b2;
    CHECK((got.col(c) - y).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("analytic gradients match central differences for both losses") {
  const double h_step = 1e-6;
  const double kink_floor = 1e-3;

  for (const LossKind loss : {LossKind::kMse, LossKind::kSoftmaxCrossEntropy}) {
    const int d_out = (loss == LossKind::kMse) ? 1 : 3;
    Rng rng(loss == LossKind::kMse ? 42u : 43u);
    TrainableRCNet model = TrainableRCNet::make(2, d_out, 5, 3, rng);
    Mat X(2, 4);
    Mat Y;
    // Resample inputs until every relu pre-activation clears the kink floor,
    // so the loss is smooth in the finite-difference neighbourhood.
    for (int attempt = 0;; ++attempt) {
      REQUIRE(attempt < 200);
      for (Eigen::Index j = 0; j < X.cols(); ++j)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
          X(i, j) = rng.uniform(-1.0, 1.0);
      if (min_kink_margin(model, X) > kink_floor) break;
    }
    if (loss == LossKind::kMse) {
      Y.resize(1, 4);
      for (Eigen::Index j = 0; j < 4; ++j) Y(0, j) = rng.uniform(-1.0, 1.0);
    } else {
      Y.resize(1, 4);
      for (Eigen::Index j = 0; j < 4; ++j)
        Y(0, j) = static_cast<double>(rng.below(static_cast<std::uint64_t>(d_out)));
    }

    Gradients grads = Gradients::zeros_like(model);
    forward_backward(model, X, Y, loss, grads);
    const std::vector<double> analytic = grad_flat(model, grads);

    std::vector<double*> refs = param_refs(model);
    REQUIRE(static_cast<std::int64_t>(refs.size()) == model.param_count());
    Gradients scratch = Gradients::zeros_like(model);
    double worst = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const double saved = *refs[i];
      *refs[i] = saved + h_step;
      const double lp = forward_backward(model, X, Y, loss, scratch);
      *refs[i] = saved - h_step;
      const double lm = forward_backward(model, X, Y, loss, scratch);
      *refs[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h_step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-4});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("softmax cross entropy rejects out-of-range labels") {
  Rng rng(9);
  const TrainableRCNet model = TrainableRCNet::make(2, 3, 4, 2, rng);
  Mat X = Mat::Zero(2, 2);
  Mat Y(1, 2);
  Y << 0.0, 3.0;  // 3 is outside {0,1,2}
  Gradients grads = Gradients::zeros_like(model);
  CHECK_THROWS_AS(forward_backward(model, X, Y, LossKind::kSoftmaxCrossEntropy, grads),
                  ValidationError);
}

TEST_CASE("adam drives a convex problem toward its minimum") {
  // Fit out = W2 relu(A (W1 x + b1) + b) + b2 to the constant 2 at x = 0.
  Rng rng(321);
  TrainableRCNet model = TrainableRCNet::make(1, 1, 4, 1, rng);
  AdamState state = AdamState::zeros_like(model);
  Gradients grads = Gradients::zeros_like(model);
  Mat X = Mat::Zero(1, 8);
  Mat Y = Mat::Constant(1, 8, 2.0);
  const double loss0 = forward_backward(model, X, Y, LossKind::kMse, grads);
  double loss = loss0;
  for (int it = 0; it < 400; ++it) {
    loss = forward_backward(model, X, Y, LossKind::kMse, grads);
    adam_step(model, grads, state, 0.01);
  }
  CHECK(loss < loss0);
  CHECK(loss < 1e-2);
  CHECK(state.t == 400);
}

TEST_CASE("spiral sampler: shapes, labels, containment, determinism") {
  Rng rng(2024);
  const SpiralData data = generate_spiral(50, rng);
  CHECK(data.X.rows() == 2);
  CHECK(data.X.cols() == 100);
  CHECK(data.labels.size() == 100);
  for (int c = 0; c < 50; ++c) CHECK(data.labels[static_cast<std::size_t>(c)] == 0);
  for (int c = 50; c < 100; ++c) CHECK(data.labels[static_cast<std::size_t>(c)] == 1);
  CHECK(data.X.minCoeff() >= 0.0);
  CHECK(data.X.maxCoeff() <= 1.0);
  // Same seed, same draw.
  Rng rng_b(2024);
  const SpiralData again = generate_spiral(50, rng_b);
  CHECK((data.X - again.X).cwiseAbs().maxCoeff() == 0.0);

  Rng rng_c(7);
  CHECK_THROWS_AS(generate_spiral(0, rng_c), ValidationError);
}

TEST_CASE("experiment smoke run writes metrics and aggregates trimmed scores") {
  namespace fs = std::filesystem;
  const fs::path csv = fs::temp_directory_path() / "rcnet_train_smoke.csv";
  std::error_code ec;
  fs::remove(csv, ec);

  TrainConfig config = trig_defaults(6);
  config.reps = {1, 2};
  config.trials = 3;
  config.epochs = 4;
  config.batch = 50;
  config.train_size = 200;
  config.test_size = 80;
  config.tail = 2;
  config.metrics_path = csv.string();

  const ExperimentResult result = run_experiment(config);
  REQUIRE(result.runs.size() == 2);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const TrainRunResult& run = result.runs[i];
    CHECK(run.r == config.reps[i]);
    CHECK(run.trial_scores.size() == 3);
    // Three trials, best and worst dropped: the retained mean is the median.
    std::vector<double> sorted = run.trial_scores;
    std::sort(sorted.begin(), sorted.end());
    CHECK(run.retained_mean == doctest::Approx(sorted[1]).epsilon(1e-12));
    for (const double s : run.trial_scores) CHECK(std::isfinite(s));
  }

  std::ifstream in(csv);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "task,n,r,seed_group,epoch,train_loss,test_metric");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  // reps x trials x epochs
  CHECK(rows == 2 * 3 * 4);
  in.close();
  fs::remove(csv, ec);
}

TEST_CASE("experiment config validation") {
  TrainConfig bad = trig_defaults(4);
  bad.epochs = 3;
  bad.tail = 10;  // tail longer than the run
  CHECK_THROWS_AS(run_experiment(bad), ValidationError);

  TrainConfig bad2 = trig_defaults(4);
  bad2.train_size = 10;
  bad2.batch = 50;  // batch larger than the training set
  CHECK_THROWS_AS(run_experiment(bad2), ValidationError);
}
