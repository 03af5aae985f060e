#include "gradient_suite.hpp"

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "weldad/nn/layers.hpp"

namespace weldad::testing {

namespace {

using nn::Batch;
using nn::Matrix;

// Inputs bounded away from zero so piecewise-linear kinks are never
// straddled by the finite-difference step.
Batch kink_free_batch(Rng& rng, int n, int rows, int cols) {
  Batch b = random_batch(rng, n, rows, cols);
  for (Matrix& m : b) {
    m = m.unaryExpr([](double v) { return v >= 0.0 ? v + 0.05 : v - 0.05; });
  }
  return b;
}

int pick(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Runs forward + backward with upstream gradient w, then compares every
// requested matrix against finite differences of probe(forward(x), w).
template <typename Forward, typename Backward>
double check(Batch& x, std::vector<nn::Parameter*> params, Forward forward,
             Backward backward, Rng& rng, double h) {
  Batch out = forward(x);
  Batch w;
  for (const Matrix& o : out) w.push_back(random_matrix(rng, o.rows(), o.cols()));
  for (nn::Parameter* p : params) p->zero_grad();
  const Batch gx = backward(w);

  double worst = 0.0;
  auto loss = [&] { return probe(forward(x), w); };
  for (nn::Parameter* p : params) {
    const Matrix analytic = p->grad;
    worst = std::max(worst, max_rel_error(analytic, numeric_grad(p->value, loss, h)));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, max_rel_error(gx[i], numeric_grad(x[i], loss, h)));
  }
  return worst;
}

Batch wrap(const Matrix& m) { return Batch{m}; }

}  // namespace

std::vector<LayerGradReport> run_gradient_suite(int instances, std::uint64_t seed,
                                                double h) {
  Rng rng(seed);
  std::vector<LayerGradReport> reports = {
      {"Conv1D"},  {"ConvTranspose1D"}, {"BatchNorm1D/train"}, {"BatchNorm1D/eval"},
      {"Linear"},  {"Dropout"},         {"LeakyReLU"},         {"ReLU"},
      {"PReLU"}};
  auto record = [&](std::size_t idx, double err) {
    reports[idx].instances += 1;
    reports[idx].max_rel_error = std::max(reports[idx].max_rel_error, err);
  };

  for (int n = 0; n < instances; ++n) {
    const int batch = pick(rng, 1, 3);
    const int cin = pick(rng, 1, 4), cout = pick(rng, 1, 4), t = pick(rng, 3, 7);

    {
      nn::Conv1d conv(cin, cout, 3, "c");
      conv.reset_parameters(rng);
      Batch x = random_batch(rng, batch, cin, t);
      record(0, check(x, conv.parameters(),
                      [&](const Batch& in) { return conv.forward(in); },
                      [&](const Batch& g) { return conv.backward(g); }, rng, h));
    }
    {
      nn::ConvTranspose1d deconv(cin, cout, 3, "d");
      deconv.reset_parameters(rng);
      Batch x = random_batch(rng, batch, cin, t);
      record(1, check(x, deconv.parameters(),
                      [&](const Batch& in) { return deconv.forward(in); },
                      [&](const Batch& g) { return deconv.backward(g); }, rng, h));
    }
    {
      nn::BatchNorm1d bn(cin, true, "bn");
      bn.gamma.value = random_matrix(rng, cin, 1);
      bn.beta.value = random_matrix(rng, cin, 1);
      Batch x = random_batch(rng, batch, cin, t);
      record(2, check(x, {&bn.gamma, &bn.beta},
                      [&](const Batch& in) { return bn.forward(in, nn::Mode::kTrain); },
                      [&](const Batch& g) { return bn.backward(g); }, rng, h));
    }
    {
      nn::BatchNorm1d bn(cin, true, "bn");
      bn.gamma.value = random_matrix(rng, cin, 1);
      bn.beta.value = random_matrix(rng, cin, 1);
      bn.running_mean.value = random_matrix(rng, cin, 1);
      bn.running_var.value = random_matrix(rng, cin, 1).cwiseAbs().array() + 0.5;
      Batch x = random_batch(rng, batch, cin, t);
      record(3, check(x, {&bn.gamma, &bn.beta},
                      [&](const Batch& in) { return bn.forward(in, nn::Mode::kEval); },
                      [&](const Batch& g) { return bn.backward(g); }, rng, h));
    }
    {
      nn::Linear lin(cin, cout, "l");
      lin.reset_parameters(rng);
      Batch x = wrap(random_matrix(rng, cin, batch));
      record(4, check(x, lin.parameters(),
                      [&](const Batch& in) { return wrap(lin.forward(in[0])); },
                      [&](const Batch& g) { return wrap(lin.backward(g[0])); }, rng, h));
    }
    {
      nn::Dropout drop(0.5);
      const std::uint64_t mask_seed = rng.next_u64();
      Batch x = wrap(random_matrix(rng, cin, batch));
      record(5, check(x, {},
                      [&](const Batch& in) {
                        Rng mask_rng(mask_seed);  // same mask on every evaluation
                        return wrap(drop.forward(in[0], nn::Mode::kTrain, mask_rng));
                      },
                      [&](const Batch& g) { return wrap(drop.backward(g[0])); }, rng, h));
    }
    {
      nn::LeakyReLU act(0.01);
      Batch x = kink_free_batch(rng, batch, cin, t);
      record(6, check(x, {},
                      [&](const Batch& in) { return act.forward(in); },
                      [&](const Batch& g) { return act.backward(g); }, rng, h));
    }
    {
      nn::ReLU act;
      Batch x = kink_free_batch(rng, 1, cin, batch);
      record(7, check(x, {},
                      [&](const Batch& in) { return wrap(act.forward(in[0])); },
                      [&](const Batch& g) { return wrap(act.backward(g[0])); }, rng, h));
    }
    {
      nn::PReLU act("p", rng.uniform(0.05, 0.5));
      Batch x = kink_free_batch(rng, batch, cin, t);
      record(8, check(x, act.parameters(),
                      [&](const Batch& in) { return act.forward(in); },
                      [&](const Batch& g) { return act.backward(g); }, rng, h));
    }
  }
  return reports;
}

}  // namespace weldad::testing
