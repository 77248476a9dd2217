#include "dedpo/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace dedpo {

namespace {

struct Layout {
  int emb, w1, b1, w2, b2, w3, b3, total;
  explicit Layout(const DenoiserSpec& s) {
    const int in = s.input_dim();
    emb = 0;
    w1 = emb + (s.vocab + 1) * s.emb_dim;
    b1 = w1 + s.hidden * in;
    w2 = b1 + s.hidden;
    b2 = w2 + s.hidden * s.hidden;
    w3 = b2 + s.hidden;
    b3 = w3 + s.data_dim * s.hidden;
    total = b3 + s.data_dim;
  }
};

using MapMat = Eigen::Map<const Mat>;
using MapVec = Eigen::Map<const Vec>;
using MutMat = Eigen::Map<Mat>;
using MutVec = Eigen::Map<Vec>;

}  // namespace

int DenoiserSpec::param_count() const { return Layout(*this).total; }

ToyDenoiser::ToyDenoiser(const DenoiserSpec& spec)
    : spec_(spec), theta_(Vec::Zero(spec.param_count())) {}

ToyDenoiser ToyDenoiser::random_init(const DenoiserSpec& spec, RngStream rng) {
  ToyDenoiser m(spec);
  const Layout L(spec);
  double* th = m.theta_.data();
  for (int i = L.emb; i < L.w1; ++i) th[i] = 0.5 * rng.normal();
  auto glorot = [&](int begin, int end, int fan_in, int fan_out) {
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = begin; i < end; ++i) th[i] = rng.uniform(-lim, lim);
  };
  glorot(L.w1, L.b1, spec.input_dim(), spec.hidden);
  glorot(L.w2, L.b2, spec.hidden, spec.hidden);
  glorot(L.w3, L.b3, spec.hidden, spec.data_dim);
  return m;
}

Vec ToyDenoiser::predict(const Vec& x, double t_norm, int cond) const {
  Cache cache;
  return predict(x, t_norm, cond, cache);
}

Vec ToyDenoiser::predict(const Vec& x, double t_norm, int cond,
                         Cache& cache) const {
  if (x.size() != spec_.data_dim)
    throw std::invalid_argument("predict: wrong input dimension");
  if (cond < 0 || cond > spec_.vocab)
    throw std::invalid_argument("predict: condition id out of range");
  const Layout L(spec_);
  const int in = spec_.input_dim();
  const double* th = theta_.data();

  Vec h0(in);
  h0.head(spec_.data_dim) = x;
  h0[spec_.data_dim] = t_norm;
  h0.tail(spec_.emb_dim) =
      MapVec(th + L.emb + cond * spec_.emb_dim, spec_.emb_dim);

  MapMat W1(th + L.w1, spec_.hidden, in);
  MapVec b1(th + L.b1, spec_.hidden);
  MapMat W2(th + L.w2, spec_.hidden, spec_.hidden);
  MapVec b2(th + L.b2, spec_.hidden);
  MapMat W3(th + L.w3, spec_.data_dim, spec_.hidden);
  MapVec b3(th + L.b3, spec_.data_dim);

  cache.input = std::move(h0);
  cache.cond = cond;
  cache.a1 = ((W1 * cache.input + b1).array().tanh()).matrix();
  cache.a2 = ((W2 * cache.a1 + b2).array().tanh()).matrix();
  return W3 * cache.a2 + b3;
}

void ToyDenoiser::accumulate_grad(const Cache& cache, const Vec& grad_out,
                                  Vec& grad) const {
  const Layout L(spec_);
  if (grad.size() != L.total)
    throw std::invalid_argument("accumulate_grad: grad buffer has wrong size");
  const double* th = theta_.data();
  double* g = grad.data();
  const int in = spec_.input_dim();

  MapMat W1(th + L.w1, spec_.hidden, in);
  MapMat W2(th + L.w2, spec_.hidden, spec_.hidden);
  MapMat W3(th + L.w3, spec_.data_dim, spec_.hidden);

  MutMat gW3(g + L.w3, spec_.data_dim, spec_.hidden);
  gW3.noalias() += grad_out * cache.a2.transpose();
  MutVec(g + L.b3, spec_.data_dim) += grad_out;

  Vec gz2 = (W3.transpose() * grad_out).cwiseProduct(
      (1.0 - cache.a2.array().square()).matrix());
  MutMat gW2(g + L.w2, spec_.hidden, spec_.hidden);
  gW2.noalias() += gz2 * cache.a1.transpose();
  MutVec(g + L.b2, spec_.hidden) += gz2;

  Vec gz1 = (W2.transpose() * gz2).cwiseProduct(
      (1.0 - cache.a1.array().square()).matrix());
  MutMat gW1(g + L.w1, spec_.hidden, in);
  gW1.noalias() += gz1 * cache.input.transpose();
  MutVec(g + L.b1, spec_.hidden) += gz1;

  Vec gh0 = W1.transpose() * gz1;
  MutVec(g + L.emb + cache.cond * spec_.emb_dim, spec_.emb_dim) +=
      gh0.tail(spec_.emb_dim);
}

}  // namespace dedpo
