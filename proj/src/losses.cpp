#include "tilt/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "tilt/kernels.hpp"

namespace tilt {

namespace {

double logistic_loss(double margin, double y) {
  const double yhat = y == 0.0 ? -1.0 : 1.0;
  const double m = yhat * margin;
  // log(1 + e^{-m}) without overflow on either side
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

void check_dims(const LossFamily& fam, std::span<const double> theta,
                std::span<const double> x) {
  if (theta.size() != x.size())
    throw std::invalid_argument("theta dimension " + std::to_string(theta.size()) +
                                " != feature dimension " + std::to_string(x.size()));
  (void)fam;
}

}  // namespace

LossFamily LossFamily::parse(const std::string& name) {
  LossFamily fam;
  if (name == "squared") {
    fam.kind = Kind::squared;
  } else if (name == "absolute") {
    fam.kind = Kind::absolute;
  } else if (name == "logistic") {
    fam.kind = Kind::logistic;
  } else if (name == "point") {
    fam.kind = Kind::point;
  } else if (name.rfind("huber", 0) == 0) {
    fam.kind = Kind::huber;
    if (name.size() > 5) {
      if (name[5] != ':') throw std::invalid_argument("bad loss spec: " + name);
      fam.delta = std::stod(name.substr(6));
    }
    if (!(fam.delta > 0.0)) throw std::invalid_argument("huber delta must be > 0");
  } else {
    throw std::invalid_argument("unknown loss family: " + name);
  }
  return fam;
}

std::string LossFamily::name() const {
  switch (kind) {
    case Kind::squared: return "squared";
    case Kind::absolute: return "absolute";
    case Kind::huber: return "huber:" + std::to_string(delta);
    case Kind::logistic: return "logistic";
    case Kind::point: return "point";
  }
  return "?";
}

double loss_value(const LossFamily& fam, std::span<const double> theta,
                  std::span<const double> x, double y) {
  check_dims(fam, theta, x);
  if (fam.kind == LossFamily::Kind::point) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = theta[j] - x[j];
      s += r * r;
    }
    return s;
  }
  const double margin = kernels::active().dot(theta.data(), x.data(), x.size());
  return margin_loss(fam, margin, y);
}

double margin_loss(const LossFamily& fam, double margin, double y) {
  switch (fam.kind) {
    case LossFamily::Kind::squared: {
      const double r = margin - y;
      return r * r;
    }
    case LossFamily::Kind::absolute:
      return std::abs(margin - y);
    case LossFamily::Kind::huber: {
      const double a = std::abs(margin - y);
      return a <= fam.delta ? 0.5 * a * a : fam.delta * (a - 0.5 * fam.delta);
    }
    case LossFamily::Kind::logistic:
      return logistic_loss(margin, y);
    case LossFamily::Kind::point:
      throw std::invalid_argument("point loss has no margin form");
  }
  throw std::logic_error("unreachable");
}

double margin_derivative(const LossFamily& fam, double margin, double y) {
  switch (fam.kind) {
    case LossFamily::Kind::squared:
      return 2.0 * (margin - y);
    case LossFamily::Kind::absolute: {
      const double r = margin - y;
      return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    }
    case LossFamily::Kind::huber: {
      const double r = margin - y;
      if (std::abs(r) <= fam.delta) return r;
      return r > 0.0 ? fam.delta : -fam.delta;
    }
    case LossFamily::Kind::logistic: {
      const double yhat = y == 0.0 ? -1.0 : 1.0;
      // -yhat * sigmoid(-yhat * margin)
      return -yhat / (1.0 + std::exp(yhat * margin));
    }
    case LossFamily::Kind::point:
      throw std::invalid_argument("point loss has no margin form");
  }
  throw std::logic_error("unreachable");
}

void loss_grad(const LossFamily& fam, std::span<const double> theta, std::span<const double> x,
               double y, std::span<double> out) {
  check_dims(fam, theta, x);
  if (out.size() != theta.size()) throw std::invalid_argument("gradient buffer size mismatch");
  if (fam.kind == LossFamily::Kind::point) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = 2.0 * (theta[j] - x[j]);
    return;
  }
  const double margin = kernels::active().dot(theta.data(), x.data(), x.size());
  const double c = margin_derivative(fam, margin, y);
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = c * x[j];
}

std::vector<double> batch_losses(const LossFamily& fam, std::span<const double> theta,
                                 const Dataset& ds) {
  if (ds.n == 0) throw std::invalid_argument("dataset is empty");
  std::vector<double> f(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) f[i] = loss_value(fam, theta, ds.row(i), ds.targets[i]);
  return f;
}

RowMajor batch_grads(const LossFamily& fam, std::span<const double> theta, const Dataset& ds) {
  if (ds.n == 0) throw std::invalid_argument("dataset is empty");
  RowMajor g;
  g.rows = ds.n;
  g.cols = theta.size();
  g.data.resize(g.rows * g.cols);
  for (std::size_t i = 0; i < ds.n; ++i)
    loss_grad(fam, theta, ds.row(i), ds.targets[i], {g.row(i), g.cols});
  return g;
}

}  // namespace tilt
