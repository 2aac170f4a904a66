#include "graspseq/grasp/refine.hpp"

#include <cmath>
#include <deque>

#include "graspseq/errors.hpp"

namespace graspseq {

void RefineConfig::validate() const {
  if (maxIters < 0) throw ConfigError("maxIters must be non-negative");
  if (!(fdStep > 0)) throw ConfigError("fdStep must be positive");
  if (!(armijo > 0 && armijo < 1)) throw ConfigError("armijo factor must lie in (0, 1)");
  if (!(relativeTolerance >= 0)) throw ConfigError("relativeTolerance must be non-negative");
  if (history < 1) throw ConfigError("history must be at least 1");
  if (!(firstStep > 0)) throw ConfigError("firstStep must be positive");
  if (maxBacktracks < 1) throw ConfigError("maxBacktracks must be at least 1");
}

Eigen::VectorXd numericGradient(const GraspObjective& objective, const HandPose& pose, double step) {
  const Eigen::VectorXd x = pose.toVector();
  Eigen::VectorXd g(x.size());
  for (int c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    g[c] = (objective(HandPose::fromVector(xp)) - objective(HandPose::fromVector(xm))) / (2 * step);
  }
  return g;
}

namespace {

struct Pair {
  Eigen::VectorXd s, y;
  double rho;
};

Eigen::VectorXd twoLoop(const std::deque<Pair>& pairs, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = g;
  std::vector<double> a(pairs.size());
  for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
    a[i] = pairs[i].rho * pairs[i].s.dot(q);
    q -= a[i] * pairs[i].y;
  }
  const Pair& last = pairs.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double b = pairs[i].rho * pairs[i].y.dot(q);
    q += (a[i] - b) * pairs[i].s;
  }
  return -q;
}

}  // namespace

RefineResult refineGrasp(const GraspObjective& objective, const HandPose& init, const RefineConfig& config) {
  config.validate();
  RefineResult out;
  out.pose = init;

  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    ++out.evaluations;
    const HandPose p = HandPose::fromVector(x);
    if (!g) return objective(p);
    if (config.gradient == GradientMode::Analytic) return objective.evaluate(p, g).total;
    *g = numericGradient(objective, p, config.fdStep);
    return objective(p);
  };

  Eigen::VectorXd x = init.toVector();
  if (!x.allFinite()) throw NumericError("initial grasp pose is not finite");
  Eigen::VectorXd g;
  double f = evaluate(x, &g);
  if (!std::isfinite(f)) throw NumericError("initial grasp loss is not finite");
  out.trace.push_back(f);
  if (f == 0.0) {
    out.stopReason = "zero loss";
    return out;
  }

  std::deque<Pair> pairs;
  auto steepest = [&] { return Eigen::VectorXd(-g * (config.firstStep / g.lpNorm<Eigen::Infinity>())); };

  for (int iter = 0; iter < config.maxIters; ++iter) {
    if (!g.allFinite()) {
      out.stopReason = "non-finite gradient";
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      out.stopReason = "zero gradient";
      break;
    }
    Eigen::VectorXd d = pairs.empty() ? steepest() : twoLoop(pairs, g);
    double slope = g.dot(d);
    if (!(slope < 0)) {
      pairs.clear();
      d = steepest();
      slope = g.dot(d);
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd xNew;
    double fNew = f;
    for (int k = 0; k < config.maxBacktracks; ++k, step *= 0.5) {
      xNew = x + step * d;
      fNew = evaluate(xNew, nullptr);
      if (std::isfinite(fNew) && fNew <= f + config.armijo * step * slope && fNew < f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.stopReason = "line search failed";
      break;
    }

    Eigen::VectorXd gNew;
    evaluate(xNew, &gNew);
    const Eigen::VectorXd s = xNew - x;
    const Eigen::VectorXd y = gNew - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      pairs.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs.size()) > config.history) pairs.pop_front();
    }

    const double previous = f;
    x = xNew;
    g = gNew;
    f = fNew;
    out.trace.push_back(f);
    if (f == 0.0 || previous - f <= config.relativeTolerance * std::abs(previous)) {
      out.stopReason = f == 0.0 ? "zero loss" : "relative change below tolerance";
      break;
    }
  }
  if (out.stopReason.empty()) out.stopReason = "iteration limit";
  out.pose = HandPose::fromVector(x);
  return out;
}

}  // namespace graspseq
