#pragma once

#include <string>
#include <vector>

#include "graspseq/grasp/losses.hpp"

namespace graspseq {

enum class GradientMode { Analytic, CentralDifference };

struct RefineConfig {
  int maxIters = 200;
  GradientMode gradient = GradientMode::Analytic;
  double fdStep = 1e-5;
  double armijo = 1e-4;
  double relativeTolerance = 1e-6;
  int history = 8;            // L-BFGS memory
  double firstStep = 0.01;    // largest parameter change of the first, steepest-descent trial
  int maxBacktracks = 40;

  void validate() const;  // ConfigError
};

struct RefineResult {
  HandPose pose;
  std::vector<double> trace;  // trace[0] is the initial loss, one entry per accepted step after it
  int evaluations = 0;
  std::string stopReason;
};

// Limited-memory BFGS with backtracking Armijo line search. Only decreasing
// steps are accepted, so the trace is non-increasing. Throws NumericError when
// the initial loss is not finite.
RefineResult refineGrasp(const GraspObjective& objective, const HandPose& init, const RefineConfig& config = {});

// Central-difference gradient of the objective in pose-vector coordinates.
Eigen::VectorXd numericGradient(const GraspObjective& objective, const HandPose& pose, double step);

}  // namespace graspseq
