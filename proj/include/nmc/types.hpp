#ifndef NMC_TYPES_HPP
#define NMC_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Thrown on non-finite or out-of-range arguments.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// Regression design matrix unusable at a given backward step.
class DegenerateBasis : public std::runtime_error {
 public:
  DegenerateBasis(const std::string& what, Index step)
      : std::runtime_error(what + " (backward step " + std::to_string(step) + ")"),
        step_(step) {}
  Index step() const { return step_; }

 private:
  Index step_;
};

// Picard iteration failed to contract.
class ConvergenceFailure : public std::runtime_error {
 public:
  explicit ConvergenceFailure(const std::string& what) : std::runtime_error(what) {}
};

// Finite-difference solve blew up; caller should refine the grid.
class SchemeFailure : public std::runtime_error {
 public:
  explicit SchemeFailure(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Eigen::Ref<const Vector>& v) {
  return v.allFinite();
}

}  // namespace nmc

#endif  // NMC_TYPES_HPP
