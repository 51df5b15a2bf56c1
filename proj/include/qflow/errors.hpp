#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// |psi| fell under the node floor inside the decomposition window.
class NodeEncountered : public Error {
  public:
    NodeEncountered(std::size_t index, double x)
        : Error("wavefunction node encountered at index " + std::to_string(index) +
                " (x = " + std::to_string(x) + ")"),
          index_(index), x_(x) {}

    std::size_t index() const noexcept { return index_; }
    double x() const noexcept { return x_; }

  private:
    std::size_t index_;
    double x_;
};

/// Neighbouring trajectories touched or crossed (J <= J_floor in 1D).
class TrajectoryCrossing : public Error {
  public:
    TrajectoryCrossing(std::size_t label_index, double t, const std::string& what)
        : Error("trajectory crossing at label " + std::to_string(label_index) +
                ", t = " + std::to_string(t) + ": " + what),
          label_index_(label_index), t_(t) {}

    std::size_t label_index() const noexcept { return label_index_; }
    double time() const noexcept { return t_; }

  private:
    std::size_t label_index_;
    double t_;
};

/// Time integration diverged (energy drift beyond the abort threshold).
class InstabilityError : public Error {
  public:
    InstabilityError(double t, double drift)
        : Error("integration unstable at t = " + std::to_string(t) +
                ": relative energy drift " + std::to_string(drift)),
          t_(t), drift_(drift) {}

    double time() const noexcept { return t_; }
    double drift() const noexcept { return drift_; }

  private:
    double t_;
    double drift_;
};

}  // namespace qflow
