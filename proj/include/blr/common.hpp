#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace blr {

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vec<double>;
using MatrixXd = Mat<double>;

/// Failure category; the numeric value doubles as the CLI exit code.
enum class ErrorKind : int { Config = 2, Data = 3, Numeric = 4 };

/// Exception carrying the pipeline stage that raised it (e.g. "data.load").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message),
        kind_(kind),
        stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  ErrorKind kind_;
  std::string stage_;
};

inline Error data_error(std::string stage, const std::string& msg) {
  return Error(ErrorKind::Data, std::move(stage), msg);
}

inline Error config_error(std::string stage, const std::string& msg) {
  return Error(ErrorKind::Config, std::move(stage), msg);
}

inline Error numeric_error(std::string stage, const std::string& msg) {
  return Error(ErrorKind::Numeric, std::move(stage), msg);
}

}  // namespace blr
