#ifndef DEFRAD_ERRORS_HPP
#define DEFRAD_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace defrad {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// geometry

class DegenerateNeighborhood : public Error {
 public:
  DegenerateNeighborhood(std::size_t point_index, const std::string& what)
      : Error(what), point_index_(point_index) {}
  std::size_t point_index() const { return point_index_; }

 private:
  std::size_t point_index_;
};

class MismatchedFrameShape : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// cpd

class DegenerateInit : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

class UnsupportedRows : public Error {
 public:
  explicit UnsupportedRows(std::vector<std::size_t> rows)
      : Error(std::to_string(rows.size()) +
              " template points have no correspondence support"),
        rows_(std::move(rows)) {}
  const std::vector<std::size_t>& rows() const { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

// em_scatter

class SourceCoincident : public Error {
 public:
  using Error::Error;
};

class NearFieldSingular : public Error {
 public:
  using Error::Error;
};

// radar_model / radar_dsp

class EmptySelection : public Error {
 public:
  using Error::Error;
};

class NonuniformArray : public Error {
 public:
  using Error::Error;
};

class ZeroSample : public Error {
 public:
  ZeroSample(std::size_t index)
      : Error("zero-magnitude sample at slow-time index " +
              std::to_string(index) + "; phase undefined"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// metrics / pipeline

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroVariance : public Error {
 public:
  using Error::Error;
};

/// Raised by the pipeline; carries the name of the stage that failed.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace defrad

#endif  // DEFRAD_ERRORS_HPP
