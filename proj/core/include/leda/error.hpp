#pragma once

#include <stdexcept>
#include <string>

namespace leda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two fields (or a field and a model) disagree on grid dimensions.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes are incompatible with the requested operation.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A checkpoint does not match the configuration it is loaded into.
class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, UnsupportedVersion, DimOverflow, Truncated, UnknownDtype, BadChannels, BadHeader, Io };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int epoch, int batch, const std::string& what)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace leda
