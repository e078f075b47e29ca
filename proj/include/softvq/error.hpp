// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The softvq Authors.

#pragma once

#include <stdexcept>
#include <string>

namespace softvq {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that cannot be combined by the requested op.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid network, quantizer or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition (bad code index, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input file (dataset, image, checkpoint, bitstream).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bitstream CRC mismatch.
class CrcError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Bitstream magic or version not recognized.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Bitstream was produced with a different checkpoint.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

// Loss or gradient became NaN/Inf during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace softvq
