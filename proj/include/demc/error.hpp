// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace demc {

  // Base class of every error raised by the library.
  class Error : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  // Tensor shapes or operator contracts violated by the caller.
  class ShapeError : public Error
  {
  public:
    using Error::Error;
  };

  // Filesystem failures and malformed files.
  class IoError : public Error
  {
  public:
    using Error::Error;
  };

  // NaN/Inf produced where finite values are required.
  class NumericError : public Error
  {
  public:
    using Error::Error;
  };

  // A checkpoint does not fit the model or format it is loaded into.
  class CheckpointError : public Error
  {
  public:
    using Error::Error;
  };

} // namespace demc
