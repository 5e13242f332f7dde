// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace seqrec {

// Every library failure derives from Error. The CLI maps the three families
// (config, data, training) onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad argument to a numeric or sampling routine (rate outside [0,1), tau
// outside (0,1), ...).
class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDatasetError : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public DataError {
 public:
  using DataError::DataError;
};

class SamplingError : public DataError {
 public:
  using DataError::DataError;
};

class ContextError : public DataError {
 public:
  using DataError::DataError;
};

class IndexError : public DataError {
 public:
  using DataError::DataError;
};

class LineageError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NumericError : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

// Shape mismatches are programming errors rather than data errors, but they
// still surface as exceptions so tests can assert on them.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqrec
