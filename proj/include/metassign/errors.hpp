// Copyright 2026 The metassign Authors.
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

namespace metassign {

// Base class for every error raised by the library. kind() is a short stable
// token used by the command line front end for machine-parsable messages.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define METASSIGN_ERROR_TYPE(Name, token)                                 \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(token, what) {}        \
  }

METASSIGN_ERROR_TYPE(ParseError, "parse");
METASSIGN_ERROR_TYPE(ValidationError, "validation");
METASSIGN_ERROR_TYPE(IntegrityError, "integrity");
METASSIGN_ERROR_TYPE(UnsupportedVersionError, "unsupported-version");
METASSIGN_ERROR_TYPE(ScenarioInfeasibleError, "scenario-infeasible");
METASSIGN_ERROR_TYPE(GenerationError, "generation");
METASSIGN_ERROR_TYPE(DimensionError, "dimension");
METASSIGN_ERROR_TYPE(IndexError, "index");
METASSIGN_ERROR_TYPE(ContractError, "contract");
METASSIGN_ERROR_TYPE(ConfigError, "config");
METASSIGN_ERROR_TYPE(AdaptationError, "adaptation");
METASSIGN_ERROR_TYPE(MetricError, "metric");
METASSIGN_ERROR_TYPE(IoError, "io");

#undef METASSIGN_ERROR_TYPE

}  // namespace metassign
