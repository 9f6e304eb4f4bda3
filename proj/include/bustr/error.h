// Copyright 2026 The BusTr Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BUSTR_ERROR_H_
#define BUSTR_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace bustr {

enum class ErrorCode {
  kInvalidArgument,
  kInputDomain,
  kParse,
  kNotFound,
  kNumerical,
  kIo,
  kMismatch,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures surface as this exception. what() is
// "<code-name>: <detail>" so the CLI can print it as a single
// machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace bustr

#endif  // BUSTR_ERROR_H_
