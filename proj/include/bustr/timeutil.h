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

#ifndef BUSTR_TIMEUTIL_H_
#define BUSTR_TIMEUTIL_H_

#include <cstdint>
#include <string>

namespace bustr {

// IANA zone resolved through the C library's TZ handling. "UTC", "Etc/UTC"
// and the empty string short-circuit to a zero offset.
class TimeZone {
 public:
  TimeZone() = default;
  explicit TimeZone(std::string name);

  // Seconds east of UTC at the given instant.
  int64_t OffsetSeconds(int64_t epoch_s) const;
  const std::string& name() const { return name_; }
  bool is_utc() const { return utc_; }

 private:
  std::string name_ = "UTC";
  bool utc_ = true;
};

struct TimeOfWeek {
  int day_of_week = 0;     // Monday = 0 ... Sunday = 6
  int half_hour_slice = 0;  // [0, 48)
};

TimeOfWeek LocalTimeOfWeek(int64_t epoch_s, const TimeZone& tz);

// ISO-8601 week of the UTC instant, e.g. "2024-W03". Weeks start Monday
// 00:00 UTC.
std::string IsoWeek(int64_t epoch_s);

// Epoch seconds of Monday 00:00 UTC of the given ISO week.
int64_t IsoWeekStart(const std::string& iso_week);

}  // namespace bustr

#endif  // BUSTR_TIMEUTIL_H_
