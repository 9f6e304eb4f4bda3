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

#include "bustr/timeutil.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <optional>

#include "bustr/error.h"

namespace bustr {
namespace {

using std::chrono::days;
using std::chrono::sys_days;

std::mutex& TzMutex() {
  static std::mutex m;
  return m;
}

int64_t FloorDiv(int64_t a, int64_t b) { return a >= 0 ? a / b : (a - b + 1) / b; }

// ISO weekday, Monday = 0.
int IsoWeekday(sys_days d) {
  return static_cast<int>(std::chrono::weekday(d).iso_encoding()) - 1;
}

sys_days IsoWeekOneMonday(int year) {
  const sys_days jan4 = std::chrono::year_month_day(std::chrono::year(year),
                                                    std::chrono::January,
                                                    std::chrono::day(4));
  return jan4 - days(IsoWeekday(jan4));
}

}  // namespace

TimeZone::TimeZone(std::string name) : name_(std::move(name)) {
  utc_ = name_.empty() || name_ == "UTC" || name_ == "Etc/UTC" || name_ == "GMT";
}

int64_t TimeZone::OffsetSeconds(int64_t epoch_s) const {
  if (utc_) return 0;
  std::lock_guard<std::mutex> lock(TzMutex());
  const char* old = std::getenv("TZ");
  std::optional<std::string> saved;
  if (old != nullptr) saved = old;
  setenv("TZ", name_.c_str(), 1);
  tzset();
  const std::time_t t = static_cast<std::time_t>(epoch_s);
  std::tm local{};
  localtime_r(&t, &local);
  const int64_t offset = local.tm_gmtoff;
  if (saved) {
    setenv("TZ", saved->c_str(), 1);
  } else {
    unsetenv("TZ");
  }
  tzset();
  return offset;
}

TimeOfWeek LocalTimeOfWeek(int64_t epoch_s, const TimeZone& tz) {
  const int64_t local = epoch_s + tz.OffsetSeconds(epoch_s);
  const int64_t day = FloorDiv(local, 86400);
  const int64_t sec_of_day = local - day * 86400;
  // 1970-01-01 was a Thursday (ISO index 3).
  const int dow = static_cast<int>(((day % 7) + 7 + 3) % 7);
  return {dow, static_cast<int>(sec_of_day / 1800)};
}

std::string IsoWeek(int64_t epoch_s) {
  const sys_days d{days(FloorDiv(epoch_s, 86400))};
  const sys_days thursday = d - days(IsoWeekday(d)) + days(3);
  const int year = static_cast<int>(std::chrono::year_month_day(thursday).year());
  const int week = static_cast<int>((thursday - IsoWeekOneMonday(year)).count() / 7) + 1;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-W%02d", year, week);
  return buf;
}

int64_t IsoWeekStart(const std::string& iso_week) {
  int year = 0;
  int week = 0;
  char tail = 0;
  if (std::sscanf(iso_week.c_str(), "%d-W%d%c", &year, &week, &tail) != 2 || week < 1 ||
      week > 53) {
    throw Error(ErrorCode::kParse, "bad ISO week '" + iso_week + "'");
  }
  const sys_days monday = IsoWeekOneMonday(year) + days(7 * (week - 1));
  return static_cast<int64_t>(monday.time_since_epoch().count()) * 86400;
}

}  // namespace bustr
