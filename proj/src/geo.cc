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

#include "bustr/geo.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bustr {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double HaversineM(const LatLng& a, const LatLng& b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlng = (b.lng - a.lng) * kDegToRad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) *
                       std::sin(dlng / 2) * std::sin(dlng / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, s)));
}

LocalFrame::LocalFrame(const LatLng& origin)
    : origin_(origin),
      m_per_deg_lat_(kEarthRadiusM * kDegToRad),
      m_per_deg_lng_(kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad)) {}

XY LocalFrame::ToXY(const LatLng& p) const {
  return {(p.lng - origin_.lng) * m_per_deg_lng_,
          (p.lat - origin_.lat) * m_per_deg_lat_};
}

LatLng LocalFrame::ToLatLng(const XY& p) const {
  return {origin_.lat + p.y / m_per_deg_lat_,
          origin_.lng + p.x / m_per_deg_lng_};
}

}  // namespace bustr
