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

#ifndef BUSTR_GEO_H_
#define BUSTR_GEO_H_

#include <cmath>

namespace bustr {

inline constexpr double kEarthRadiusM = 6371008.8;

struct LatLng {
  double lat = 0.0;  // degrees, [-90, 90]
  double lng = 0.0;  // degrees, [-180, 180)

  bool IsValid() const {
    return std::isfinite(lat) && std::isfinite(lng) && lat >= -90.0 &&
           lat <= 90.0 && lng >= -180.0 && lng < 180.0;
  }
  friend bool operator==(const LatLng&, const LatLng&) = default;
};

struct XY {
  double x = 0.0;
  double y = 0.0;
};

double HaversineM(const LatLng& a, const LatLng& b);

// Equirectangular tangent-plane frame around an origin. Accurate to well
// under a centimetre per kilometre at city scale, which is all the shape
// geometry needs; every along-shape distance in the pipeline is measured in
// the frame of its shape so that snapping and cumulative lengths agree.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(const LatLng& origin);

  XY ToXY(const LatLng& p) const;
  LatLng ToLatLng(const XY& p) const;
  const LatLng& origin() const { return origin_; }

 private:
  LatLng origin_;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lng_ = 0.0;
};

}  // namespace bustr

#endif  // BUSTR_GEO_H_
