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

#include "bustr/spatial_grid.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <numbers>

#include "bustr/error.h"

namespace bustr {
namespace {

constexpr int kLeafBits = 30;
constexpr uint64_t kLeafMax = (uint64_t{1} << kLeafBits) - 1;
constexpr uint64_t kBelowFaceMask = (uint64_t{1} << 61) - 1;
constexpr double kDegToRad = std::numbers::pi / 180.0;

// Spreads the low 30 bits of x to even bit positions.
uint64_t Spread(uint64_t x) {
  uint64_t r = 0;
  for (int b = 0; b < kLeafBits; ++b) r |= ((x >> b) & 1) << (2 * b);
  return r;
}

uint64_t Compact(uint64_t x) {
  uint64_t r = 0;
  for (int b = 0; b < kLeafBits; ++b) r |= ((x >> (2 * b)) & 1) << b;
  return r;
}

// 60-bit Z-order key, j in the odd (higher) bit of each pair.
uint64_t Interleave(uint64_t i, uint64_t j) {
  return (Spread(j) << 1) | Spread(i);
}

uint32_t LeafCoord(double uv) {
  const double scaled = std::floor((uv + 1.0) * 0.5 * static_cast<double>(kLeafMax + 1));
  if (scaled <= 0.0) return 0;
  if (scaled >= static_cast<double>(kLeafMax)) return static_cast<uint32_t>(kLeafMax);
  return static_cast<uint32_t>(scaled);
}

}  // namespace

GridLevel GridLevel::FromTwice(int twice_level) {
  if (twice_level < 0 || twice_level > kMaxTwiceLevel) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid twice_level out of range: " + std::to_string(twice_level));
  }
  return GridLevel(twice_level);
}

GridLevel GridLevel::FromLevel(double level) {
  const double twice = level * 2.0;
  if (!std::isfinite(twice) || twice != std::floor(twice)) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid level must be an integer or half-integer");
  }
  return FromTwice(static_cast<int>(twice));
}

CellId CellId::FromFacePosition(int face, uint64_t position, GridLevel level) {
  const int t = level.twice();
  if (face < 0 || face > 5) {
    throw Error(ErrorCode::kInvalidArgument, "cell face out of range");
  }
  if (t < 64 && (position >> t) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "cell position has too many bits");
  }
  const uint64_t id = (static_cast<uint64_t>(face) << 61) |
                      (t == 0 ? 0 : position << (61 - t)) |
                      (uint64_t{1} << (60 - t));
  return CellId(id);
}

bool CellId::is_valid() const {
  if (face() > 5) return false;
  const uint64_t low = id_ & kBelowFaceMask;
  if (low == 0) return false;
  const int tz = std::countr_zero(low);
  return tz <= 60;
}

GridLevel CellId::level() const {
  const int tz = std::countr_zero(id_ & kBelowFaceMask);
  return GridLevel::FromTwice(60 - tz);
}

uint64_t CellId::position() const {
  const int t = level().twice();
  if (t == 0) return 0;
  return (id_ & kBelowFaceMask) >> (61 - t);
}

std::string CellId::ToString() const {
  char hex[24];
  auto res = std::to_chars(hex, hex + sizeof(hex), position(), 16);
  return std::to_string(face()) + "/" + std::to_string(level().twice()) + "/" +
         std::string(hex, res.ptr);
}

CellId CellId::FromString(std::string_view s) {
  const auto bad = [&] {
    return Error(ErrorCode::kParse, "bad cell id '" + std::string(s) + "'");
  };
  const size_t a = s.find('/');
  const size_t b = a == std::string_view::npos ? a : s.find('/', a + 1);
  if (b == std::string_view::npos) throw bad();
  int face = 0;
  int twice = 0;
  uint64_t pos = 0;
  const auto parse = [&](std::string_view part, auto& out, int base) {
    if (part.empty()) throw bad();
    auto r = std::from_chars(part.data(), part.data() + part.size(), out, base);
    if (r.ec != std::errc() || r.ptr != part.data() + part.size()) throw bad();
  };
  parse(s.substr(0, a), face, 10);
  parse(s.substr(a + 1, b - a - 1), twice, 10);
  parse(s.substr(b + 1), pos, 16);
  if (face < 0 || face > 5 || twice < 0 || twice > GridLevel::kMaxTwiceLevel) throw bad();
  if (twice < 64 && (pos >> twice) != 0) throw bad();
  return FromFacePosition(face, pos, GridLevel::FromTwice(twice));
}

CellId::LeafRange CellId::leaf_range() const {
  const GridLevel lvl = level();
  const uint64_t full = lvl.twice() == 0 ? 0 : position() << (60 - lvl.twice());
  const uint64_t i = Compact(full);
  const uint64_t j = Compact(full >> 1);
  const uint64_t i_span = uint64_t{1} << (kLeafBits - lvl.i_bits());
  const uint64_t j_span = uint64_t{1} << (kLeafBits - lvl.j_bits());
  return {static_cast<uint32_t>(i), static_cast<uint32_t>(i + i_span),
          static_cast<uint32_t>(j), static_cast<uint32_t>(j + j_span)};
}

FaceUV ProjectToFace(const LatLng& p) {
  const double lat = p.lat * kDegToRad;
  const double lng = p.lng * kDegToRad;
  const double xyz[3] = {std::cos(lat) * std::cos(lng),
                         std::cos(lat) * std::sin(lng), std::sin(lat)};
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::fabs(xyz[a]) > std::fabs(xyz[axis])) axis = a;
  }
  const double major = xyz[axis];
  const int face = axis + (major < 0 ? 3 : 0);
  const double inv = 1.0 / std::fabs(major);
  return {face, xyz[(axis + 1) % 3] * inv, xyz[(axis + 2) % 3] * inv};
}

LatLng UnprojectFromFace(const FaceUV& f) {
  const int axis = f.face % 3;
  const double sign = f.face < 3 ? 1.0 : -1.0;
  double xyz[3];
  xyz[axis] = sign;
  xyz[(axis + 1) % 3] = f.u;
  xyz[(axis + 2) % 3] = f.v;
  const double n = std::sqrt(xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]);
  const double lat = std::asin(xyz[2] / n) / kDegToRad;
  double lng = std::atan2(xyz[1], xyz[0]) / kDegToRad;
  if (lng >= 180.0) lng -= 360.0;
  return {lat, lng};
}

CellId CellAt(const LatLng& p, GridLevel level) {
  if (!p.IsValid()) {
    throw Error(ErrorCode::kInputDomain,
                "invalid lat/lng (" + std::to_string(p.lat) + ", " +
                    std::to_string(p.lng) + ")");
  }
  const FaceUV f = ProjectToFace(p);
  const uint64_t key = Interleave(LeafCoord(f.u), LeafCoord(f.v));
  const int t = level.twice();
  return CellId::FromFacePosition(f.face, t == 0 ? 0 : key >> (60 - t), level);
}

CellId Parent(CellId cell, GridLevel level) {
  const GridLevel own = cell.level();
  if (level > own) {
    throw Error(ErrorCode::kInvalidArgument,
                "parent level " + std::to_string(level.level()) +
                    " is finer than cell level " + std::to_string(own.level()));
  }
  const int drop = own.twice() - level.twice();
  return CellId::FromFacePosition(cell.face(), cell.position() >> drop, level);
}

LatLng CellCenter(CellId cell) {
  const CellId::LeafRange r = cell.leaf_range();
  const double scale = static_cast<double>(kLeafMax + 1);
  const double u = (static_cast<double>(r.i_lo) + static_cast<double>(r.i_hi)) / scale - 1.0;
  const double v = (static_cast<double>(r.j_lo) + static_cast<double>(r.j_hi)) / scale - 1.0;
  return UnprojectFromFace({cell.face(), u, v});
}

}  // namespace bustr
