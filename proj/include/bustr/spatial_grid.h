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

// Hierarchical cube-face grid.
//
// The sphere is projected gnomonically onto the six faces of a cube. On each
// face, a point maps to integer leaf coordinates (i, j) with 30 bits each. A
// cell at integer level L keeps the top L bits of both coordinates, so every
// integer-level cell is the four-way subdivision of its parent. A cell at
// half level L + 0.5 keeps L bits of i and L + 1 bits of j: it is an adjacent
// pair of level-(L+1) cells that share everything but the lowest i bit, a
// roughly 2:1 rectangle.
//
// Levels are carried as twice the level ("twice_level"), so 12.5 is 25.
//
// Cell ids are S2-style 64-bit words:
//
//   [face:3][position:twice_level bits][1][zeros]
//
// where position is the Z-order interleave of (j, i) with j in the higher
// bit of each pair. With that ordering the half level is exactly one bit
// shorter than the next finer integer level, and the parent at any coarser
// level is a truncation of the position.

#ifndef BUSTR_SPATIAL_GRID_H_
#define BUSTR_SPATIAL_GRID_H_

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "bustr/geo.h"

namespace bustr {

class GridLevel {
 public:
  static constexpr int kMaxTwiceLevel = 60;

  // Throws Error(kInvalidArgument) outside [0, 60].
  static GridLevel FromTwice(int twice_level);
  // Accepts integer and half-integer levels in [0, 30].
  static GridLevel FromLevel(double level);

  int twice() const { return twice_; }
  double level() const { return twice_ / 2.0; }
  int i_bits() const { return twice_ / 2; }
  int j_bits() const { return (twice_ + 1) / 2; }

  friend auto operator<=>(const GridLevel&, const GridLevel&) = default;

 private:
  explicit constexpr GridLevel(int twice) : twice_(twice) {}
  int twice_ = 0;
};

// The three levels the model embeds, finest first.
inline constexpr int kModelTwiceLevels[3] = {30, 25, 9};  // 15, 12.5, 4.5

class CellId {
 public:
  CellId() = default;
  explicit CellId(uint64_t id) : id_(id) {}

  static CellId FromFacePosition(int face, uint64_t position, GridLevel level);
  // Parses "<face>/<twice_level>/<hex position>"; Error(kParse) on bad input.
  static CellId FromString(std::string_view s);

  uint64_t id() const { return id_; }
  bool is_valid() const;
  int face() const { return static_cast<int>(id_ >> 61); }
  GridLevel level() const;
  uint64_t position() const;
  std::string ToString() const;

  // Leaf-coordinate extent [lo, hi) of this cell on its face, 30-bit units.
  struct LeafRange {
    uint32_t i_lo, i_hi, j_lo, j_hi;
  };
  LeafRange leaf_range() const;

  friend auto operator<=>(const CellId&, const CellId&) = default;

 private:
  uint64_t id_ = 0;
};

// Throws Error(kInputDomain) for invalid coordinates.
CellId CellAt(const LatLng& p, GridLevel level);

// Throws Error(kInvalidArgument) when `level` is finer than the cell's level.
CellId Parent(CellId cell, GridLevel level);

// Face and (u, v) in [-1, 1]^2 of the gnomonic projection; exposed for the
// synthetic world and diagnostics.
struct FaceUV {
  int face;
  double u;
  double v;
};
FaceUV ProjectToFace(const LatLng& p);
LatLng UnprojectFromFace(const FaceUV& f);

// Point at the centre of the cell's leaf-coordinate extent.
LatLng CellCenter(CellId cell);

}  // namespace bustr

template <>
struct std::hash<bustr::CellId> {
  size_t operator()(const bustr::CellId& c) const noexcept {
    return std::hash<uint64_t>{}(c.id());
  }
};

#endif  // BUSTR_SPATIAL_GRID_H_
