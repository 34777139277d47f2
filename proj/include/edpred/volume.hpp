#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "edpred/errors.hpp"

namespace edpred {

// Mask label codes. Prostate and fascia are disjoint structures.
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kProstate = 1;
inline constexpr std::uint8_t kFascia = 2;

struct Dims3 {
    int nx = 0, ny = 0, nz = 0;
    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool operator==(const Dims3&) const = default;
};

struct Spacing3 {
    double x = 1.0, y = 1.0, z = 1.0;
    bool operator==(const Spacing3&) const = default;
};

// Scalar voxel grid, x-fastest ordering: index = x + nx*(y + ny*z).
struct Volume3D {
    Dims3 dims;
    Spacing3 spacing_mm;
    std::vector<float> data;

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims.nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.ny) * static_cast<std::size_t>(z));
    }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
};

// Labeled voxel grid; same layout as Volume3D.
struct MaskVolume {
    Dims3 dims;
    Spacing3 spacing_mm;
    std::vector<std::uint8_t> labels;

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims.nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims.ny) * static_cast<std::size_t>(z));
    }
    std::uint8_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
    std::uint8_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }
};

struct ImageSlice {
    int nx = 0, ny = 0;
    double sx = 1.0, sy = 1.0;
    int z_index = 0;
    std::vector<float> data;

    float at(int x, int y) const { return data[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
    float& at(int x, int y) { return data[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
};

struct MaskSlice {
    int nx = 0, ny = 0;
    double sx = 1.0, sy = 1.0;
    int z_index = 0;
    std::vector<std::uint8_t> labels;

    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
    std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * y]; }
};

void validate(const Volume3D& v);
void validate(const MaskVolume& m);

ImageSlice extract_slice(const Volume3D& v, int z);
MaskSlice extract_slice(const MaskVolume& m, int z);

// Binary mask (labels in {0,1}) marking voxels equal to `label`.
MaskSlice binary_component(const MaskSlice& m, std::uint8_t label);
MaskVolume binary_component(const MaskVolume& m, std::uint8_t label);

// Minimal and maximal z containing a prostate voxel.
std::pair<int, int> prostate_slice_range(const MaskVolume& m);

struct Centroid {
    double x = 0.0, y = 0.0;
};

// Sub-voxel positions are carried on a 2^-26 voxel grid so that integer
// translations and right-angle rotations of a mask move every derived
// coordinate exactly.
inline constexpr int kFixedBits = 26;
inline constexpr std::int64_t kFixedOne = std::int64_t(1) << kFixedBits;

struct CentroidFixed {
    std::int64_t x26 = 0, y26 = 0;
    Centroid to_double() const {
        return {static_cast<double>(x26) * (1.0 / static_cast<double>(kFixedOne)),
                static_cast<double>(y26) * (1.0 / static_cast<double>(kFixedOne))};
    }
};

// Mean of nonzero-pixel coordinates, quantized to the fixed grid.
CentroidFixed centroid_fixed(const MaskSlice& binary);
Centroid centroid(const MaskSlice& binary);

}  // namespace edpred
