#include "edpred/volume.hpp"

#include <cmath>
#include <string>

namespace edpred {

namespace {

void check_dims_spacing(const Dims3& d, const Spacing3& s, std::size_t payload) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw SizeMismatchError("non-positive dims (" + std::to_string(d.nx) + "," + std::to_string(d.ny) + "," +
                                std::to_string(d.nz) + ")");
    if (!(s.x > 0.0) || !(s.y > 0.0) || !(s.z > 0.0)) throw FormatError("non-positive voxel spacing");
    if (payload != d.count())
        throw SizeMismatchError("payload holds " + std::to_string(payload) + " elements, dims declare " +
                                std::to_string(d.count()));
}

}  // namespace

void validate(const Volume3D& v) {
    check_dims_spacing(v.dims, v.spacing_mm, v.data.size());
    for (float x : v.data)
        if (!std::isfinite(x)) throw FormatError("non-finite intensity in volume");
}

void validate(const MaskVolume& m) {
    check_dims_spacing(m.dims, m.spacing_mm, m.labels.size());
    for (std::uint8_t l : m.labels)
        if (l > kFascia) throw InvalidLabelError("mask contains label " + std::to_string(int(l)) + ", expected 0..2");
}

ImageSlice extract_slice(const Volume3D& v, int z) {
    if (z < 0 || z >= v.dims.nz)
        throw IndexError("slice index " + std::to_string(z) + " outside [0," + std::to_string(v.dims.nz) + ")");
    ImageSlice s;
    s.nx = v.dims.nx;
    s.ny = v.dims.ny;
    s.sx = v.spacing_mm.x;
    s.sy = v.spacing_mm.y;
    s.z_index = z;
    const std::size_t plane = static_cast<std::size_t>(s.nx) * s.ny;
    s.data.assign(v.data.begin() + plane * z, v.data.begin() + plane * (z + 1));
    return s;
}

MaskSlice extract_slice(const MaskVolume& m, int z) {
    if (z < 0 || z >= m.dims.nz)
        throw IndexError("slice index " + std::to_string(z) + " outside [0," + std::to_string(m.dims.nz) + ")");
    MaskSlice s;
    s.nx = m.dims.nx;
    s.ny = m.dims.ny;
    s.sx = m.spacing_mm.x;
    s.sy = m.spacing_mm.y;
    s.z_index = z;
    const std::size_t plane = static_cast<std::size_t>(s.nx) * s.ny;
    s.labels.assign(m.labels.begin() + plane * z, m.labels.begin() + plane * (z + 1));
    return s;
}

namespace {

void check_component_label(std::uint8_t label) {
    if (label != kProstate && label != kFascia)
        throw InvalidLabelError("component label must be 1 (prostate) or 2 (fascia), got " + std::to_string(int(label)));
}

}  // namespace

MaskSlice binary_component(const MaskSlice& m, std::uint8_t label) {
    check_component_label(label);
    MaskSlice out = m;
    for (auto& l : out.labels) l = (l == label) ? 1 : 0;
    return out;
}

MaskVolume binary_component(const MaskVolume& m, std::uint8_t label) {
    check_component_label(label);
    MaskVolume out = m;
    for (auto& l : out.labels) l = (l == label) ? 1 : 0;
    return out;
}

std::pair<int, int> prostate_slice_range(const MaskVolume& m) {
    int z_first = -1, z_last = -1;
    const std::size_t plane = static_cast<std::size_t>(m.dims.nx) * m.dims.ny;
    for (int z = 0; z < m.dims.nz; ++z) {
        const std::uint8_t* p = m.labels.data() + plane * z;
        bool found = false;
        for (std::size_t i = 0; i < plane; ++i) {
            if (p[i] == kProstate) {
                found = true;
                break;
            }
        }
        if (found) {
            if (z_first < 0) z_first = z;
            z_last = z;
        }
    }
    if (z_first < 0) throw EmptyStructureError("mask contains no prostate voxels");
    return {z_first, z_last};
}

CentroidFixed centroid_fixed(const MaskSlice& binary) {
    std::int64_t sx = 0, sy = 0, n = 0;
    for (int y = 0; y < binary.ny; ++y) {
        for (int x = 0; x < binary.nx; ++x) {
            if (binary.at(x, y) != 0) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) throw EmptyStructureError("centroid of an empty slice");
    // round-half-even of (sum/n) onto the 2^-26 grid; the integer quotient is
    // carried exactly so translated masks produce exactly shifted centroids.
    auto fixed_of_ratio = [](std::int64_t sum, std::int64_t count) -> std::int64_t {
        const std::int64_t q = sum / count;
        const std::int64_t r = sum % count;
        const double fr = std::nearbyint(static_cast<double>(r) * static_cast<double>(kFixedOne) / static_cast<double>(count));
        return q * kFixedOne + static_cast<std::int64_t>(fr);
    };
    return {fixed_of_ratio(sx, n), fixed_of_ratio(sy, n)};
}

Centroid centroid(const MaskSlice& binary) { return centroid_fixed(binary).to_double(); }

}  // namespace edpred
