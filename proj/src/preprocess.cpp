#include "edpred/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "edpred/parallel.hpp"

using nlohmann::json;

namespace edpred {

void PreprocessConfig::validate() const {
    if (!(target_spacing_mm.x > 0 && target_spacing_mm.y > 0 && target_spacing_mm.z > 0))
        throw ConfigError("target spacing must be positive");
    if (!(0.0 <= clip_p_low && clip_p_low < clip_p_high && clip_p_high <= 100.0))
        throw ConfigError("clip percentiles must satisfy 0 <= low < high <= 100");
    if (crop_w <= 0 || crop_h <= 0 || crop_w % 2 != 0 || crop_h % 2 != 0)
        throw ConfigError("crop dims must be positive and even");
}

std::string PreprocessConfig::to_json() const {
    json j;
    j["target_spacing_mm"] = {target_spacing_mm.x, target_spacing_mm.y, target_spacing_mm.z};
    j["clip_percentiles"] = {clip_p_low, clip_p_high};
    j["crop_hw"] = {crop_w, crop_h};
    j["image_interp"] = "trilinear";
    j["mask_interp"] = "nearest";
    return j.dump(2);
}

PreprocessConfig PreprocessConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad preprocess config JSON: ") + e.what());
    }
    PreprocessConfig c;
    try {
        if (j.contains("target_spacing_mm")) {
            const auto& s = j["target_spacing_mm"];
            c.target_spacing_mm = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
        }
        if (j.contains("clip_percentiles")) {
            c.clip_p_low = j["clip_percentiles"].at(0).get<double>();
            c.clip_p_high = j["clip_percentiles"].at(1).get<double>();
        }
        if (j.contains("crop_hw")) {
            c.crop_w = j["crop_hw"].at(0).get<int>();
            c.crop_h = j["crop_hw"].at(1).get<int>();
        }
        if (j.contains("image_interp") && j["image_interp"] != "trilinear")
            throw ConfigError("only trilinear image interpolation is supported");
        if (j.contains("mask_interp") && j["mask_interp"] != "nearest")
            throw ConfigError("only nearest mask interpolation is supported");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad preprocess config fields: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Slice selection
// ---------------------------------------------------------------------------

SlicePolicy slice_policy_from_string(const std::string& s) {
    if (s == "single_mid") return SlicePolicy::single_mid;
    if (s == "mid4") return SlicePolicy::mid4;
    if (s == "base_mid8") return SlicePolicy::base_mid8;
    if (s == "all12") return SlicePolicy::all12;
    throw ConfigError("unknown slice policy '" + s + "'");
}

std::string to_string(SlicePolicy p) {
    switch (p) {
        case SlicePolicy::single_mid: return "single_mid";
        case SlicePolicy::mid4: return "mid4";
        case SlicePolicy::base_mid8: return "base_mid8";
        default: return "all12";
    }
}

SliceSelection select_slices(const MaskVolume& mask, SlicePolicy policy) {
    const auto [z0, z1] = prostate_slice_range(mask);
    const int zm = (z0 + z1) / 2;
    auto window = [&](int start, int count) {
        std::vector<int> idx(count);
        for (int i = 0; i < count; ++i) idx[i] = std::clamp(start + i, z0, z1);
        return idx;
    };
    SliceSelection sel;
    sel.policy = policy;
    switch (policy) {
        case SlicePolicy::single_mid: sel.indices = {zm}; break;
        case SlicePolicy::mid4: sel.indices = window(zm - 1, 4); break;
        case SlicePolicy::base_mid8: sel.indices = window(z0, 8); break;
        case SlicePolicy::all12: sel.indices = window(zm - 5, 12); break;
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace {

int output_dim(int n, double src, double dst) {
    const int d = static_cast<int>(std::llround(static_cast<double>(n) * src / dst));
    return std::max(1, d);
}

// Continuous input coordinate of an output voxel center.
inline double src_coord(int i_out, double dst_sp, double src_sp) {
    return (static_cast<double>(i_out) + 0.5) * dst_sp / src_sp - 0.5;
}

struct LinearCoord {
    int i0, i1;
    double f;
};

inline LinearCoord linear_coord(double x, int n) {
    if (n == 1) return {0, 0, 0.0};
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    int i0 = static_cast<int>(std::floor(x));
    if (i0 > n - 2) i0 = n - 2;
    return {i0, i0 + 1, x - static_cast<double>(i0)};
}

inline int nearest_coord(double x, int n) {
    const int i = static_cast<int>(std::floor(x + 0.5));
    return std::clamp(i, 0, n - 1);
}

}  // namespace

Volume3D resample(const Volume3D& v, const Spacing3& target) {
    if (!(target.x > 0 && target.y > 0 && target.z > 0)) throw ConfigError("non-positive target spacing");
    if (target == v.spacing_mm) return v;
    Volume3D out;
    out.spacing_mm = target;
    out.dims = {output_dim(v.dims.nx, v.spacing_mm.x, target.x), output_dim(v.dims.ny, v.spacing_mm.y, target.y),
                output_dim(v.dims.nz, v.spacing_mm.z, target.z)};
    out.data.resize(out.dims.count());
    const Dims3 id = v.dims;
    par::parallel_for(out.dims.nz, [&](std::int64_t zo) {
        const LinearCoord zc = linear_coord(src_coord(static_cast<int>(zo), target.z, v.spacing_mm.z), id.nz);
        for (int yo = 0; yo < out.dims.ny; ++yo) {
            const LinearCoord yc = linear_coord(src_coord(yo, target.y, v.spacing_mm.y), id.ny);
            for (int xo = 0; xo < out.dims.nx; ++xo) {
                const LinearCoord xc = linear_coord(src_coord(xo, target.x, v.spacing_mm.x), id.nx);
                const double c00 = v.at(xc.i0, yc.i0, zc.i0) * (1.0 - xc.f) + v.at(xc.i1, yc.i0, zc.i0) * xc.f;
                const double c10 = v.at(xc.i0, yc.i1, zc.i0) * (1.0 - xc.f) + v.at(xc.i1, yc.i1, zc.i0) * xc.f;
                const double c01 = v.at(xc.i0, yc.i0, zc.i1) * (1.0 - xc.f) + v.at(xc.i1, yc.i0, zc.i1) * xc.f;
                const double c11 = v.at(xc.i0, yc.i1, zc.i1) * (1.0 - xc.f) + v.at(xc.i1, yc.i1, zc.i1) * xc.f;
                const double c0 = c00 * (1.0 - yc.f) + c10 * yc.f;
                const double c1 = c01 * (1.0 - yc.f) + c11 * yc.f;
                out.at(xo, yo, static_cast<int>(zo)) = static_cast<float>(c0 * (1.0 - zc.f) + c1 * zc.f);
            }
        }
    });
    return out;
}

MaskVolume resample(const MaskVolume& m, const Spacing3& target) {
    if (!(target.x > 0 && target.y > 0 && target.z > 0)) throw ConfigError("non-positive target spacing");
    if (target == m.spacing_mm) return m;
    MaskVolume out;
    out.spacing_mm = target;
    out.dims = {output_dim(m.dims.nx, m.spacing_mm.x, target.x), output_dim(m.dims.ny, m.spacing_mm.y, target.y),
                output_dim(m.dims.nz, m.spacing_mm.z, target.z)};
    out.labels.resize(out.dims.count());
    par::parallel_for(out.dims.nz, [&](std::int64_t zo) {
        const int zi = nearest_coord(src_coord(static_cast<int>(zo), target.z, m.spacing_mm.z), m.dims.nz);
        for (int yo = 0; yo < out.dims.ny; ++yo) {
            const int yi = nearest_coord(src_coord(yo, target.y, m.spacing_mm.y), m.dims.ny);
            for (int xo = 0; xo < out.dims.nx; ++xo) {
                const int xi = nearest_coord(src_coord(xo, target.x, m.spacing_mm.x), m.dims.nx);
                out.at(xo, yo, static_cast<int>(zo)) = m.at(xi, yi, zi);
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Intensity ops
// ---------------------------------------------------------------------------

namespace {

// k-th and (k+1)-th order statistics via nth_element on a scratch copy.
double order_stat_interp(std::vector<float>& work, double h) {
    const std::size_t i = static_cast<std::size_t>(h);
    const double f = h - static_cast<double>(i);
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(i), work.end());
    const double lo = work[i];
    if (f == 0.0 || i + 1 >= work.size()) return lo;
    const double hi = *std::min_element(work.begin() + static_cast<std::ptrdiff_t>(i) + 1, work.end());
    return lo + f * (hi - lo);
}

}  // namespace

Percentiles intensity_percentiles(const Volume3D& v, double p_low, double p_high) {
    if (v.data.empty()) throw DegenerateInputError("percentiles of an empty volume");
    if (!(0.0 <= p_low && p_low < p_high && p_high <= 100.0))
        throw ConfigError("percentiles must satisfy 0 <= low < high <= 100");
    std::vector<float> work = v.data;
    const double n1 = static_cast<double>(work.size() - 1);
    Percentiles out;
    out.low = order_stat_interp(work, n1 * p_low / 100.0);
    out.high = order_stat_interp(work, n1 * p_high / 100.0);
    return out;
}

Volume3D clamp_to(const Volume3D& v, double lo, double hi) {
    Volume3D out = v;
    const float flo = static_cast<float>(lo), fhi = static_cast<float>(hi);
    par::parallel_for(static_cast<std::int64_t>(out.data.size()), [&](std::int64_t i) {
        out.data[i] = std::clamp(out.data[i], flo, fhi);
    });
    return out;
}

Volume3D clip_intensities(const Volume3D& v, double p_low, double p_high) {
    const Percentiles p = intensity_percentiles(v, p_low, p_high);
    return clamp_to(v, p.low, p.high);
}

Volume3D zscore(const Volume3D& v) {
    if (v.data.empty()) throw DegenerateInputError("zscore of an empty volume");
    // Per-slice partial sums combined in z order: the reduction is identical
    // for any thread count.
    const std::size_t plane = static_cast<std::size_t>(v.dims.nx) * v.dims.ny;
    std::vector<double> sums(v.dims.nz, 0.0), sqsums(v.dims.nz, 0.0);
    par::parallel_for(v.dims.nz, [&](std::int64_t z) {
        const float* p = v.data.data() + plane * static_cast<std::size_t>(z);
        double s = 0.0, q = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            s += p[i];
            q += static_cast<double>(p[i]) * p[i];
        }
        sums[z] = s;
        sqsums[z] = q;
    });
    double s = 0.0, q = 0.0;
    for (int z = 0; z < v.dims.nz; ++z) {
        s += sums[z];
        q += sqsums[z];
    }
    const double n = static_cast<double>(v.data.size());
    const double mean = s / n;
    const double var = std::max(0.0, q / n - mean * mean);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12)) throw DegenerateInputError("zscore of a (near-)constant volume");
    Volume3D out = v;
    par::parallel_for(static_cast<std::int64_t>(out.data.size()), [&](std::int64_t i) {
        out.data[i] = static_cast<float>((static_cast<double>(v.data[i]) - mean) / sd);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Cropping
// ---------------------------------------------------------------------------

namespace {

inline int floor_div2(int a) { return a >= 0 ? a / 2 : -((-a + 1) / 2); }

template <class T, class At>
std::vector<T> crop_plane(int in_w, int in_h, int out_w, int out_h, T fill, At at) {
    const int off_x = floor_div2(in_w - out_w);
    const int off_y = floor_div2(in_h - out_h);
    std::vector<T> out(static_cast<std::size_t>(out_w) * out_h, fill);
    for (int yo = 0; yo < out_h; ++yo) {
        const int yi = yo + off_y;
        if (yi < 0 || yi >= in_h) continue;
        for (int xo = 0; xo < out_w; ++xo) {
            const int xi = xo + off_x;
            if (xi < 0 || xi >= in_w) continue;
            out[static_cast<std::size_t>(xo) + static_cast<std::size_t>(out_w) * yo] = at(xi, yi);
        }
    }
    return out;
}

}  // namespace

ImageSlice center_crop(const ImageSlice& s, int w, int h) {
    ImageSlice out;
    out.nx = w;
    out.ny = h;
    out.sx = s.sx;
    out.sy = s.sy;
    out.z_index = s.z_index;
    out.data = crop_plane<float>(s.nx, s.ny, w, h, 0.0f, [&](int x, int y) { return s.at(x, y); });
    return out;
}

MaskSlice center_crop(const MaskSlice& s, int w, int h) {
    MaskSlice out;
    out.nx = w;
    out.ny = h;
    out.sx = s.sx;
    out.sy = s.sy;
    out.z_index = s.z_index;
    out.labels = crop_plane<std::uint8_t>(s.nx, s.ny, w, h, kBackground, [&](int x, int y) { return s.at(x, y); });
    return out;
}

Volume3D center_crop(const Volume3D& v, int w, int h) {
    Volume3D out;
    out.dims = {w, h, v.dims.nz};
    out.spacing_mm = v.spacing_mm;
    out.data.resize(out.dims.count());
    const std::size_t plane_out = static_cast<std::size_t>(w) * h;
    par::parallel_for(v.dims.nz, [&](std::int64_t z) {
        auto p = crop_plane<float>(v.dims.nx, v.dims.ny, w, h, 0.0f,
                                   [&](int x, int y) { return v.at(x, y, static_cast<int>(z)); });
        std::copy(p.begin(), p.end(), out.data.begin() + plane_out * static_cast<std::size_t>(z));
    });
    return out;
}

MaskVolume center_crop(const MaskVolume& m, int w, int h) {
    MaskVolume out;
    out.dims = {w, h, m.dims.nz};
    out.spacing_mm = m.spacing_mm;
    out.labels.resize(out.dims.count());
    const std::size_t plane_out = static_cast<std::size_t>(w) * h;
    par::parallel_for(m.dims.nz, [&](std::int64_t z) {
        auto p = crop_plane<std::uint8_t>(m.dims.nx, m.dims.ny, w, h, kBackground,
                                          [&](int x, int y) { return m.at(x, y, static_cast<int>(z)); });
        std::copy(p.begin(), p.end(), out.labels.begin() + plane_out * static_cast<std::size_t>(z));
    });
    return out;
}

Volume3D preprocess_image(const Volume3D& v, const PreprocessConfig& cfg) {
    cfg.validate();
    Volume3D out = resample(v, cfg.target_spacing_mm);
    out = clip_intensities(out, cfg.clip_p_low, cfg.clip_p_high);
    out = zscore(out);
    return center_crop(out, cfg.crop_w, cfg.crop_h);
}

MaskVolume preprocess_mask(const MaskVolume& m, const PreprocessConfig& cfg) {
    cfg.validate();
    MaskVolume out = resample(m, cfg.target_spacing_mm);
    return center_crop(out, cfg.crop_w, cfg.crop_h);
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

AugmentParams sample_augment_params(const AugmentRanges& r, Rng& rng) {
    AugmentParams p;
    p.rotation_deg = uniform(rng, -r.max_rotation_deg, r.max_rotation_deg);
    p.translate_x_px = uniform(rng, -r.max_translate_px, r.max_translate_px);
    p.translate_y_px = uniform(rng, -r.max_translate_px, r.max_translate_px);
    p.scale = uniform(rng, r.scale_lo, r.scale_hi);
    p.gaussian_sigma = uniform(rng, r.sigma_lo, r.sigma_hi);
    return p;
}

namespace {

template <class Slice>
Slice rotate90_once(const Slice& s) {
    Slice out = s;
    out.nx = s.ny;
    out.ny = s.nx;
    std::swap(out.sx, out.sy);
    auto& dst = rotated_buffer(out);
    dst.resize(static_cast<std::size_t>(out.nx) * out.ny);
    for (int yn = 0; yn < out.ny; ++yn)
        for (int xn = 0; xn < out.nx; ++xn) dst[static_cast<std::size_t>(xn) + static_cast<std::size_t>(out.nx) * yn] =
            s.at(yn, s.ny - 1 - xn);
    return out;
}

std::vector<float>& rotated_buffer(ImageSlice& s) { return s.data; }
std::vector<std::uint8_t>& rotated_buffer(MaskSlice& s) { return s.labels; }

bool is_right_angle(double deg) {
    const double q = deg / 90.0;
    return q == std::floor(q);
}

int quarter_turns_of(double deg) {
    int k = static_cast<int>(std::floor(deg / 90.0)) % 4;
    return (k % 4 + 4) % 4;
}

struct InverseAffine {
    double cx, cy;      // rotation center (pixel coords)
    double cos_a, sin_a, inv_scale;
    double tx, ty;
    // source position for an output pixel
    void map(double xo, double yo, double& xi, double& yi) const {
        const double dx = xo - cx - tx;
        const double dy = yo - cy - ty;
        xi = (cos_a * dx + sin_a * dy) * inv_scale + cx;
        yi = (-sin_a * dx + cos_a * dy) * inv_scale + cy;
    }
};

InverseAffine make_inverse(const AugmentParams& p, int nx, int ny) {
    const double a = p.rotation_deg * M_PI / 180.0;
    return {0.5 * (nx - 1), 0.5 * (ny - 1), std::cos(a), std::sin(a), 1.0 / p.scale,
            p.translate_x_px, p.translate_y_px};
}

}  // namespace

ImageSlice rotate90(const ImageSlice& s, int quarter_turns) {
    ImageSlice out = s;
    for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) out = rotate90_once(out);
    return out;
}

MaskSlice rotate90(const MaskSlice& s, int quarter_turns) {
    MaskSlice out = s;
    for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) out = rotate90_once(out);
    return out;
}

MaskVolume rotate90(const MaskVolume& m, int quarter_turns) {
    MaskVolume out;
    out.spacing_mm = m.spacing_mm;
    const int k = ((quarter_turns % 4) + 4) % 4;
    MaskSlice first = rotate90(extract_slice(m, 0), k);
    out.dims = {first.nx, first.ny, m.dims.nz};
    if (k % 2 == 1) std::swap(out.spacing_mm.x, out.spacing_mm.y);
    out.labels.resize(out.dims.count());
    const std::size_t plane = static_cast<std::size_t>(out.dims.nx) * out.dims.ny;
    for (int z = 0; z < m.dims.nz; ++z) {
        const MaskSlice r = rotate90(extract_slice(m, z), k);
        std::copy(r.labels.begin(), r.labels.end(), out.labels.begin() + plane * static_cast<std::size_t>(z));
    }
    return out;
}

MaskVolume translate(const MaskVolume& m, int dx, int dy) {
    MaskVolume out = m;
    std::fill(out.labels.begin(), out.labels.end(), kBackground);
    for (int z = 0; z < m.dims.nz; ++z)
        for (int y = 0; y < m.dims.ny; ++y)
            for (int x = 0; x < m.dims.nx; ++x) {
                const int xn = x + dx, yn = y + dy;
                if (xn >= 0 && xn < m.dims.nx && yn >= 0 && yn < m.dims.ny)
                    out.at(xn, yn, z) = m.at(x, y, z);
            }
    return out;
}

ImageSlice gaussian_blur(const ImageSlice& s, double sigma) {
    if (sigma < 0.0) throw ConfigError("gaussian sigma must be >= 0");
    if (sigma == 0.0) return s;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (auto& k : kernel) k /= total;

    ImageSlice tmp = s;
    // horizontal, edge-replicated
    par::parallel_for(s.ny, [&](std::int64_t y) {
        for (int x = 0; x < s.nx; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * s.at(std::clamp(x + i, 0, s.nx - 1), static_cast<int>(y));
            tmp.at(x, static_cast<int>(y)) = static_cast<float>(acc);
        }
    });
    ImageSlice out = tmp;
    par::parallel_for(s.ny, [&](std::int64_t y) {
        for (int x = 0; x < s.nx; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(x, std::clamp(static_cast<int>(y) + i, 0, s.ny - 1));
            out.at(x, static_cast<int>(y)) = static_cast<float>(acc);
        }
    });
    return out;
}

ImageSlice augment_slice(const ImageSlice& s, const AugmentParams& p) {
    if (!(p.scale > 0.0)) throw ConfigError("augment scale must be positive");
    ImageSlice out = s;
    const bool no_shift = p.translate_x_px == 0.0 && p.translate_y_px == 0.0 && p.scale == 1.0;
    if (no_shift && is_right_angle(p.rotation_deg) && (s.nx == s.ny || quarter_turns_of(p.rotation_deg) % 2 == 0)) {
        out = rotate90(s, quarter_turns_of(p.rotation_deg));
    } else {
        const InverseAffine inv = make_inverse(p, s.nx, s.ny);
        par::parallel_for(s.ny, [&](std::int64_t yo) {
            for (int xo = 0; xo < s.nx; ++xo) {
                double xi, yi;
                inv.map(xo, static_cast<double>(yo), xi, yi);
                float v = 0.0f;
                if (xi >= 0.0 && xi <= s.nx - 1 && yi >= 0.0 && yi <= s.ny - 1) {
                    const LinearCoord xc = linear_coord(xi, s.nx);
                    const LinearCoord yc = linear_coord(yi, s.ny);
                    const double v0 = s.at(xc.i0, yc.i0) * (1.0 - xc.f) + s.at(xc.i1, yc.i0) * xc.f;
                    const double v1 = s.at(xc.i0, yc.i1) * (1.0 - xc.f) + s.at(xc.i1, yc.i1) * xc.f;
                    v = static_cast<float>(v0 * (1.0 - yc.f) + v1 * yc.f);
                }
                out.at(xo, static_cast<int>(yo)) = v;
            }
        });
    }
    return p.gaussian_sigma > 0.0 ? gaussian_blur(out, p.gaussian_sigma) : out;
}

MaskSlice augment_slice(const MaskSlice& s, const AugmentParams& p) {
    if (!(p.scale > 0.0)) throw ConfigError("augment scale must be positive");
    const bool no_shift = p.translate_x_px == 0.0 && p.translate_y_px == 0.0 && p.scale == 1.0;
    if (no_shift && is_right_angle(p.rotation_deg) && (s.nx == s.ny || quarter_turns_of(p.rotation_deg) % 2 == 0))
        return rotate90(s, quarter_turns_of(p.rotation_deg));
    MaskSlice out = s;
    const InverseAffine inv = make_inverse(p, s.nx, s.ny);
    par::parallel_for(s.ny, [&](std::int64_t yo) {
        for (int xo = 0; xo < s.nx; ++xo) {
            double xi, yi;
            inv.map(xo, static_cast<double>(yo), xi, yi);
            std::uint8_t v = kBackground;
            const int xn = static_cast<int>(std::floor(xi + 0.5));
            const int yn = static_cast<int>(std::floor(yi + 0.5));
            if (xn >= 0 && xn < s.nx && yn >= 0 && yn < s.ny) v = s.at(xn, yn);
            out.at(xo, static_cast<int>(yo)) = v;
        }
    });
    return out;
}

ImageSlice augment_slice(const ImageSlice& s, const AugmentRanges& r, Rng& rng) {
    return augment_slice(s, sample_augment_params(r, rng));
}

}  // namespace edpred
