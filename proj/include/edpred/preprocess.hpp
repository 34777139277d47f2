#pragma once

#include <array>
#include <string>
#include <vector>

#include "edpred/rng.hpp"
#include "edpred/volume.hpp"

namespace edpred {

struct PreprocessConfig {
    Spacing3 target_spacing_mm{0.273, 0.273, 2.368};
    double clip_p_low = 0.5;
    double clip_p_high = 99.0;
    int crop_w = 512;
    int crop_h = 512;

    void validate() const;
    std::string to_json() const;
    static PreprocessConfig from_json(const std::string& text);
};

enum class SlicePolicy { single_mid, mid4, base_mid8, all12 };

SlicePolicy slice_policy_from_string(const std::string& s);
std::string to_string(SlicePolicy p);

struct SliceSelection {
    SlicePolicy policy = SlicePolicy::single_mid;
    std::vector<int> indices;  // ascending, clamped into the prostate range
};

// Resolve the slice list for a policy from the mask's prostate extent.
// Spans shorter than the policy repeat the extreme slices.
SliceSelection select_slices(const MaskVolume& mask, SlicePolicy policy);

// Trilinear resampling to a new grid; output dims = round(dims*spacing/target),
// at least 1 per axis. Voxel centers align so physical extent is preserved.
Volume3D resample(const Volume3D& v, const Spacing3& target);
// Nearest-neighbor for label volumes.
MaskVolume resample(const MaskVolume& m, const Spacing3& target);

struct Percentiles {
    double low = 0.0, high = 0.0;
};

// Linear-interpolation percentile of the volume's intensity distribution.
Percentiles intensity_percentiles(const Volume3D& v, double p_low, double p_high);
Volume3D clamp_to(const Volume3D& v, double lo, double hi);
Volume3D clip_intensities(const Volume3D& v, double p_low = 0.5, double p_high = 99.0);

// Per-volume standardization to zero mean, unit (population) variance.
Volume3D zscore(const Volume3D& v);

// In-plane center crop to (w,h); smaller inputs are padded symmetrically
// with zeros (images) or background (masks) first.
ImageSlice center_crop(const ImageSlice& s, int w = 512, int h = 512);
MaskSlice center_crop(const MaskSlice& s, int w = 512, int h = 512);
Volume3D center_crop(const Volume3D& v, int w = 512, int h = 512);
MaskVolume center_crop(const MaskVolume& m, int w = 512, int h = 512);

// Full standardization chain: resample -> clip -> zscore -> crop.
Volume3D preprocess_image(const Volume3D& v, const PreprocessConfig& cfg);
MaskVolume preprocess_mask(const MaskVolume& m, const PreprocessConfig& cfg);

struct AugmentParams {
    double rotation_deg = 0.0;
    double translate_x_px = 0.0;
    double translate_y_px = 0.0;
    double scale = 1.0;
    double gaussian_sigma = 0.0;
};

struct AugmentRanges {
    double max_rotation_deg = 15.0;
    double max_translate_px = 16.0;
    double scale_lo = 0.9, scale_hi = 1.1;
    double sigma_lo = 0.0, sigma_hi = 1.5;
};

AugmentParams sample_augment_params(const AugmentRanges& r, Rng& rng);

// Axial-plane-only transform. Bilinear for images, nearest for masks.
// Exact right angles with unit scale and zero translation are applied as
// pixel permutations. Blur applies only to images (sigma ignored for masks).
ImageSlice augment_slice(const ImageSlice& s, const AugmentParams& p);
MaskSlice augment_slice(const MaskSlice& s, const AugmentParams& p);
ImageSlice augment_slice(const ImageSlice& s, const AugmentRanges& r, Rng& rng);

// Exact right-angle rotations (k quarter turns counterclockwise).
ImageSlice rotate90(const ImageSlice& s, int quarter_turns);
MaskSlice rotate90(const MaskSlice& s, int quarter_turns);
MaskVolume rotate90(const MaskVolume& m, int quarter_turns);
MaskVolume translate(const MaskVolume& m, int dx, int dy);

// Separable Gaussian blur, kernel radius ceil(3*sigma).
ImageSlice gaussian_blur(const ImageSlice& s, double sigma);

}  // namespace edpred
