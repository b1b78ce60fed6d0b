#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace glyphrl {

// Grayscale image, row-major, intensities in [0, 1].
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Raster() = default;
    Raster(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0.0) {}

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
};

enum class DistortionKind {
    GaussianSteps,  // forward-diffusion noise, dimension preserving
    RotateExpand,   // rotation on an expanded canvas, nothing cropped away
    RotateCrop,     // diagnostic: rotation that crops corners off
    CenterCrop,     // diagnostic: central crop scaled back up
};

const char* distortion_kind_name(DistortionKind kind);
DistortionKind parse_distortion_kind(const std::string& name);

// True for the kinds that can destroy task-relevant content and are only
// meant for failure-mode experiments.
bool is_diagnostic_distortion(DistortionKind kind);

// Linear beta ramp 1e-4 .. 0.02 over 1000 steps; abar_t = prod_{k<=t}(1 - beta_k).
double diffusion_beta(int k);      // k in [1, 1000]
double diffusion_alpha_bar(int t); // t in [0, 1000], abar_0 = 1

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, eps ~ N(0,1) per pixel.
// Output clamped to [0, 1]. steps = 0 returns an exact copy.
// Throws std::out_of_range for steps outside [0, 1000].
Raster gaussian_steps(const Raster& input, int steps, uint64_t seed);

// Same kernel without the final clamp. The clamped op is the distortion
// contract; this variant exists so the moment checks against the closed-form
// diffusion statistics are not confounded by clamping.
Raster gaussian_steps_unclamped(const Raster& input, int steps, uint64_t seed);

// Rotate by `degrees` (counter-clockwise) onto a canvas sized to the exact
// bounding box of the rotated rectangle. Each source pixel is distributed by
// its exact polygon overlap with the output cells, so total intensity is
// conserved and outputs stay within [0, 1] without clamping.
// Multiples of 90 degrees use exact trig so the result is a pure permutation.
Raster rotate_expand(const Raster& input, double degrees);

// Diagnostic: rotate but keep the original canvas, cropping the corners.
Raster rotate_crop(const Raster& input, double degrees);

// Diagnostic: crop the central (1 - 0.9*s/1000) fraction and scale back up.
Raster center_crop(const Raster& input, double strength);

Raster resize_bilinear(const Raster& input, int out_w, int out_h);

// Dispatch on kind with a shared strength scale:
//   GaussianSteps: steps = round(strength) clamped to [0, 1000]
//   RotateExpand / RotateCrop: degrees = strength * 0.09 (500 -> 45 deg)
//   CenterCrop: crop fraction per center_crop above
// strength = 0 is an exact identity for every kind.
// Throws std::out_of_range for negative strength.
Raster apply_distortion(const Raster& input, DistortionKind kind, double strength, uint64_t seed);

// Binary PGM (P5), maxval 255, byte = round(pixel * 255).
void write_pgm(const std::string& path, const Raster& raster);
Raster read_pgm(const std::string& path);

// 10*log10(1/MSE) with MAX = 1. Identical images give +infinity.
double psnr(const Raster& a, const Raster& b);

}  // namespace glyphrl
