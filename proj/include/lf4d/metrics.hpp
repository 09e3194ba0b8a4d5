#pragma once

// Image quality metrics over sub-aperture grids. Three-channel fields are
// scored on luma (BT.601 weights); other channel counts use all channels.

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lf4d/tensor.hpp"

namespace lf4d {

// Returned when the two inputs are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

LightField luma(const LightField& field);

// 10 log10(peak^2 / MSE) with the MSE over every element.
double psnr(const LightField& pred, const LightField& truth, double peak = 1.0);
// One value per view, s outer, t inner.
std::vector<double> psnr_per_view(const LightField& pred, const LightField& truth, double peak = 1.0);
// Average of the per-view values.
double mean_psnr(const LightField& pred, const LightField& truth, double peak = 1.0);

// Gaussian-windowed SSIM (11 x 11, sigma 1.5, K1 0.01, K2 0.03, range 1),
// averaged over all window positions that fit inside the image.
double ssim(const Grid<double, 2>& a, const Grid<double, 2>& b);
// Mean of per-view SSIM.
double mean_ssim(const LightField& pred, const LightField& truth);

// Metrics report: tab-separated with a header line
//   scene  method  psnr_db  ssim
// where psnr_db is the mean per-view PSNR and ssim the mean per-view SSIM.
struct ReportRow {
  std::string scene;
  std::string method;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

void write_report(std::ostream& out, std::span<const ReportRow> rows);
void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows);
std::vector<ReportRow> read_report(std::istream& in);

}  // namespace lf4d
