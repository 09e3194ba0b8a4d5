#include "lf4d/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lf4d {

namespace {

void require_same(const LightField& a, const LightField& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
}

double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

LightField luma(const LightField& field) {
  const auto& e = field.shape();
  if (e[axis::C] != 3) return field;
  LightField out({1, e[1], e[2], e[3], e[4]});
  const Index plane = e[1] * e[2] * e[3] * e[4];
  const double* r = field.data();
  const double* g = r + plane;
  const double* b = g + plane;
  for (Index i = 0; i < plane; ++i) out.data()[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

double psnr(const LightField& pred, const LightField& truth, double peak) {
  require_same(pred, truth, "psnr");
  const auto p = luma(pred), t = luma(truth);
  double sq = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double d = p.data()[i] - t.data()[i];
    sq += d * d;
  }
  return psnr_from_mse(sq / static_cast<double>(p.size()), peak);
}

std::vector<double> psnr_per_view(const LightField& pred, const LightField& truth, double peak) {
  require_same(pred, truth, "psnr_per_view");
  const auto p = luma(pred), t = luma(truth);
  const auto& e = p.shape();
  return for_each_view(p, [&](Index s, Index tv) {
    double sq = 0.0;
    for (Index c = 0; c < e[axis::C]; ++c)
      for (Index y = 0; y < e[axis::Y]; ++y)
        for (Index x = 0; x < e[axis::X]; ++x) {
          const double d = p(c, s, tv, y, x) - t(c, s, tv, y, x);
          sq += d * d;
        }
    return psnr_from_mse(sq / static_cast<double>(e[axis::C] * e[axis::Y] * e[axis::X]), peak);
  });
}

double mean_psnr(const LightField& pred, const LightField& truth, double peak) {
  const auto v = psnr_per_view(pred, truth, peak);
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double ssim(const Grid<double, 2>& a, const Grid<double, 2>& b) {
  constexpr Index kWin = 11;
  constexpr double kSigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  if (a.shape() != b.shape()) throw std::invalid_argument("ssim: shape mismatch");
  const Index H = a.extent(0), W = a.extent(1);
  if (H < kWin || W < kWin) throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  double w[kWin], wsum = 0.0;
  for (Index k = 0; k < kWin; ++k) {
    const double d = static_cast<double>(k - kWin / 2);
    w[k] = std::exp(-d * d / (2 * kSigma * kSigma));
    wsum += w[k];
  }
  for (double& v : w) v /= wsum;

  // Separable filtering of a, b, a^2, b^2, ab over valid positions.
  const Index OH = H - kWin + 1, OW = W - kWin + 1;
  auto filter = [&](auto&& f) {
    std::vector<double> rows(static_cast<std::size_t>(H * OW));
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < OW; ++x) {
        double s = 0.0;
        for (Index k = 0; k < kWin; ++k) s += w[k] * f(y, x + k);
        rows[static_cast<std::size_t>(y * OW + x)] = s;
      }
    std::vector<double> out(static_cast<std::size_t>(OH * OW));
    for (Index y = 0; y < OH; ++y)
      for (Index x = 0; x < OW; ++x) {
        double s = 0.0;
        for (Index k = 0; k < kWin; ++k) s += w[k] * rows[static_cast<std::size_t>((y + k) * OW + x)];
        out[static_cast<std::size_t>(y * OW + x)] = s;
      }
    return out;
  };
  const auto mu_a = filter([&](Index y, Index x) { return a(y, x); });
  const auto mu_b = filter([&](Index y, Index x) { return b(y, x); });
  const auto aa = filter([&](Index y, Index x) { return a(y, x) * a(y, x); });
  const auto bb = filter([&](Index y, Index x) { return b(y, x) * b(y, x); });
  const auto ab = filter([&](Index y, Index x) { return a(y, x) * b(y, x); });

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = aa[i] - ma * ma, vb = bb[i] - mb * mb, cov = ab[i] - ma * mb;
    total += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
  }
  return total / static_cast<double>(mu_a.size());
}

double mean_ssim(const LightField& pred, const LightField& truth) {
  require_same(pred, truth, "mean_ssim");
  const auto p = luma(pred), t = luma(truth);
  double sum = 0.0;
  Index count = 0;
  for (Index c = 0; c < p.extent(axis::C); ++c)
    for_each_view(p, [&](Index s, Index tv) {
      sum += ssim(view_image(p, c, s, tv), view_image(t, c, s, tv));
      ++count;
    });
  return sum / static_cast<double>(count);
}

namespace {

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_report(std::ostream& out, std::span<const ReportRow> rows) {
  out << "scene\tmethod\tpsnr_db\tssim\n";
  for (const auto& r : rows) out << r.scene << '\t' << r.method << '\t' << format_metric(r.psnr_db) << '\t' << format_metric(r.ssim) << '\n';
}

void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report: cannot open " + path.string());
  write_report(out, rows);
}

std::vector<ReportRow> read_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "scene\tmethod\tpsnr_db\tssim")
    throw std::runtime_error("read_report: missing header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ReportRow r;
    std::string p, s;
    if (!std::getline(ls, r.scene, '\t') || !std::getline(ls, r.method, '\t') || !std::getline(ls, p, '\t') ||
        !std::getline(ls, s))
      throw std::runtime_error("read_report: malformed line '" + line + "'");
    r.psnr_db = std::stod(p);
    r.ssim = std::stod(s);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace lf4d
