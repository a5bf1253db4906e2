#include "atnf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"
#include "atnf/imgcore.hpp"

namespace atnf::metrics {

namespace {

void require_same(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": images differ in shape");
}

double entropy_of(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

}  // namespace

double avg_gradient(const Image& img) {
  if (img.height() < 2 || img.width() < 2) throw ArgumentError("avg_gradient needs at least 2x2 pixels");
  double s = 0.0;
  for (int y = 0; y + 1 < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      const double dx = img.at(y, x + 1) - img.at(y, x);
      const double dy = img.at(y + 1, x) - img.at(y, x);
      s += std::sqrt((dx * dx + dy * dy) / 2.0);
    }
  }
  return s / (static_cast<double>(img.height() - 1) * (img.width() - 1));
}

double entropy(const Image& img) {
  std::vector<double> hist(256, 0.0);
  for (double v : img.values()) hist[io::quantize(v)] += 1.0;
  return entropy_of(hist, static_cast<double>(img.size()));
}

double mutual_information(const Image& a, const Image& b) {
  require_same(a, b, "mutual_information");
  std::vector<double> ha(256, 0.0), hb(256, 0.0), joint(256 * 256, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int qa = io::quantize(a[i]), qb = io::quantize(b[i]);
    ha[qa] += 1.0;
    hb[qb] += 1.0;
    joint[static_cast<std::size_t>(qa) * 256 + qb] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  // Clamp the rounding residue of H(a) + H(b) - H(a,b) at zero.
  return std::max(0.0, entropy_of(ha, n) + entropy_of(hb, n) - entropy_of(joint, n));
}

double ssim_metric(const Image& fused, const Image& source) { return losses::ssim_index(fused, source); }

Image baseline_average(const Image& a, const Image& b) {
  require_same(a, b, "baseline_average");
  Image out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
  return out;
}

int max_pyramid_levels(int height, int width, int cap) {
  int levels = 1;
  while (levels < cap && height >= 2 && width >= 2) {
    height = (height + 1) / 2;
    width = (width + 1) / 2;
    ++levels;
  }
  return levels;
}

Image baseline_lp_fuse(const Image& a, const Image& b, int levels) {
  require_same(a, b, "baseline_lp_fuse");
  const auto ga = imgcore::gaussian_pyramid(a, levels);
  const auto gb = imgcore::gaussian_pyramid(b, levels);
  const int top = levels - 1;
  Image acc = baseline_average(ga[top], gb[top]);
  for (int l = top - 1; l >= 0; --l) {
    const Image& la = ga[l];
    const Image ea = imgcore::pyramid_expand(ga[l + 1], la.height(), la.width());
    const Image eb = imgcore::pyramid_expand(gb[l + 1], la.height(), la.width());
    Image up = imgcore::pyramid_expand(acc, la.height(), la.width());
    for (std::size_t i = 0; i < up.size(); ++i) {
      const double da = ga[l][i] - ea[i];
      const double db = gb[l][i] - eb[i];
      up[i] += std::abs(db) > std::abs(da) ? db : da;
    }
    acc = std::move(up);
  }
  acc.clamp();
  return acc;
}

MetricReport eval_report(const Image& fused, const Image& a, const Image& b, const std::string& pair,
                         const std::string& method) {
  require_same(fused, a, "eval_report");
  require_same(fused, b, "eval_report");
  MetricReport r;
  r.pair = pair;
  r.method = method;
  r.ssim_a = ssim_metric(fused, a);
  r.ssim_b = ssim_metric(fused, b);
  r.mi_a = mutual_information(fused, a);
  r.mi_b = mutual_information(fused, b);
  r.ag = avg_gradient(fused);
  r.en = entropy(fused);
  return r;
}

std::string to_csv(const std::vector<MetricReport>& reports) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : reports) {
    if (r.pair.find_first_of(",\n") != std::string::npos || r.method.find_first_of(",\n") != std::string::npos) {
      throw ArgumentError("CSV identifiers may not contain commas or newlines");
    }
    char buf[512];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.ssim_a, r.ssim_b, r.mi_a, r.mi_b, r.ag,
                  r.en);
    out += r.pair + "," + r.method + buf;
  }
  return out;
}

std::vector<MetricReport> from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw DataError("metric CSV has an unexpected header");
  std::vector<MetricReport> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw DataError("metric CSV row " + std::to_string(row) + " has the wrong column count");
    MetricReport r;
    r.pair = cells[0];
    r.method = cells[1];
    double* fields[6] = {&r.ssim_a, &r.ssim_b, &r.mi_a, &r.mi_b, &r.ag, &r.en};
    for (int k = 0; k < 6; ++k) {
      char* end = nullptr;
      *fields[k] = std::strtod(cells[static_cast<std::size_t>(k + 2)].c_str(), &end);
      if (end == cells[static_cast<std::size_t>(k + 2)].c_str() || *end != '\0') {
        throw DataError("metric CSV row " + std::to_string(row) + " has a non-numeric value");
      }
    }
    out.push_back(r);
  }
  return out;
}

std::string to_json(const std::vector<MetricReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"pair", r.pair},
                   {"method", r.method},
                   {"ssim_a", r.ssim_a},
                   {"ssim_b", r.ssim_b},
                   {"mi_a", r.mi_a},
                   {"mi_b", r.mi_b},
                   {"ag", r.ag},
                   {"en", r.en}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace atnf::metrics
