#include "atnf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "atnf/error.hpp"
#include "atnf/imgcore.hpp"

namespace atnf::losses {

void SsimParams::validate() const {
  if (window < 1 || window % 2 == 0) throw ArgumentError("SSIM window must be a positive odd size");
  if (!(sigma > 0.0)) throw ArgumentError("SSIM sigma must be positive");
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(c3 > 0.0)) throw ArgumentError("SSIM constants must be positive");
}

namespace {

std::vector<double> gaussian_taps(const SsimParams& p) {
  const int r = p.window / 2;
  std::vector<double> taps(static_cast<std::size_t>(p.window));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * p.sigma * p.sigma));
    total += taps[static_cast<std::size_t>(i + r)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Separable zero-padded Gaussian filter of an h x w plane. The kernel is
// symmetric, so this operator is its own adjoint.
std::vector<double> window_filter(const std::vector<double>& in, int h, int w, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = in.data() + static_cast<std::size_t>(y) * w;
    double* dst = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - r), hi = std::min(w - 1, x + r);
      double s = 0.0;
      for (int q = lo; q <= hi; ++q) s += taps[static_cast<std::size_t>(q - x + r)] * row[q];
      dst[x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - r), hi = std::min(h - 1, y + r);
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    for (int q = lo; q <= hi; ++q) {
      const double t = taps[static_cast<std::size_t>(q - y + r)];
      const double* src = tmp.data() + static_cast<std::size_t>(q) * w;
      for (int x = 0; x < w; ++x) dst[x] += t * src[x];
    }
  }
  return out;
}

// Local statistics and the per-pixel partial derivatives of l*c*s.
struct SsimState {
  int h = 0, w = 0;
  std::vector<double> taps, norm;
  std::vector<double> map;
  // d(map)/d(local mean of x), of y, of x^2, of y^2, of xy
  std::vector<double> d_mx, d_my, d_xx, d_yy, d_xy;
};

SsimState ssim_state(const Tensor& xv, const Tensor& yv, const SsimParams& p, bool derivatives) {
  p.validate();
  if (xv.rank() != 3 || xv.channels() != 1 || !xv.same_shape(yv)) {
    throw ShapeError("ssim: inputs must be one-channel maps of the same shape");
  }
  SsimState st;
  st.h = xv.height();
  st.w = xv.width();
  const std::size_t n = xv.size();
  st.taps = gaussian_taps(p);
  st.norm = window_filter(std::vector<double>(n, 1.0), st.h, st.w, st.taps);
  std::vector<double> x(xv.values().begin(), xv.values().end()), y(yv.values().begin(), yv.values().end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  auto local = [&](const std::vector<double>& v) {
    auto f = window_filter(v, st.h, st.w, st.taps);
    for (std::size_t i = 0; i < n; ++i) f[i] /= st.norm[i];
    return f;
  };
  const auto mx = local(x), my = local(y), mxx = local(xx), myy = local(yy), mxy = local(xy);
  st.map.resize(n);
  if (derivatives) {
    for (auto* v : {&st.d_mx, &st.d_my, &st.d_xx, &st.d_yy, &st.d_xy}) v->assign(n, 0.0);
  }
  const double structure_p = 2.0 * p.c3 - p.c2;
  for (std::size_t i = 0; i < n; ++i) {
    const double vx_raw = mxx[i] - mx[i] * mx[i];
    const double vy_raw = myy[i] - my[i] * my[i];
    const double vx = std::max(vx_raw, 0.0), vy = std::max(vy_raw, 0.0);
    const double cxy = mxy[i] - mx[i] * my[i];
    const double sx = std::sqrt(vx), sy = std::sqrt(vy);
    const double pp = sx * sy;
    const double l1 = 2.0 * mx[i] * my[i] + p.c1, l2 = mx[i] * mx[i] + my[i] * my[i] + p.c1;
    const double t1 = 2.0 * pp + p.c2, d2 = vx + vy + p.c2;
    const double l = l1 / l2, c = t1 / d2, s = (cxy + p.c3) / (pp + p.c3);
    st.map[i] = l * c * s;
    if (!derivatives) continue;
    // Partials holding the other statistics fixed.
    const double dl_dmx = (2.0 * my[i] * l2 - 2.0 * mx[i] * l1) / (l2 * l2);
    const double dl_dmy = (2.0 * mx[i] * l2 - 2.0 * my[i] * l1) / (l2 * l2);
    const double dS_dcxy = l * c / (pp + p.c3);
    // The product c*s depends on sqrt(vx*vy) only through a term proportional
    // to 2*C3 - C2; at the usual C3 = C2/2 it vanishes.
    const double dcs_dp = structure_p != 0.0 ? s * structure_p / (d2 * (pp + p.c3)) : 0.0;
    double dS_dvx = l * s * (-t1 / (d2 * d2));
    double dS_dvy = dS_dvx;
    if (dcs_dp != 0.0) {
      if (sx > 0.0) dS_dvx += l * dcs_dp * sy / (2.0 * sx);
      if (sy > 0.0) dS_dvy += l * dcs_dp * sx / (2.0 * sy);
    }
    if (vx_raw < 0.0) dS_dvx = 0.0;
    if (vy_raw < 0.0) dS_dvy = 0.0;
    // Chain through vx = E[x^2] - mx^2 and cxy = E[xy] - mx*my.
    st.d_mx[i] = c * s * dl_dmx - 2.0 * mx[i] * dS_dvx - my[i] * dS_dcxy;
    st.d_my[i] = c * s * dl_dmy - 2.0 * my[i] * dS_dvy - mx[i] * dS_dcxy;
    st.d_xx[i] = dS_dvx;
    st.d_yy[i] = dS_dvy;
    st.d_xy[i] = dS_dcxy;
  }
  return st;
}

// Gradient of mean(map) * upstream with respect to x (or y when `second`).
Tensor ssim_input_gradient(const SsimState& st, const Tensor& xv, const Tensor& yv, double upstream, bool second) {
  const std::size_t n = xv.size();
  const double k = upstream / static_cast<double>(n);
  const auto& d_m = second ? st.d_my : st.d_mx;
  const auto& d_sq = second ? st.d_yy : st.d_xx;
  const Tensor& self = second ? yv : xv;
  const Tensor& other = second ? xv : yv;
  std::vector<double> gm(n), gsq(n), gxy(n);
  for (std::size_t i = 0; i < n; ++i) {
    gm[i] = k * d_m[i] / st.norm[i];
    gsq[i] = k * d_sq[i] / st.norm[i];
    gxy[i] = k * st.d_xy[i] / st.norm[i];
  }
  const auto am = window_filter(gm, st.h, st.w, st.taps);
  const auto asq = window_filter(gsq, st.h, st.w, st.taps);
  const auto axy = window_filter(gxy, st.h, st.w, st.taps);
  Tensor g(self.shape(), 0.0);
  for (std::size_t i = 0; i < n; ++i) g[i] = am[i] + 2.0 * self[i] * asq[i] + other[i] * axy[i];
  return g;
}

void require_same(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": images differ in shape");
}

void check_stage(int stage) {
  if (stage < 1 || stage > backbone::kStages) {
    throw ArgumentError("perceptual stage must be 1..5, got " + std::to_string(stage));
  }
}

LossValue scalar_loss(ad::Graph& g, ad::Var root, ad::Var predict) {
  LossValue out;
  out.value = root.value()[0];
  if (!std::isfinite(out.value)) throw NumericError("loss is not finite");
  g.backward(root);
  out.gradient = g.grad(predict);
  return out;
}

}  // namespace

// ---- graph forms --------------------------------------------------------

ad::Var ssim_index(ad::Var x, ad::Var y, const SsimParams& p) {
  auto st = std::make_shared<SsimState>(ssim_state(x.value(), y.value(), p, x.graph->recording()));
  double total = 0.0;
  for (double v : st->map) total += v;
  const double value = total / static_cast<double>(st->map.size());
  return x.graph->emit(Tensor({1}, value), {x, y}, [x, y, st](ad::Graph& g, const Tensor& d) {
    if (g.requires_grad(x)) g.accumulate(x, ssim_input_gradient(*st, x.value(), y.value(), d[0], false));
    if (g.requires_grad(y)) g.accumulate(y, ssim_input_gradient(*st, x.value(), y.value(), d[0], true));
  });
}

ad::Var edge_map(ad::Var image) {
  return ad::affine(ad::filter_replicate(image, imgcore::laplacian_kernel()), 0.125, 0.5);
}

ad::Var perceptual_features(ad::Binder& bind, ad::Var image, const backbone::BackboneWeights& extractor, int stage) {
  check_stage(stage);
  return backbone::pyramid(bind, image, extractor, stage)[static_cast<std::size_t>(stage - 1)];
}

LossTerms LossGraph::values() const {
  auto get = [](const ad::Var& v) { return v.valid() ? v.value()[0] : 0.0; };
  return {get(ssim), get(perceptual), get(edge), get(total)};
}

LossGraph fusion_loss(ad::Binder& bind, ad::Var predict, const std::vector<Reference>& references,
                      const LossConfig& config, const backbone::BackboneWeights& extractor) {
  if (references.empty()) throw ArgumentError("fusion_loss needs at least one reference image");
  for (const auto& r : references) {
    if (!r.image.value().same_shape(predict.value())) throw ShapeError("fusion_loss: reference shape differs");
  }
  const auto& w = config.weights;
  const double inv = 1.0 / static_cast<double>(references.size());
  ad::Graph& g = *predict.graph;
  LossGraph out;
  std::vector<ad::Var> weighted;
  if (w[0] != 0.0) {
    std::optional<ad::Var> acc;
    for (const auto& r : references) {
      ad::Var term = ad::affine(ssim_index(predict, r.image, config.ssim), -1.0, 1.0);
      acc = acc ? ad::add(*acc, term) : term;
    }
    out.ssim = ad::scale(*acc, inv);
    weighted.push_back(ad::scale(out.ssim, w[0]));
  }
  if (w[1] != 0.0) {
    ad::Var fp = perceptual_features(bind, predict, extractor, config.perceptual_stage);
    std::optional<ad::Var> acc;
    for (const auto& r : references) {
      ad::Var fr = r.features ? *r.features : perceptual_features(bind, r.image, extractor, config.perceptual_stage);
      ad::Var term = ad::mean_squared_error(fp, fr);
      acc = acc ? ad::add(*acc, term) : term;
    }
    out.perceptual = ad::scale(*acc, inv);
    weighted.push_back(ad::scale(out.perceptual, w[1]));
  }
  if (w[2] != 0.0) {
    ad::Var ep = edge_map(predict);
    std::optional<ad::Var> acc;
    for (const auto& r : references) {
      ad::Var er = r.edges ? *r.edges : edge_map(r.image);
      ad::Var term = ad::affine(ssim_index(ep, er, config.ssim), -1.0, 1.0);
      acc = acc ? ad::add(*acc, term) : term;
    }
    out.edge = ad::scale(*acc, inv);
    weighted.push_back(ad::scale(out.edge, w[2]));
  }
  if (weighted.empty()) {
    out.total = g.constant(Tensor({1}, 0.0));
  } else {
    out.total = weighted.front();
    for (std::size_t i = 1; i < weighted.size(); ++i) out.total = ad::add(out.total, weighted[i]);
  }
  return out;
}

// ---- value forms --------------------------------------------------------

double ssim_index(const Image& x, const Image& y, const SsimParams& p) {
  require_same(x, y, "ssim_index");
  ad::Graph g(false);
  return ssim_index(g.constant(x.to_map()), g.constant(y.to_map()), p).value()[0];
}

FeatureMap ssim_map(const Image& x, const Image& y, const SsimParams& p) {
  require_same(x, y, "ssim_map");
  const auto st = ssim_state(x.to_map(), y.to_map(), p, false);
  return Tensor({1, x.height(), x.width()}, st.map);
}

LossValue ssim_loss(const Image& predict, const Image& reference, const SsimParams& p) {
  require_same(predict, reference, "ssim_loss");
  ad::Graph g;
  ad::Var x = g.leaf(predict.to_map());
  ad::Var root = ad::affine(ssim_index(x, g.constant(reference.to_map()), p), -1.0, 1.0);
  return scalar_loss(g, root, x);
}

LossValue perceptual_loss(const Image& predict, const Image& reference, const backbone::BackboneWeights& extractor,
                          int stage) {
  require_same(predict, reference, "perceptual_loss");
  check_stage(stage);
  ad::Graph g;
  ad::Binder bind(g);
  ad::Var x = g.leaf(predict.to_map());
  ad::Var root = ad::mean_squared_error(perceptual_features(bind, x, extractor, stage),
                                        perceptual_features(bind, g.constant(reference.to_map()), extractor, stage));
  return scalar_loss(g, root, x);
}

FeatureMap edge_map(const Image& image) {
  ad::Graph g(false);
  return edge_map(g.constant(image.to_map())).value();
}

LossValue edge_loss(const Image& predict, const Image& reference, const SsimParams& p) {
  require_same(predict, reference, "edge_loss");
  ad::Graph g;
  ad::Var x = g.leaf(predict.to_map());
  ad::Var root = ad::affine(ssim_index(edge_map(x), edge_map(g.constant(reference.to_map())), p), -1.0, 1.0);
  return scalar_loss(g, root, x);
}

LossValue fusion_loss(const Image& predict, const std::vector<Image>& references, const LossConfig& config,
                      const backbone::BackboneWeights& extractor, LossTerms* terms) {
  if (references.empty()) throw ArgumentError("fusion_loss needs at least one reference image");
  ad::Graph g;
  ad::Binder bind(g);
  ad::Var x = g.leaf(predict.to_map());
  std::vector<Reference> refs;
  for (const auto& r : references) {
    require_same(predict, r, "fusion_loss");
    refs.push_back({g.constant(r.to_map()), std::nullopt, std::nullopt});
  }
  const LossGraph lg = fusion_loss(bind, x, refs, config, extractor);
  if (terms != nullptr) *terms = lg.values();
  return scalar_loss(g, lg.total, x);
}

}  // namespace atnf::losses
