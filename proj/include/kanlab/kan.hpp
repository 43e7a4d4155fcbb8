#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kanlab/common.hpp"
#include "kanlab/dataset.hpp"
#include "kanlab/metrics.hpp"
#include "kanlab/optim.hpp"
#include "kanlab/pipeline.hpp"
#include "kanlab/rng.hpp"
#include "kanlab/spline.hpp"

namespace kanlab {

struct KanConfig {
  std::vector<int> width;  // node counts [n0..nL]; last must be 1
  int k = 3;               // spline degree of the edge activations
  int grid = 3;            // intervals per edge spline
  int epochs = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  double classification_threshold = 0.5;
  double domain_lo = -1.0;  // edge spline domain; inputs are standardized
  double domain_hi = 1.0;

  void validate() const {
    if (width.size() < 2)
      throw ConfigError("invalid config: width needs at least 2 layers");
    for (int w : width)
      if (w < 1) throw ConfigError("invalid config: widths must be positive");
    if (width.back() != 1)
      throw ConfigError("invalid config: output width must be 1");
    if (k < 1 || grid < 1)
      throw ConfigError("invalid config: k and grid must be >= 1");
    if (epochs < 1) throw ConfigError("invalid config: epochs must be >= 1");
    if (learning_rate <= 0)
      throw ConfigError("invalid config: learning_rate must be positive");
    if (classification_threshold <= 0 || classification_threshold >= 1)
      throw ConfigError("invalid config: threshold must be in (0,1)");
    if (!(domain_lo < domain_hi))
      throw ConfigError("invalid config: domain_lo must be < domain_hi");
  }
};

/// One KAN layer: a (out_dim x in_dim) grid of spline edge activations plus
/// a silu base term per edge and a bias per output node. All edge splines
/// share the layer's knot vector.
struct KanLayer {
  int in_dim = 0;
  int out_dim = 0;
  KnotVector knots;
  std::vector<double> coeffs;        // [in][out][basis]
  std::vector<double> base_weights;  // [in][out]
  std::vector<double> biases;        // [out]

  std::size_t coeff_base(int i, int j) const {
    return (static_cast<std::size_t>(i) * out_dim + j) * knots.basis_count();
  }

  SplineFunction edge_spline(int j, int i) const {
    SplineFunction f;
    f.knots = knots;
    const std::size_t b = coeff_base(i, j);
    f.coeffs.assign(coeffs.begin() + b, coeffs.begin() + b + knots.basis_count());
    return f;
  }
};

struct KanModel {
  KanConfig config;
  std::vector<KanLayer> layers;
  std::vector<std::pair<int, double>> training_log;  // (epoch, mean train loss)

  std::size_t spline_coeff_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      n += static_cast<std::size_t>(l.in_dim) * l.out_dim * l.knots.basis_count();
    return n;
  }

  std::size_t parameter_count() const {
    std::size_t n = spline_coeff_count();
    for (const auto& l : layers)
      n += static_cast<std::size_t>(l.in_dim) * l.out_dim + l.out_dim;
    return n;
  }
};

/// Gradients with the same shape as the model parameters.
struct LayerGrads {
  std::vector<double> coeffs;
  std::vector<double> base_weights;
  std::vector<double> biases;
};

struct GradientSet {
  std::vector<LayerGrads> layers;

  static GradientSet zeros_like(const KanModel& model) {
    GradientSet g;
    g.layers.reserve(model.layers.size());
    for (const auto& l : model.layers)
      g.layers.push_back({std::vector<double>(l.coeffs.size(), 0.0),
                          std::vector<double>(l.base_weights.size(), 0.0),
                          std::vector<double>(l.biases.size(), 0.0)});
    return g;
  }
};

/// Deterministic construction: spline coefficients from seeded normal(0, 0.1),
/// base weights 1/sqrt(in_dim), biases 0.
inline KanModel kan_new(const KanConfig& config) {
  config.validate();
  KanModel model;
  model.config = config;
  Rng rng(derive_seed(config.seed, seed_stream::model_init));
  for (std::size_t l = 0; l + 1 < config.width.size(); ++l) {
    KanLayer layer;
    layer.in_dim = config.width[l];
    layer.out_dim = config.width[l + 1];
    layer.knots = make_knots(config.domain_lo, config.domain_hi, config.grid, config.k);
    const std::size_t edges = static_cast<std::size_t>(layer.in_dim) * layer.out_dim;
    layer.coeffs.resize(edges * layer.knots.basis_count());
    for (auto& c : layer.coeffs) c = rng.normal(0.0, 0.1);
    layer.base_weights.assign(edges, 1.0 / std::sqrt(static_cast<double>(layer.in_dim)));
    layer.biases.assign(static_cast<std::size_t>(layer.out_dim), 0.0);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Reusable per-call scratch so the training loop stays allocation-free.
struct KanWorkspace {
  std::vector<std::vector<double>> acts;     // activations per layer boundary
  std::vector<std::vector<double>> windows;  // nonzero basis values per input
  std::vector<std::vector<int>> firsts;      // window offsets per input
  std::vector<std::vector<double>> delta;    // backprop buffers
};

namespace detail {

inline void ensure_workspace(const KanModel& model, KanWorkspace& ws) {
  const std::size_t L = model.layers.size();
  ws.acts.resize(L + 1);
  ws.windows.resize(L);
  ws.firsts.resize(L);
  ws.delta.resize(L + 1);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    ws.acts[l].resize(static_cast<std::size_t>(layer.in_dim));
    ws.delta[l].resize(static_cast<std::size_t>(layer.in_dim));
    ws.windows[l].resize(static_cast<std::size_t>(layer.in_dim) * (layer.knots.degree + 1));
    ws.firsts[l].resize(static_cast<std::size_t>(layer.in_dim));
  }
  ws.acts[L].resize(1);
  ws.delta[L].resize(1);
}

/// Forward pass that records activations and basis windows for backprop.
inline double forward_into(const KanModel& model, std::span<const double> x,
                           KanWorkspace& ws) {
  if (x.size() != static_cast<std::size_t>(model.config.width.front()))
    throw DataError("kan_forward: dimension mismatch");
  ensure_workspace(model, ws);
  std::copy(x.begin(), x.end(), ws.acts[0].begin());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const int wn = layer.knots.degree + 1;
    const int basis = layer.knots.basis_count();
    auto& out = ws.acts[l + 1];
    std::copy(layer.biases.begin(), layer.biases.end(), out.begin());
    for (int i = 0; i < layer.in_dim; ++i) {
      const double a = ws.acts[l][static_cast<std::size_t>(i)];
      if (!std::isfinite(a)) throw DataError("kan_forward: non-finite input");
      double* window = ws.windows[l].data() + static_cast<std::size_t>(i) * wn;
      ws.firsts[l][static_cast<std::size_t>(i)] = basis_window(layer.knots, a, window);
      const int first = ws.firsts[l][static_cast<std::size_t>(i)];
      const double sa = silu(a);
      const double* coeff = layer.coeffs.data() + layer.coeff_base(i, 0);
      const double* bw = layer.base_weights.data() +
                         static_cast<std::size_t>(i) * layer.out_dim;
      for (int j = 0; j < layer.out_dim; ++j) {
        const double* cj = coeff + static_cast<std::size_t>(j) * basis + first;
        double acc = 0.0;
        for (int r = 0; r < wn; ++r) acc += cj[r] * window[r];
        out[static_cast<std::size_t>(j)] += bw[j] * sa + acc;
      }
    }
  }
  return ws.acts[model.layers.size()][0];
}

/// Derivative window of a layer's basis (degree reduced by one) at a
/// clamped activation; used for backprop through layer inputs.
inline int deriv_window(const KnotVector& kv, double t, double* out) {
  const double tc = kv.clamp(t);
  const int s = kv.find_span(tc);
  deboor_window(kv.knots, s, kv.degree - 1, tc, out);
  return s;
}

}  // namespace detail

inline double kan_forward(const KanModel& model, std::span<const double> x) {
  KanWorkspace ws;
  return detail::forward_into(model, x, ws);
}

/// Numerically stable binary cross-entropy of sigmoid(score) against target.
inline double bce_loss(double score, int target) {
  return std::max(score, 0.0) - score * target + std::log1p(std::exp(-std::abs(score)));
}

namespace detail {

/// Backprop of weight * bce_loss into `grads`. Returns the sample loss.
inline double backward_into(const KanModel& model, std::span<const double> x,
                            int target, KanWorkspace& ws, GradientSet& grads,
                            double weight) {
  const double score = forward_into(model, x, ws);
  const std::size_t L = model.layers.size();
  ws.delta[L][0] = (sigmoid(score) - static_cast<double>(target)) * weight;

  double dwin[64];
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = model.layers[l];
    auto& lg = grads.layers[l];
    const int wn = layer.knots.degree + 1;
    const int basis = layer.knots.basis_count();
    const int deg = layer.knots.degree;
    const auto& dout = ws.delta[l + 1];
    auto& din = ws.delta[l];
    const bool propagate = l > 0;

    for (int j = 0; j < layer.out_dim; ++j)
      lg.biases[static_cast<std::size_t>(j)] += dout[static_cast<std::size_t>(j)];

    for (int i = 0; i < layer.in_dim; ++i) {
      const double a = ws.acts[l][static_cast<std::size_t>(i)];
      const double sa = silu(a);
      const double* window = ws.windows[l].data() + static_cast<std::size_t>(i) * wn;
      const int first = ws.firsts[l][static_cast<std::size_t>(i)];
      const double* coeff = layer.coeffs.data() + layer.coeff_base(i, 0);
      double* gcoeff = lg.coeffs.data() + layer.coeff_base(i, 0);
      const double* bw = layer.base_weights.data() +
                         static_cast<std::size_t>(i) * layer.out_dim;
      double* gbw = lg.base_weights.data() + static_cast<std::size_t>(i) * layer.out_dim;

      // Inputs outside the (clamped) domain contribute no spline slope.
      const bool inside = layer.knots.in_domain(a);
      double dsa = 0.0;
      int span = 0;
      if (propagate) {
        dsa = silu_deriv(a);
        if (inside) span = deriv_window(layer.knots, a, dwin);
      }

      double dacc = 0.0;
      for (int j = 0; j < layer.out_dim; ++j) {
        const double g = dout[static_cast<std::size_t>(j)];
        gbw[j] += g * sa;
        double* gj = gcoeff + static_cast<std::size_t>(j) * basis + first;
        for (int r = 0; r < wn; ++r) gj[r] += g * window[r];
        if (propagate) {
          double slope = 0.0;
          if (inside) {
            const double* cj = coeff + static_cast<std::size_t>(j) * basis;
            for (int r = 0; r < deg; ++r) {
              const int idx = span - deg + 1 + r;
              const double dt = layer.knots.knots[static_cast<std::size_t>(idx + deg)] -
                                layer.knots.knots[static_cast<std::size_t>(idx)];
              slope += deg * (cj[idx] - cj[idx - 1]) / dt * dwin[r];
            }
          }
          dacc += g * (bw[j] * dsa + slope);
        }
      }
      if (propagate) din[static_cast<std::size_t>(i)] = dacc;
    }
  }
  return bce_loss(score, target) * weight;
}

}  // namespace detail

/// Gradients of bce_loss(kan_forward(x), target) for every parameter.
inline GradientSet kan_backward(const KanModel& model, std::span<const double> x,
                                int target) {
  if (target != 0 && target != 1)
    throw DataError("kan_backward: target must be 0 or 1");
  GradientSet grads = GradientSet::zeros_like(model);
  KanWorkspace ws;
  detail::backward_into(model, x, target, ws, grads, 1.0);
  return grads;
}

inline std::pair<double, int> kan_predict(const KanModel& model,
                                          std::span<const double> x) {
  const double p = sigmoid(kan_forward(model, x));
  return {p, p >= model.config.classification_threshold ? 1 : 0};
}

inline std::vector<double> kan_predict_probs(const KanModel& model,
                                             const Dataset& data) {
  if (data.dim() != static_cast<std::size_t>(model.config.width.front()))
    throw DataError("kan_predict: dimension mismatch between model and data");
  std::vector<double> probs(data.size());
  KanWorkspace ws;
  for (std::size_t r = 0; r < data.size(); ++r)
    probs[r] = sigmoid(detail::forward_into(model, data.features.row(r), ws));
  return probs;
}

/// Full-batch adaptive-moment training. Logs the mean train loss per epoch
/// and keeps the parameters from the best validation-F1 epoch (earliest on
/// ties).
inline void kan_train(KanModel& model, const Dataset& train, const Dataset& valid) {
  if (train.size() == 0 || valid.size() == 0)
    throw DataError("kan_train: empty dataset");
  if (train.dim() != static_cast<std::size_t>(model.config.width.front()))
    throw DataError("kan_train: dimension mismatch");

  const std::size_t n = train.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  GradientSet grads = GradientSet::zeros_like(model);
  KanWorkspace ws;

  std::vector<Adam> opts;
  for (auto& layer : model.layers) {
    opts.emplace_back(layer.coeffs.size(), model.config.learning_rate);
    opts.emplace_back(layer.base_weights.size(), model.config.learning_rate);
    opts.emplace_back(layer.biases.size(), model.config.learning_rate);
  }

  double best_f1 = -1.0;
  std::vector<KanLayer> best_layers = model.layers;
  model.training_log.clear();

  for (int epoch = 1; epoch <= model.config.epochs; ++epoch) {
    for (auto& lg : grads.layers) {
      std::fill(lg.coeffs.begin(), lg.coeffs.end(), 0.0);
      std::fill(lg.base_weights.begin(), lg.base_weights.end(), 0.0);
      std::fill(lg.biases.begin(), lg.biases.end(), 0.0);
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      loss += detail::backward_into(model, train.features.row(r), train.labels[r],
                                    ws, grads, inv_n);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      opts[3 * l].step(model.layers[l].coeffs, grads.layers[l].coeffs);
      opts[3 * l + 1].step(model.layers[l].base_weights, grads.layers[l].base_weights);
      opts[3 * l + 2].step(model.layers[l].biases, grads.layers[l].biases);
    }
    model.training_log.push_back({epoch, loss});

    const auto probs = kan_predict_probs(model, valid);
    const auto rep = compute_metrics(probs, valid.labels,
                                     model.config.classification_threshold);
    const double f1 = rep.f1.value_or(0.0);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_layers = model.layers;
    }
  }
  model.layers = std::move(best_layers);
}

// ---------------------------------------------------------------------------
// Persistence: versioned field-name/value text document. Doubles are written
// in shortest round-trip form, so load(save(m)) reproduces predictions
// bit-exactly.

namespace detail {

inline void write_doubles(std::ostream& out, const char* key,
                          std::span<const double> values) {
  out << key;
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

inline std::vector<double> read_doubles(std::istringstream& line, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  std::string tok;
  while (line >> tok) out.push_back(parse_double(tok));
  if (out.size() != count)
    throw DataError("model file: expected " + std::to_string(count) +
                    " values, got " + std::to_string(out.size()));
  return out;
}

}  // namespace detail

inline std::string model_to_string(const KanModel& model,
                                   const Scaler* scaler = nullptr) {
  std::ostringstream out;
  out << "kanlab model v1\n";
  out << "width";
  for (int w : model.config.width) out << ' ' << w;
  out << '\n';
  out << "k " << model.config.k << '\n';
  out << "grid " << model.config.grid << '\n';
  out << "epochs " << model.config.epochs << '\n';
  out << "learning_rate " << format_double(model.config.learning_rate) << '\n';
  out << "seed " << model.config.seed << '\n';
  out << "threshold " << format_double(model.config.classification_threshold) << '\n';
  out << "domain " << format_double(model.config.domain_lo) << ' '
      << format_double(model.config.domain_hi) << '\n';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    out << "layer " << l << '\n';
    detail::write_doubles(out, "knots", layer.knots.knots);
    detail::write_doubles(out, "biases", layer.biases);
    detail::write_doubles(out, "base_weights", layer.base_weights);
    detail::write_doubles(out, "coeffs", layer.coeffs);
  }
  if (scaler) {
    out << "scaler " << scaler->input_columns.size() << '\n';
    for (const auto& name : scaler->input_columns) out << "column " << name << '\n';
    detail::write_doubles(out, "mean", scaler->mean);
    detail::write_doubles(out, "stddev", scaler->stddev);
    out << "kept";
    for (std::size_t i : scaler->kept) out << ' ' << i;
    out << '\n';
    for (const auto& name : scaler->dropped) out << "dropped " << name << '\n';
  }
  out << "end\n";
  return out.str();
}

struct LoadedModel {
  KanModel model;
  std::optional<Scaler> scaler;
};

inline LoadedModel model_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "kanlab model v1")
    throw DataError("model file: unrecognized header");

  LoadedModel loaded;
  KanConfig& cfg = loaded.model.config;
  cfg.width.clear();
  std::size_t layer_idx = 0;
  bool in_scaler = false;

  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty()) continue;
    if (key == "end") break;
    if (key == "width") {
      int w;
      while (ls >> w) cfg.width.push_back(w);
    } else if (key == "k") ls >> cfg.k;
    else if (key == "grid") ls >> cfg.grid;
    else if (key == "epochs") ls >> cfg.epochs;
    else if (key == "learning_rate") { std::string t; ls >> t; cfg.learning_rate = parse_double(t); }
    else if (key == "seed") ls >> cfg.seed;
    else if (key == "threshold") { std::string t; ls >> t; cfg.classification_threshold = parse_double(t); }
    else if (key == "domain") {
      std::string a, b;
      ls >> a >> b;
      cfg.domain_lo = parse_double(a);
      cfg.domain_hi = parse_double(b);
    } else if (key == "layer") {
      ls >> layer_idx;
      if (layer_idx + 1 >= cfg.width.size())
        throw DataError("model file: layer index out of range");
      KanLayer layer;
      layer.in_dim = cfg.width[layer_idx];
      layer.out_dim = cfg.width[layer_idx + 1];
      layer.knots = make_knots(cfg.domain_lo, cfg.domain_hi, cfg.grid, cfg.k);
      const std::size_t edges = static_cast<std::size_t>(layer.in_dim) * layer.out_dim;

      std::string sub;
      if (!std::getline(in, sub)) throw DataError("model file: truncated layer");
      std::istringstream kls(sub);
      kls >> key;
      if (key != "knots") throw DataError("model file: expected knots");
      layer.knots.knots = detail::read_doubles(kls, layer.knots.knots.size());

      if (!std::getline(in, sub)) throw DataError("model file: truncated layer");
      std::istringstream bls(sub);
      bls >> key;
      if (key != "biases") throw DataError("model file: expected biases");
      layer.biases = detail::read_doubles(bls, static_cast<std::size_t>(layer.out_dim));

      if (!std::getline(in, sub)) throw DataError("model file: truncated layer");
      std::istringstream wls(sub);
      wls >> key;
      if (key != "base_weights") throw DataError("model file: expected base_weights");
      layer.base_weights = detail::read_doubles(wls, edges);

      if (!std::getline(in, sub)) throw DataError("model file: truncated layer");
      std::istringstream cls(sub);
      cls >> key;
      if (key != "coeffs") throw DataError("model file: expected coeffs");
      layer.coeffs =
          detail::read_doubles(cls, edges * static_cast<std::size_t>(layer.knots.basis_count()));
      loaded.model.layers.push_back(std::move(layer));
    } else if (key == "scaler") {
      in_scaler = true;
      loaded.scaler = Scaler{};
    } else if (in_scaler && key == "column") {
      std::string rest;
      std::getline(ls, rest);
      loaded.scaler->input_columns.push_back(rest.empty() ? rest : rest.substr(1));
    } else if (in_scaler && key == "mean") {
      loaded.scaler->mean = detail::read_doubles(ls, loaded.scaler->input_columns.size());
    } else if (in_scaler && key == "stddev") {
      loaded.scaler->stddev = detail::read_doubles(ls, loaded.scaler->input_columns.size());
    } else if (in_scaler && key == "kept") {
      std::size_t idx;
      while (ls >> idx) loaded.scaler->kept.push_back(idx);
    } else if (in_scaler && key == "dropped") {
      std::string rest;
      std::getline(ls, rest);
      loaded.scaler->dropped.push_back(rest.empty() ? rest : rest.substr(1));
    } else {
      throw DataError("model file: unknown key '" + key + "'");
    }
  }

  cfg.validate();
  if (loaded.model.layers.size() + 1 != cfg.width.size())
    throw DataError("model file: wrong layer count");
  return loaded;
}

inline void save_model(const KanModel& model, const std::string& path,
                       const Scaler* scaler = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path);
  out << model_to_string(model, scaler);
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing or unreadable model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace kanlab
