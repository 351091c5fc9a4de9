#include "sphereopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace sphereopt {

std::pair<double, Vec> toy_loss_and_grad(const Vec& x, const UnitVector& target_direction) {
  check_same_dim(x, target_direction.coords());
  const double r = norm2(x);
  if (r == 0.0) throw ZeroVector("toy loss at zero parameters");
  const Vec u = scaled(x, 1.0 / r);
  const double s = dot(u, target_direction.coords());
  const double loss = 1.0 - s * s;
  // d/dx [<x,u*>/||x||] = (u* - s u)/r, so grad = -(2s/r)(u* - s u).
  Vec grad = sub(target_direction.coords(), scaled(u, s));
  grad = scaled(grad, -2.0 * s / r);
  return {loss, grad};
}

Matrix batchnorm_forward(const Matrix& pre_activations, double epsilon, BatchNormCache* cache) {
  const std::size_t b = pre_activations.rows;
  const std::size_t h = pre_activations.cols;
  if (b < 2) throw ShapeMismatch("batchnorm needs at least two rows");

  BatchNormCache local;
  BatchNormCache& c = cache ? *cache : local;
  c.rows = b;
  c.cols = h;
  c.mean.assign(h, 0.0);
  c.inv_std.assign(h, 0.0);
  c.normalized = Matrix(b, h);

  for (std::size_t j = 0; j < h; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < b; ++i) mu += pre_activations.at(i, j);
    mu /= static_cast<double>(b);
    double var = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double d = pre_activations.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(b);
    if (epsilon == 0.0 && var == 0.0)
      throw DegenerateBatch("zero variance in column " + std::to_string(j));
    const double istd = 1.0 / std::sqrt(var + epsilon);
    c.mean[j] = mu;
    c.inv_std[j] = istd;
    for (std::size_t i = 0; i < b; ++i)
      c.normalized.at(i, j) = (pre_activations.at(i, j) - mu) * istd;
  }
  return c.normalized;
}

Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& d_normalized) {
  const std::size_t b = cache.rows;
  const std::size_t h = cache.cols;
  if (d_normalized.rows != b || d_normalized.cols != h)
    throw ShapeMismatch("batchnorm backward shape");

  Matrix d_pre(b, h);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t j = 0; j < h; ++j) {
    double sum_d = 0.0;
    double sum_dx = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      sum_d += d_normalized.at(i, j);
      sum_dx += d_normalized.at(i, j) * cache.normalized.at(i, j);
    }
    for (std::size_t i = 0; i < b; ++i) {
      const double xhat = cache.normalized.at(i, j);
      d_pre.at(i, j) =
          cache.inv_std[j] * (d_normalized.at(i, j) - inv_b * sum_d - inv_b * xhat * sum_dx);
    }
  }
  return d_pre;
}

void NormalizedMlpConfig::validate() const {
  if (layer_widths.size() < 3)
    throw ShapeMismatch("layer_widths needs input, at least one hidden, and output");
  for (std::size_t w : layer_widths)
    if (w < 1) throw ShapeMismatch("layer widths must be >= 1");
  if (bn_epsilon < 0.0) throw ShapeMismatch("bn_epsilon must be >= 0");
}

NormalizedMlp::NormalizedMlp(NormalizedMlpConfig config) : config_(std::move(config)) {
  config_.validate();
}

MlpParams NormalizedMlp::init_params(Rng& rng) const {
  MlpParams p;
  const auto& w = config_.layer_widths;
  const std::size_t hidden = config_.hidden_layer_count();
  p.hidden_weights.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    const std::size_t fan_in = w[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    p.hidden_weights[l].resize(w[l + 1]);
    for (auto& row : p.hidden_weights[l]) {
      row.resize(fan_in);
      for (auto& c : row) c = scale * rng.normal();
    }
  }
  if (config_.affine) {
    p.gammas.resize(hidden);
    p.betas.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
      p.gammas[l].assign(w[l + 1], 1.0);
      p.betas[l].assign(w[l + 1], 0.0);
    }
  }
  const std::size_t out = w.back();
  const std::size_t out_fan_in = w[w.size() - 2];
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(out_fan_in));
  p.output_weights.resize(out);
  for (auto& row : p.output_weights) {
    row.resize(out_fan_in);
    for (auto& c : row) c = out_scale * rng.normal();
  }
  p.output_bias.assign(out, 0.0);
  return p;
}

namespace {

struct ForwardTrace {
  std::vector<Matrix> layer_inputs;  // input to hidden layer l
  std::vector<BatchNormCache> bn;
  std::vector<Matrix> affine_out;  // post-affine (pre-relu)
  Matrix last_hidden;              // input to the output layer
  Matrix probs;                    // softmax outputs
  double loss = 0.0;
};

Matrix linear_rows(const Matrix& in, const std::vector<Vec>& rows) {
  const std::size_t b = in.rows;
  const std::size_t h = rows.size();
  Matrix out(b, h);
  for (std::size_t j = 0; j < h; ++j) {
    if (rows[j].size() != in.cols) throw ShapeMismatch("linear layer fan-in");
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < in.cols; ++k) s += in.at(i, k) * rows[j][k];
      out.at(i, j) = s;
    }
  }
  return out;
}

double forward_pass(const NormalizedMlpConfig& cfg, const MlpParams& p, const Batch& batch,
                    ForwardTrace* trace) {
  const std::size_t b = batch.inputs.rows;
  if (batch.inputs.cols != cfg.layer_widths.front()) throw ShapeMismatch("batch feature count");
  if (batch.targets.size() != b) throw ShapeMismatch("batch target count");
  if (b < 2) throw ShapeMismatch("batch needs at least two samples");

  const std::size_t hidden = cfg.hidden_layer_count();
  Matrix cur = batch.inputs;
  if (trace) {
    trace->layer_inputs.resize(hidden);
    trace->bn.resize(hidden);
    trace->affine_out.resize(hidden);
  }
  for (std::size_t l = 0; l < hidden; ++l) {
    if (trace) trace->layer_inputs[l] = cur;
    Matrix pre = linear_rows(cur, p.hidden_weights[l]);
    BatchNormCache cache;
    Matrix normed = batchnorm_forward(pre, cfg.bn_epsilon, &cache);
    Matrix act = normed;
    if (cfg.affine) {
      for (std::size_t j = 0; j < act.cols; ++j)
        for (std::size_t i = 0; i < act.rows; ++i)
          act.at(i, j) = p.gammas[l][j] * normed.at(i, j) + p.betas[l][j];
    }
    if (trace) {
      trace->bn[l] = std::move(cache);
      trace->affine_out[l] = act;
    }
    for (auto& v : act.data) v = std::max(v, 0.0);  // relu
    cur = std::move(act);
  }
  if (trace) trace->last_hidden = cur;

  Matrix logits = linear_rows(cur, p.output_weights);
  for (std::size_t j = 0; j < logits.cols; ++j)
    for (std::size_t i = 0; i < logits.rows; ++i) logits.at(i, j) += p.output_bias[j];

  // Mean softmax cross-entropy with log-sum-exp stabilization.
  const std::size_t classes = logits.cols;
  Matrix probs(b, classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const int y = batch.targets[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ShapeMismatch("label out of range");
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(logits.at(i, j) - mx);
    const double logz = std::log(z) + mx;
    for (std::size_t j = 0; j < classes; ++j) probs.at(i, j) = std::exp(logits.at(i, j) - logz);
    loss += logz - logits.at(i, static_cast<std::size_t>(y));
  }
  loss /= static_cast<double>(b);
  if (trace) {
    trace->probs = std::move(probs);
    trace->loss = loss;
  }
  return loss;
}

}  // namespace

double NormalizedMlp::loss(const MlpParams& params, const Batch& batch) const {
  return forward_pass(config_, params, batch, nullptr);
}

std::pair<double, MlpGrads> NormalizedMlp::loss_and_grad(const MlpParams& params,
                                                         const Batch& batch) const {
  ForwardTrace trace;
  forward_pass(config_, params, batch, &trace);

  const std::size_t b = batch.inputs.rows;
  const std::size_t hidden = config_.hidden_layer_count();
  const double inv_b = 1.0 / static_cast<double>(b);

  MlpGrads g;
  g.hidden_weights.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    g.hidden_weights[l].assign(params.hidden_weights[l].size(),
                               Vec(params.hidden_weights[l][0].size(), 0.0));
  }
  if (config_.affine) {
    g.gammas.resize(hidden);
    g.betas.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
      g.gammas[l].assign(params.gammas[l].size(), 0.0);
      g.betas[l].assign(params.betas[l].size(), 0.0);
    }
  }
  g.output_weights.assign(params.output_weights.size(), Vec(params.output_weights[0].size(), 0.0));
  g.output_bias.assign(params.output_bias.size(), 0.0);

  // d(loss)/d(logits) = (softmax - onehot)/B
  const std::size_t classes = params.output_weights.size();
  Matrix dlogits(b, classes);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < classes; ++j)
      dlogits.at(i, j) =
          inv_b * (trace.probs.at(i, j) -
                   (static_cast<std::size_t>(batch.targets[i]) == j ? 1.0 : 0.0));

  for (std::size_t j = 0; j < classes; ++j) {
    for (std::size_t i = 0; i < b; ++i) {
      g.output_bias[j] += dlogits.at(i, j);
      for (std::size_t k = 0; k < trace.last_hidden.cols; ++k)
        g.output_weights[j][k] += dlogits.at(i, j) * trace.last_hidden.at(i, k);
    }
  }

  Matrix d_cur(b, trace.last_hidden.cols);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < d_cur.cols; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < classes; ++j) s += dlogits.at(i, j) * params.output_weights[j][k];
      d_cur.at(i, k) = s;
    }

  for (std::size_t li = hidden; li-- > 0;) {
    // relu
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < d_cur.cols; ++j)
        if (trace.affine_out[li].at(i, j) <= 0.0) d_cur.at(i, j) = 0.0;

    // affine
    Matrix d_norm = d_cur;
    if (config_.affine) {
      for (std::size_t j = 0; j < d_cur.cols; ++j) {
        for (std::size_t i = 0; i < b; ++i) {
          g.gammas[li][j] += d_cur.at(i, j) * trace.bn[li].normalized.at(i, j);
          g.betas[li][j] += d_cur.at(i, j);
          d_norm.at(i, j) = d_cur.at(i, j) * params.gammas[li][j];
        }
      }
    }

    Matrix d_pre = batchnorm_backward(trace.bn[li], d_norm);

    const Matrix& in = trace.layer_inputs[li];
    for (std::size_t j = 0; j < d_pre.cols; ++j)
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < in.cols; ++k)
          g.hidden_weights[li][j][k] += d_pre.at(i, j) * in.at(i, k);

    if (li > 0) {
      Matrix d_prev(b, in.cols);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < in.cols; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < d_pre.cols; ++j)
            s += d_pre.at(i, j) * params.hidden_weights[li][j][k];
          d_prev.at(i, k) = s;
        }
      d_cur = std::move(d_prev);
    }
  }

  return {trace.loss, std::move(g)};
}

std::vector<Vec*> NormalizedMlp::invariant_groups(MlpParams& params) {
  std::vector<Vec*> out;
  for (auto& layer : params.hidden_weights)
    for (auto& row : layer) out.push_back(&row);
  return out;
}

std::vector<const Vec*> NormalizedMlp::invariant_groups(const MlpParams& params) {
  std::vector<const Vec*> out;
  for (const auto& layer : params.hidden_weights)
    for (const auto& row : layer) out.push_back(&row);
  return out;
}

std::vector<std::string> NormalizedMlp::invariant_group_ids() const {
  std::vector<std::string> ids;
  for (std::size_t l = 0; l + 2 < config_.layer_widths.size(); ++l)
    for (std::size_t j = 0; j < config_.layer_widths[l + 1]; ++j)
      ids.push_back("L" + std::to_string(l + 1) + "N" + std::to_string(j));
  return ids;
}

std::vector<Vec*> NormalizedMlp::residual_params(MlpParams& params) {
  std::vector<Vec*> out;
  for (auto& v : params.gammas) out.push_back(&v);
  for (auto& v : params.betas) out.push_back(&v);
  for (auto& v : params.output_weights) out.push_back(&v);
  out.push_back(&params.output_bias);
  return out;
}

std::vector<const Vec*> NormalizedMlp::residual_params(const MlpParams& params) {
  std::vector<const Vec*> out;
  for (const auto& v : params.gammas) out.push_back(&v);
  for (const auto& v : params.betas) out.push_back(&v);
  for (const auto& v : params.output_weights) out.push_back(&v);
  out.push_back(&params.output_bias);
  return out;
}

std::vector<ParamGroup> NormalizedMlp::export_param_groups(const MlpParams& params) const {
  std::vector<ParamGroup> out;
  const auto ids = invariant_group_ids();
  const auto groups = invariant_groups(params);
  for (std::size_t g = 0; g < groups.size(); ++g)
    out.push_back(ParamGroup{*groups[g], ids[g], true});
  const auto residuals = residual_params(params);
  for (std::size_t r = 0; r < residuals.size(); ++r)
    out.push_back(ParamGroup{*residuals[r], "R" + std::to_string(r), false});
  return out;
}

Vec flatten_params(const MlpParams& params) {
  Vec flat;
  auto append = [&flat](const Vec& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  for (const auto& layer : params.hidden_weights)
    for (const auto& row : layer) append(row);
  for (const auto& v : params.gammas) append(v);
  for (const auto& v : params.betas) append(v);
  for (const auto& row : params.output_weights) append(row);
  append(params.output_bias);
  return flat;
}

MlpParams unflatten_params(const NormalizedMlpConfig& config, const Vec& flat) {
  config.validate();
  MlpParams p;
  std::size_t pos = 0;
  auto take = [&flat, &pos](std::size_t n) {
    if (pos + n > flat.size()) throw ShapeMismatch("flat parameter vector too short");
    Vec v(flat.begin() + static_cast<long>(pos), flat.begin() + static_cast<long>(pos + n));
    pos += n;
    return v;
  };
  const auto& w = config.layer_widths;
  const std::size_t hidden = config.hidden_layer_count();
  p.hidden_weights.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    p.hidden_weights[l].resize(w[l + 1]);
    for (auto& row : p.hidden_weights[l]) row = take(w[l]);
  }
  if (config.affine) {
    p.gammas.resize(hidden);
    p.betas.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) p.gammas[l] = take(w[l + 1]);
    for (std::size_t l = 0; l < hidden; ++l) p.betas[l] = take(w[l + 1]);
  }
  p.output_weights.resize(w.back());
  for (auto& row : p.output_weights) row = take(w[w.size() - 2]);
  p.output_bias = take(w.back());
  if (pos != flat.size()) throw ShapeMismatch("flat parameter vector too long");
  return p;
}

Vec numerical_gradient(const std::function<double(const Vec&)>& loss_fn, const Vec& x, double h) {
  Vec g(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double up = loss_fn(probe);
    probe[i] = xi - h;
    const double down = loss_fn(probe);
    probe[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Dataset make_synthetic_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  if (n < 4) throw ShapeMismatch("synthetic datasets need n >= 4");
  Rng rng(seed);
  Dataset d;
  d.n_features = 2;
  d.points.reserve(n);
  d.labels.reserve(n);
  switch (kind) {
    case DatasetKind::TwoGaussians: {
      // Linearly separable: means at distance 4, per-coordinate noise
      // truncated at 1.5 sigma, so the margin along the axis is >= 1.
      for (std::size_t i = 0; i < n; ++i) {
        const int label = i < n / 2 ? 0 : 1;
        const double cx = label == 0 ? -2.0 : 2.0;
        d.points.push_back({cx + rng.truncated_normal(1.5), rng.truncated_normal(1.5)});
        d.labels.push_back(label);
      }
      break;
    }
    case DatasetKind::Rings: {
      // Close radii and near-equispaced angles: any tangent cut catches only
      // a small cap of the outer ring, and the even angular coverage keeps
      // empirical cap counts at their geometric values, so the best linear
      // rule stays near chance.
      const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const std::size_t half = n / 2;
      for (std::size_t i = 0; i < n; ++i) {
        const int label = i < half ? 0 : 1;
        const std::size_t idx = label == 0 ? i : i - half;
        const std::size_t count = label == 0 ? half : n - half;
        const double spacing = 2.0 * std::numbers::pi / static_cast<double>(count);
        const double angle = (label == 0 ? phase0 : phase1) +
                             spacing * (static_cast<double>(idx) + rng.uniform(-0.25, 0.25));
        const double radius = (label == 0 ? 1.0 : 1.08) * (1.0 + 0.02 * rng.uniform(-1.0, 1.0));
        d.points.push_back({radius * std::cos(angle), radius * std::sin(angle)});
        d.labels.push_back(label);
      }
      break;
    }
  }
  return d;
}

Batch full_batch(const Dataset& data) {
  Batch b;
  b.inputs = Matrix(data.size(), data.n_features);
  b.targets = data.labels;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.n_features; ++j) b.inputs.at(i, j) = data.points[i][j];
  return b;
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, Rng& rng) {
  if (batch_size < 2) throw ShapeMismatch("batch_size must be >= 2");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start + batch_size <= data.size(); start += batch_size) {
    Batch b;
    b.inputs = Matrix(batch_size, data.n_features);
    b.targets.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const std::size_t src = order[start + i];
      for (std::size_t j = 0; j < data.n_features; ++j)
        b.inputs.at(i, j) = data.points[src][j];
      b.targets[i] = data.labels[src];
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.n_features; ++j) out << "x" << (j + 1) << ",";
  out << "label\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.n_features; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.points[i][j]);
      out << buf << ",";
    }
    out << data.labels[i] << "\n";
  }
}

Dataset read_dataset_csv(std::istream& in) {
  Dataset d;
  std::string line;
  if (!std::getline(in, line)) throw ShapeMismatch("empty dataset csv");
  d.n_features = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    Vec point;
    for (std::size_t j = 0; j < d.n_features; ++j) {
      if (!std::getline(row, cell, ',')) throw ShapeMismatch("short dataset row");
      point.push_back(std::stod(cell));
    }
    if (!std::getline(row, cell)) throw ShapeMismatch("missing label");
    d.points.push_back(std::move(point));
    d.labels.push_back(std::stoi(cell));
  }
  return d;
}

}  // namespace sphereopt
