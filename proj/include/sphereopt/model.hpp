#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sphereopt/rng.hpp"
#include "sphereopt/sphere_geometry.hpp"
#include "sphereopt/vec.hpp"

namespace sphereopt {

// Row-major dense matrix, just enough for desk-scale batches.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// One radially-invariant parameter group plus bookkeeping.
struct ParamGroup {
  Vec values;
  std::string group_id;
  bool invariant_flag = true;
};

// ---------------------------------------------------------------------------
// Analytic radially-invariant test function
//   L(x) = 1 - <x/||x||, u*>^2
// with its exact gradient (tangential by construction).
// ---------------------------------------------------------------------------
std::pair<double, Vec> toy_loss_and_grad(const Vec& x, const UnitVector& target_direction);

// ---------------------------------------------------------------------------
// Batch normalization over the batch dimension, one statistic per column.
// ---------------------------------------------------------------------------
struct BatchNormCache {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec mean;     // per column
  Vec inv_std;  // 1/sqrt(var + eps) per column
  Matrix normalized;
};

// Center and normalize each column; requires >= 2 rows. With epsilon = 0 a
// zero-variance column raises DegenerateBatch.
Matrix batchnorm_forward(const Matrix& pre_activations, double epsilon, BatchNormCache* cache);

// Gradient through batch statistics (exact reverse accumulation).
Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& d_normalized);

// ---------------------------------------------------------------------------
// MLP with per-neuron batch normalization after every hidden linear layer.
// Each hidden neuron's incoming weight row is a radially-invariant group.
// (Other normalization layers induce the same invariance with coarser
// grouping -- per layer, or per group of neurons; only per-neuron batch
// normalization is implemented here.)
// ---------------------------------------------------------------------------
struct NormalizedMlpConfig {
  std::vector<std::size_t> layer_widths;  // [n_in, hidden..., n_out]; >= 1 hidden
  double bn_epsilon = 0.0;
  bool affine = false;

  std::size_t hidden_layer_count() const { return layer_widths.size() - 2; }
  void validate() const;
};

struct Batch {
  Matrix inputs;             // B x n_in
  std::vector<int> targets;  // length B
};

struct MlpParams {
  // hidden_weights[l][j]: incoming row of neuron j in hidden layer l.
  std::vector<std::vector<Vec>> hidden_weights;
  std::vector<Vec> gammas;  // per hidden layer (affine only)
  std::vector<Vec> betas;
  std::vector<Vec> output_weights;  // rows of the output layer
  Vec output_bias;
};

using MlpGrads = MlpParams;

class NormalizedMlp {
 public:
  explicit NormalizedMlp(NormalizedMlpConfig config);

  const NormalizedMlpConfig& config() const { return config_; }

  MlpParams init_params(Rng& rng) const;

  double loss(const MlpParams& params, const Batch& batch) const;
  std::pair<double, MlpGrads> loss_and_grad(const MlpParams& params, const Batch& batch) const;

  // Invariant groups in a stable order (layer-major, then neuron).
  static std::vector<Vec*> invariant_groups(MlpParams& params);
  static std::vector<const Vec*> invariant_groups(const MlpParams& params);
  std::vector<std::string> invariant_group_ids() const;

  // Everything that is not radially invariant (affine BN parameters and the
  // output layer), optimized with plain Adam by the harness.
  static std::vector<Vec*> residual_params(MlpParams& params);
  static std::vector<const Vec*> residual_params(const MlpParams& params);

  // Snapshot of all parameters as tagged groups, invariant rows first.
  std::vector<ParamGroup> export_param_groups(const MlpParams& params) const;

 private:
  NormalizedMlpConfig config_;
};

// Flatten/unflatten for the finite-difference oracle.
Vec flatten_params(const MlpParams& params);
MlpParams unflatten_params(const NormalizedMlpConfig& config, const Vec& flat);

// ---------------------------------------------------------------------------
// Central-difference gradient, the independent oracle for gradient checks.
// ---------------------------------------------------------------------------
Vec numerical_gradient(const std::function<double(const Vec&)>& loss_fn, const Vec& x, double h);

// ---------------------------------------------------------------------------
// Synthetic datasets (deterministic in the seed).
// ---------------------------------------------------------------------------
enum class DatasetKind { TwoGaussians, Rings };

struct Dataset {
  std::size_t n_features = 0;
  std::vector<Vec> points;
  std::vector<int> labels;

  std::size_t size() const { return points.size(); }
};

Dataset make_synthetic_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed);

Batch full_batch(const Dataset& data);
// Batches of size batch_size over a shuffled index permutation; the last
// short remainder is dropped so that normalization always sees >= 2 rows.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, Rng& rng);

// CSV interchange: header x1..xn,label then one row per point.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

}  // namespace sphereopt
