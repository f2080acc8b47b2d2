#include "layercard/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "layercard/diagnostics.hpp"
#include "layercard/errors.hpp"
#include "layercard/rng.hpp"

namespace layercard {

namespace {

constexpr const char* kModelSchema = "toynet/v1";

void validate_spec(const ToyModelSpec& spec) {
  if (spec.layers < 2) throw InvalidArgument("toynet: need at least 2 layers");
  if (spec.width < 2) throw InvalidArgument("toynet: need width >= 2");
  if (spec.head_dim < 1) throw InvalidArgument("toynet: need head_dim >= 1");
  validate_layer_set(spec.teacher_layers, spec.layers, "toynet teacher layers");
}

void validate_batch(const ToyModel& m, const Matrix& inputs) {
  if (inputs.rows() < 1) throw InvalidArgument("toynet: empty batch");
  if (inputs.cols() != m.spec.width) {
    throw DimensionMismatch("toynet: input width != model width");
  }
}

void validate_batch(const ToyModel& m, const Batch& batch) {
  validate_batch(m, batch.inputs);
  if (batch.targets.rows() != batch.inputs.rows() ||
      batch.targets.cols() != m.spec.head_dim) {
    throw DimensionMismatch("toynet: target shape mismatch");
  }
}

Matrix uniform_matrix(Index rows, Index cols, double scale, CounterRng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

Matrix effective_w(const ToyModel& m, Index l0) {
  if (m.adapters[static_cast<std::size_t>(l0)].has_value()) {
    const Adapter& ad = *m.adapters[static_cast<std::size_t>(l0)];
    return m.w[static_cast<std::size_t>(l0)] + ad.a * ad.b;
  }
  return m.w[static_cast<std::size_t>(l0)];
}

Matrix apply_act(Nonlinearity nl, const Matrix& z) {
  if (nl == Nonlinearity::kIdentity) return z;
  return z.array().tanh().matrix();
}

// Derivative through the stored activation value: identity -> 1, tanh -> 1-a^2.
Matrix act_prime_from_value(Nonlinearity nl, const Matrix& a) {
  if (nl == Nonlinearity::kIdentity) return Matrix::Ones(a.rows(), a.cols());
  return (1.0 - a.array().square()).matrix();
}

struct Trace {
  std::vector<Matrix> h;    // h[l] after l layers, h[0] = inputs; n x width
  std::vector<Matrix> act;  // act[l-1] = nonlinearity output of layer l
  Matrix outputs;           // n x head_dim
};

Trace run_forward(const ToyModel& m, const Matrix& inputs, bool teacher) {
  validate_batch(m, inputs);
  const Index layers = m.spec.layers;
  Trace t;
  t.h.reserve(static_cast<std::size_t>(layers) + 1);
  t.act.reserve(static_cast<std::size_t>(layers));
  t.h.push_back(inputs);
  for (Index l0 = 0; l0 < layers; ++l0) {
    const Matrix& weights = teacher ? m.teacher_w[static_cast<std::size_t>(l0)]
                                    : Matrix(effective_w(m, l0));
    const Matrix z = t.h.back() * weights.transpose();
    t.act.push_back(apply_act(m.spec.nonlinearity, z));
    t.h.push_back(t.h.back() + t.act.back() * m.v[static_cast<std::size_t>(l0)].transpose());
  }
  t.outputs = t.h.back() * m.head.transpose();
  return t;
}

std::string adapter_label(Index layer, Index rank) {
  return "adapter:" + std::to_string(layer) + ":" + std::to_string(rank);
}

Json mat_to_blob(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return encode_doubles(flat);
}

Matrix mat_from_blob(const Json& j, Index rows, Index cols, const char* what) {
  const std::vector<double> flat = decode_doubles(j.get<std::string>());
  if (static_cast<Index>(flat.size()) != rows * cols) {
    throw IoError(std::string("toynet: bad weight blob size for ") + what);
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = flat[k++];
  return m;
}

}  // namespace

std::string nonlinearity_name(Nonlinearity n) {
  return n == Nonlinearity::kIdentity ? "identity" : "tanh";
}

Nonlinearity nonlinearity_from_name(std::string_view name) {
  if (name == "identity") return Nonlinearity::kIdentity;
  if (name == "tanh") return Nonlinearity::kTanh;
  throw InvalidArgument("toynet: unknown nonlinearity '" + std::string(name) + "'");
}

ToyModel generate(const ToyModelSpec& spec) {
  validate_spec(spec);
  ToyModel m;
  m.spec = spec;
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.width));
  CounterRng root(spec.seed, fnv1a64("toynet"));
  m.w.reserve(static_cast<std::size_t>(spec.layers));
  m.v.reserve(static_cast<std::size_t>(spec.layers));
  for (Index l = 1; l <= spec.layers; ++l) {
    CounterRng wr = root.fork("w:" + std::to_string(l));
    CounterRng vr = root.fork("v:" + std::to_string(l));
    m.w.push_back(uniform_matrix(spec.width, spec.width, scale, wr));
    m.v.push_back(uniform_matrix(spec.width, spec.width, scale, vr));
  }
  CounterRng hr = root.fork("head");
  m.head = uniform_matrix(spec.head_dim, spec.width, scale, hr);

  m.teacher_w = m.w;
  const Index pert_rank = std::min<Index>(2, spec.width);
  for (Index l : spec.teacher_layers) {
    CounterRng tr = root.fork("teacher:" + std::to_string(l));
    const Matrix u = uniform_matrix(spec.width, pert_rank, scale, tr);
    const Matrix z = uniform_matrix(pert_rank, spec.width, scale, tr);
    m.teacher_w[static_cast<std::size_t>(l - 1)] += spec.teacher_scale * (u * z);
  }
  m.adapters.assign(static_cast<std::size_t>(spec.layers), std::nullopt);
  return m;
}

Batch sample_batch(const ToyModel& m, Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("toynet: batch size must be >= 1");
  CounterRng rng(seed, fnv1a64("sample_batch"));
  Batch b;
  b.inputs.resize(n, m.spec.width);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m.spec.width; ++j) b.inputs(i, j) = rng.normal();
  b.targets = teacher_forward(m, b.inputs);
  return b;
}

Matrix forward(const ToyModel& m, const Matrix& inputs) {
  return run_forward(m, inputs, false).outputs;
}

Matrix teacher_forward(const ToyModel& m, const Matrix& inputs) {
  return run_forward(m, inputs, true).outputs;
}

Capture forward_capture(const ToyModel& m, const Matrix& inputs) {
  Trace t = run_forward(m, inputs, false);
  Capture c;
  c.outputs = std::move(t.outputs);
  t.h.pop_back();  // block inputs only: h_0 .. h_{L-1}
  c.activations = std::move(t.h);
  return c;
}

double loss(const ToyModel& m, const Batch& batch) {
  validate_batch(m, batch);
  const Matrix out = forward(m, batch.inputs);
  return (out - batch.targets).squaredNorm() /
         (2.0 * static_cast<double>(batch.inputs.rows()));
}

void attach_adapters(ToyModel& m, const LayerSet& s, Index rank) {
  if (s.empty()) throw EmptySelection("toynet: no layers to adapt");
  if (rank < 1) throw InvalidArgument("toynet: adapter rank must be >= 1");
  validate_layer_set(s, m.spec.layers, "attach_adapters");
  const double scale = 1.0 / std::sqrt(static_cast<double>(m.spec.width));
  CounterRng root(m.spec.seed, fnv1a64("toynet"));
  for (Index l : s) {
    CounterRng ar = root.fork(adapter_label(l, rank));
    Adapter ad;
    ad.a = uniform_matrix(m.spec.width, rank, scale, ar);
    ad.b = Matrix::Zero(rank, m.spec.width);
    m.adapters[static_cast<std::size_t>(l - 1)] = std::move(ad);
  }
}

std::vector<AdapterGrad> grad_adapters(const ToyModel& m, const Batch& batch,
                                       const LayerSet& s) {
  if (s.empty()) throw EmptySelection("toynet: no layers selected for gradients");
  validate_layer_set(s, m.spec.layers, "grad_adapters");
  for (Index l : s) {
    if (!m.adapters[static_cast<std::size_t>(l - 1)].has_value()) {
      throw InvalidArgument("toynet: layer " + std::to_string(l) + " has no adapter");
    }
  }
  validate_batch(m, batch);

  const Trace t = run_forward(m, batch.inputs, false);
  const double n = static_cast<double>(batch.inputs.rows());
  const Index lmin = s.front();

  std::vector<AdapterGrad> grads(s.size());
  // dL/dh_L for the mean loss; walk layers backward, stopping at the
  // earliest adapted layer since nothing below it is trainable.
  Matrix delta = ((t.outputs - batch.targets) / n) * m.head;
  std::size_t cursor = s.size();
  for (Index l = m.spec.layers; l >= lmin; --l) {
    const std::size_t l0 = static_cast<std::size_t>(l - 1);
    const Matrix weff = effective_w(m, static_cast<Index>(l0));
    const Matrix da = delta * m.v[l0];
    const Matrix dz =
        da.cwiseProduct(act_prime_from_value(m.spec.nonlinearity, t.act[l0]));
    if (cursor > 0 && s[cursor - 1] == l) {
      --cursor;
      const Adapter& ad = *m.adapters[l0];
      const Matrix dweff = dz.transpose() * t.h[l0];
      grads[cursor].layer = l;
      grads[cursor].da = dweff * ad.b.transpose();
      grads[cursor].db = ad.a.transpose() * dweff;
    }
    if (l > lmin) delta += dz * weff;
  }
  return grads;
}

std::vector<LayerProfile> profile_layers(const ToyModel& m, const Batch& probe,
                                         const ProfileOptions& opts) {
  validate_batch(m, probe);
  if (opts.rank < 1) throw InvalidArgument("toynet: profile rank must be >= 1");

  // Profile a copy with fresh zero adapters everywhere so the forward pass
  // is the frozen one regardless of the caller's adapter state.
  ToyModel probe_model = m;
  LayerSet all;
  for (Index l = 1; l <= m.spec.layers; ++l) all.push_back(l);
  probe_model.adapters.assign(static_cast<std::size_t>(m.spec.layers), std::nullopt);
  attach_adapters(probe_model, all, opts.rank);

  const Trace t = run_forward(probe_model, probe.inputs, false);
  const Index n = probe.inputs.rows();
  const Index width = m.spec.width;

  // Unscaled per-sample backward: row i of dz at layer l is the gradient of
  // the per-sample loss 0.5*||F(x_i)-t_i||^2 w.r.t. that sample's z_l.
  Matrix delta = (t.outputs - probe.targets) * probe_model.head;
  std::vector<Matrix> dz_per_layer(static_cast<std::size_t>(m.spec.layers));
  for (Index l = m.spec.layers; l >= 1; --l) {
    const std::size_t l0 = static_cast<std::size_t>(l - 1);
    const Matrix da = delta * probe_model.v[l0];
    dz_per_layer[l0] =
        da.cwiseProduct(act_prime_from_value(m.spec.nonlinearity, t.act[l0]));
    if (l > 1) delta += dz_per_layer[l0] * effective_w(probe_model, static_cast<Index>(l0));
  }

  std::vector<LayerProfile> out;
  out.reserve(static_cast<std::size_t>(m.spec.layers));
  for (Index l = 1; l <= m.spec.layers; ++l) {
    const std::size_t l0 = static_cast<std::size_t>(l - 1);
    const Matrix& phi = t.h[l0];
    const Matrix& dz = dz_per_layer[l0];
    const Adapter& ad = *probe_model.adapters[l0];

    LayerProfile p;
    p.layer = l;
    std::vector<double> grad_norms, phi_sqnorms;
    grad_norms.reserve(static_cast<std::size_t>(n));
    phi_sqnorms.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      // At B=0 only the B-block gradient is nonzero and the per-sample block
      // is the rank-one (A^T dz_i) phi_i^T, so its norm factorizes.
      grad_norms.push_back((ad.a.transpose() * dz.row(i).transpose()).norm() *
                           phi.row(i).norm());
      phi_sqnorms.push_back(phi.row(i).squaredNorm());
    }
    if (opts.per_sample_grad) {
      double acc = 0.0;
      for (double g : grad_norms) acc += g;
      p.grad_norm = acc / static_cast<double>(n);
    } else {
      p.grad_norm = (ad.a.transpose() * (dz.transpose() * phi) / static_cast<double>(n)).norm();
    }
    double energy = 0.0;
    for (double e : phi_sqnorms) energy += e;
    p.sigma_hat = energy / static_cast<double>(n) / static_cast<double>(width);
    const std::vector<double> grads_for_proxy =
        opts.per_sample_grad ? grad_norms
                             : std::vector<double>(static_cast<std::size_t>(n), p.grad_norm);
    p.resnorm = resnorm_proxy(grads_for_proxy, phi_sqnorms, width);

    const FeatureStats fs = accumulate_stats(phi);
    p.erank = effective_rank(fs);
    const Spectrum spec = eigendecompose(fs.sigma);
    const double trace = spec.eigenvalues.sum();
    const Index k = std::min<Index>(opts.spectrum_head, width);
    p.spectrum_head = spec.eigenvalues.head(k) / trace;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> layer_flop_units(const ToyModel& m, Index n) {
  const double unit = static_cast<double>(n) * static_cast<double>(m.spec.width) *
                      static_cast<double>(m.spec.width);
  return std::vector<double>(static_cast<std::size_t>(m.spec.layers), unit);
}

std::vector<double> layer_act_units(const ToyModel& m, Index n) {
  const double unit = static_cast<double>(n) * static_cast<double>(m.spec.width);
  return std::vector<double>(static_cast<std::size_t>(m.spec.layers), unit);
}

FinetuneResult finetune(const ToyModel& m, const LayerSet& s, const Batch& train,
                        const FinetuneConfig& cfg) {
  if (s.empty()) throw EmptySelection("toynet: no layers selected for finetuning");
  validate_layer_set(s, m.spec.layers, "finetune");
  if (cfg.rank < 1) throw InvalidArgument("toynet: finetune rank must be >= 1");
  if (cfg.steps < 1) throw InvalidArgument("toynet: finetune needs steps >= 1");
  validate_batch(m, train);

  ToyModel tuned = m;
  tuned.adapters.assign(static_cast<std::size_t>(m.spec.layers), std::nullopt);
  attach_adapters(tuned, s, cfg.rank);

  double step = cfg.step_size;
  if (step <= 0.0) {
    const Capture cap = forward_capture(tuned, train.inputs);
    double sigma_max = 0.0;
    for (const Matrix& phi : cap.activations) {
      sigma_max = std::max(sigma_max, phi.squaredNorm() / static_cast<double>(phi.size()));
    }
    if (sigma_max < 1e-15) throw DegenerateActivation("toynet: zero activation energy");
    step = 0.1 / sigma_max;
  }

  FinetuneResult res;
  res.initial_loss = loss(tuned, train);
  res.final_loss = res.initial_loss;
  const double diverged_at = 1e6 * std::max(res.initial_loss, 1e-30);

  std::vector<Adapter> best;
  for (Index l : s) best.push_back(*tuned.adapters[static_cast<std::size_t>(l - 1)]);

  for (int it = 0; it < cfg.steps; ++it) {
    const std::vector<AdapterGrad> grads = grad_adapters(tuned, train, s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      Adapter& ad = *tuned.adapters[static_cast<std::size_t>(s[k] - 1)];
      ad.a -= step * grads[k].da;
      ad.b -= step * grads[k].db;
    }
    const double now = loss(tuned, train);
    ++res.steps_run;
    if (!std::isfinite(now) || now > diverged_at) {
      throw DivergedTraining("toynet: loss exploded at step " + std::to_string(it + 1));
    }
    if (now < res.final_loss) {
      res.final_loss = now;
      for (std::size_t k = 0; k < s.size(); ++k) {
        best[k] = *tuned.adapters[static_cast<std::size_t>(s[k] - 1)];
      }
    }
  }
  res.gain = res.initial_loss - res.final_loss;

  // Work counters: forward visits every layer, backward only the suffix from
  // the earliest adapted layer, adapter math is per adapted layer.
  const double n = static_cast<double>(train.inputs.rows());
  const double w = static_cast<double>(m.spec.width);
  const double layers = static_cast<double>(m.spec.layers);
  const double depth = layers - static_cast<double>(s.front()) + 1.0;
  const double r = static_cast<double>(cfg.rank);
  res.time_units = static_cast<double>(res.steps_run) *
                   (2.0 * layers * n * w * w + 3.0 * depth * n * w * w +
                    static_cast<double>(s.size()) * (4.0 * w * w * r + 2.0 * w * r));
  res.memory_units = 2.0 * depth * n * w + n * static_cast<double>(m.spec.head_dim);
  return res;
}

Json model_to_json(const ToyModel& m) {
  Json spec;
  spec["layers"] = m.spec.layers;
  spec["width"] = m.spec.width;
  spec["nonlinearity"] = nonlinearity_name(m.spec.nonlinearity);
  spec["head_dim"] = m.spec.head_dim;
  spec["teacher_layers"] = m.spec.teacher_layers;
  spec["teacher_scale"] = m.spec.teacher_scale;
  spec["seed"] = m.spec.seed;

  Json weights;
  weights["w"] = Json::array();
  weights["v"] = Json::array();
  weights["teacher_w"] = Json::array();
  for (const Matrix& mat : m.w) weights["w"].push_back(mat_to_blob(mat));
  for (const Matrix& mat : m.v) weights["v"].push_back(mat_to_blob(mat));
  for (const Matrix& mat : m.teacher_w) weights["teacher_w"].push_back(mat_to_blob(mat));
  weights["head"] = mat_to_blob(m.head);

  Json j;
  j["schema"] = kModelSchema;
  j["spec"] = spec;
  j["weights"] = weights;
  return j;
}

ToyModel model_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kModelSchema) {
      throw SchemaMismatch("toynet: expected schema " + std::string(kModelSchema) +
                           ", got " + j.at("schema").get<std::string>());
    }
    const Json& spec = j.at("spec");
    ToyModel m;
    m.spec.layers = spec.at("layers").get<Index>();
    m.spec.width = spec.at("width").get<Index>();
    m.spec.nonlinearity = nonlinearity_from_name(spec.at("nonlinearity").get<std::string>());
    m.spec.head_dim = spec.at("head_dim").get<Index>();
    m.spec.teacher_layers = spec.at("teacher_layers").get<LayerSet>();
    m.spec.teacher_scale = spec.at("teacher_scale").get<double>();
    m.spec.seed = spec.at("seed").get<std::uint64_t>();
    validate_spec(m.spec);

    const Json& weights = j.at("weights");
    const Json& ws = weights.at("w");
    const Json& vs = weights.at("v");
    const Json& ts = weights.at("teacher_w");
    if (static_cast<Index>(ws.size()) != m.spec.layers ||
        static_cast<Index>(vs.size()) != m.spec.layers ||
        static_cast<Index>(ts.size()) != m.spec.layers) {
      throw IoError("toynet: weight array length != layer count");
    }
    for (Index l = 0; l < m.spec.layers; ++l) {
      m.w.push_back(mat_from_blob(ws[static_cast<std::size_t>(l)], m.spec.width,
                                  m.spec.width, "w"));
      m.v.push_back(mat_from_blob(vs[static_cast<std::size_t>(l)], m.spec.width,
                                  m.spec.width, "v"));
      m.teacher_w.push_back(mat_from_blob(ts[static_cast<std::size_t>(l)], m.spec.width,
                                          m.spec.width, "teacher_w"));
    }
    m.head = mat_from_blob(weights.at("head"), m.spec.head_dim, m.spec.width, "head");
    m.adapters.assign(static_cast<std::size_t>(m.spec.layers), std::nullopt);
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("toynet: malformed model json: ") + e.what());
  }
}

std::string model_id(const ToyModel& m) { return canonical_id(model_to_json(m)); }

Csv batch_to_csv(const Batch& b) {
  Csv csv;
  for (Index j = 0; j < b.inputs.cols(); ++j) {
    csv.header.push_back("x" + std::to_string(j + 1));
  }
  for (Index j = 0; j < b.targets.cols(); ++j) {
    csv.header.push_back("t" + std::to_string(j + 1));
  }
  for (Index i = 0; i < b.inputs.rows(); ++i) {
    std::vector<std::string> row;
    for (Index j = 0; j < b.inputs.cols(); ++j) row.push_back(format_double(b.inputs(i, j)));
    for (Index j = 0; j < b.targets.cols(); ++j) row.push_back(format_double(b.targets(i, j)));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

Batch batch_from_csv(const Csv& csv, Index width, Index head_dim) {
  if (static_cast<Index>(csv.header.size()) != width + head_dim) {
    throw IoError("toynet: batch csv has wrong column count");
  }
  const Index n = static_cast<Index>(csv.rows.size());
  if (n < 1) throw IoError("toynet: batch csv has no rows");
  Batch b;
  b.inputs.resize(n, width);
  b.targets.resize(n, head_dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < width; ++j) {
      b.inputs(i, j) = csv_cell_double(csv, static_cast<std::size_t>(i),
                                       csv.header[static_cast<std::size_t>(j)]);
    }
    for (Index j = 0; j < head_dim; ++j) {
      b.targets(i, j) = csv_cell_double(csv, static_cast<std::size_t>(i),
                                        csv.header[static_cast<std::size_t>(width + j)]);
    }
  }
  return b;
}

}  // namespace layercard
