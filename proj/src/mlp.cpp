#include "gdaflow/mlp.hpp"

#include <cmath>

namespace gdaflow {

MlpSpec MlpSpec::make(int input_dim, const std::vector<int>& widths, Activation act,
                      int output_dim, double weight_decay) {
  MlpSpec s;
  s.input_dim = input_dim;
  for (int w : widths) s.hidden.emplace_back(w, act);
  s.output_dim = output_dim;
  s.weight_decay = weight_decay;
  s.validate();
  return s;
}

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0)
    throw std::invalid_argument("MlpSpec: input_dim and output_dim must be positive");
  for (const auto& [w, a] : hidden) {
    (void)a;
    if (w <= 0) throw std::invalid_argument("MlpSpec: hidden width must be positive");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("MlpSpec: weight_decay must be >= 0");
}

bool ParamVector::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void ParamVector::validate() const {
  size_t total = 0;
  for (const auto& s : layout) {
    if (s.offset != total)
      throw std::invalid_argument("ParamVector: slice " + s.name + " not contiguous");
    total += s.len();
  }
  if (total != values.size())
    throw std::invalid_argument("ParamVector: layout covers " + std::to_string(total) +
                                " values but storage has " + std::to_string(values.size()));
  if (!all_finite()) throw std::invalid_argument("ParamVector: non-finite value");
}

const ParamVector::Slice& ParamVector::slice(const std::string& name) const {
  for (const auto& s : layout)
    if (s.name == name) return s;
  throw std::invalid_argument("ParamVector: no slice named " + name);
}

Mat ParamVector::extract(const Slice& s) const {
  Mat m(s.rows, s.cols);
  std::copy(values.begin() + s.offset, values.begin() + s.offset + s.len(), m.a.begin());
  return m;
}

void ParamVector::insert(const Slice& s, const Mat& m) {
  if (m.rows != s.rows || m.cols != s.cols)
    throw std::invalid_argument("ParamVector::insert: " + s.name + " expects " +
                                std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                                ", got " + m.shape_str());
  std::copy(m.a.begin(), m.a.end(), values.begin() + s.offset);
}

ParamVector ParamVector::zeros_like() const {
  ParamVector z;
  z.values.assign(values.size(), 0.0);
  z.layout = layout;
  return z;
}

namespace {

struct LayerDims {
  int in, out;
};

std::vector<LayerDims> layer_dims(const MlpSpec& spec) {
  std::vector<LayerDims> dims;
  int in = spec.input_dim;
  for (const auto& [w, a] : spec.hidden) {
    (void)a;
    dims.push_back({in, w});
    in = w;
  }
  dims.push_back({in, spec.output_dim});
  return dims;
}

}  // namespace

void append_mlp_params(const MlpSpec& spec, const std::string& prefix, RngStream& rng,
                       bool zero_last_layer, ParamVector& out) {
  spec.validate();
  const auto dims = layer_dims(spec);
  for (size_t l = 0; l < dims.size(); ++l) {
    const bool zero = zero_last_layer && l + 1 == dims.size();
    const double bound = std::sqrt(6.0 / (dims[l].in + dims[l].out));
    ParamVector::Slice w;
    w.name = prefix + "layer" + std::to_string(l) + ".W";
    w.offset = out.values.size();
    w.rows = dims[l].out;
    w.cols = dims[l].in;
    out.layout.push_back(w);
    for (size_t k = 0; k < w.len(); ++k)
      out.values.push_back(zero ? 0.0 : rng.uniform(-bound, bound));

    ParamVector::Slice b;
    b.name = prefix + "layer" + std::to_string(l) + ".b";
    b.offset = out.values.size();
    b.rows = dims[l].out;
    b.cols = 1;
    out.layout.push_back(b);
    for (size_t k = 0; k < b.len(); ++k) out.values.push_back(0.0);
  }
}

ParamVector init_mlp_params(const MlpSpec& spec, RngStream& rng, bool zero_last_layer) {
  ParamVector p;
  append_mlp_params(spec, "", rng, zero_last_layer, p);
  p.validate();
  return p;
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                const std::vector<double>& input, const std::string& prefix) {
  if (static_cast<int>(input.size()) != spec.input_dim)
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.size()) +
                                " entries, spec.input_dim=" + std::to_string(spec.input_dim));
  Mat x(1, spec.input_dim, input);
  Mat y = mlp_forward_batch(spec, params, x, prefix);
  return y.a;
}

Mat mlp_forward_batch(const MlpSpec& spec, const ParamVector& params, const Mat& x,
                      const std::string& prefix) {
  if (x.cols != spec.input_dim)
    throw std::invalid_argument("mlp_forward_batch: X is " + x.shape_str() +
                                " but spec.input_dim=" + std::to_string(spec.input_dim));
  const auto dims = layer_dims(spec);
  Mat cur = x;
  for (size_t l = 0; l < dims.size(); ++l) {
    const std::string ln = prefix + "layer" + std::to_string(l);
    const Mat w = params.extract(ln + ".W");
    const Mat b = params.extract(ln + ".b");
    Mat next(cur.rows, dims[l].out);
    for (int i = 0; i < cur.rows; ++i) {
      const double* xi = cur.row_ptr(i);
      double* oi = next.row_ptr(i);
      for (int o = 0; o < dims[l].out; ++o) {
        const double* wo = w.row_ptr(o);
        double s = b.a[o];
        for (int k = 0; k < dims[l].in; ++k) s += xi[k] * wo[k];
        oi[o] = s;
      }
    }
    if (l + 1 < dims.size()) {
      const Activation a = spec.hidden[l].second;
      for (double& v : next.a) v = ad::act_value(a, v);
    }
    cur = std::move(next);
  }
  return cur;
}

MlpVars register_mlp_params(ad::Tape& tape, const MlpSpec& spec, const ParamVector& params,
                            const std::string& prefix) {
  MlpVars vars;
  const auto dims = layer_dims(spec);
  for (size_t l = 0; l < dims.size(); ++l) {
    const std::string ln = prefix + "layer" + std::to_string(l);
    vars.weights.push_back(tape.input(params.extract(ln + ".W")));
    vars.biases.push_back(tape.input(params.extract(ln + ".b")));
  }
  return vars;
}

ad::VarId mlp_forward_tape(ad::Tape& tape, const MlpSpec& spec, const MlpVars& vars,
                           ad::VarId x) {
  ad::VarId cur = x;
  const size_t layers = vars.weights.size();
  for (size_t l = 0; l < layers; ++l) {
    cur = tape.affine(cur, vars.weights[l], vars.biases[l]);
    if (l + 1 < layers) cur = tape.act(cur, spec.hidden[l].second);
  }
  return cur;
}

void collect_mlp_grads_into(const ad::Tape& tape, const MlpVars& vars, const std::string& prefix,
                            ParamVector& grad) {
  const size_t layers = vars.weights.size();
  for (size_t l = 0; l < layers; ++l) {
    const std::string ln = prefix + "layer" + std::to_string(l);
    if (tape.has_grad(vars.weights[l])) grad.insert(grad.slice(ln + ".W"), tape.grad(vars.weights[l]));
    if (tape.has_grad(vars.biases[l])) grad.insert(grad.slice(ln + ".b"), tape.grad(vars.biases[l]));
  }
}

ParamVector collect_mlp_grads(const ad::Tape& tape, const MlpVars& vars,
                              const ParamVector& params, const std::string& prefix) {
  ParamVector g = params.zeros_like();
  collect_mlp_grads_into(tape, vars, prefix, g);
  return g;
}

}  // namespace gdaflow
