// Copyright 2026 The spectral-asrd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spectral_asrd/network.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace spectral_asrd {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string weight_name(std::size_t layer) { return "layers." + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "layers." + std::to_string(layer) + ".bias"; }

struct ConvGeometry {
  std::size_t c, h, w, oc, k, s, p, oh, ow;
};

ConvGeometry conv_geometry(const Conv2d& conv, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], conv.out_channels, conv.kernel, conv.stride, conv.pad, out[1], out[2]};
}

// cols is (C*k*k, oh*ow), row-major.
void im2col(const float* x, const ConvGeometry& g, float* cols) {
  const std::size_t plane = g.oh * g.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    const float* xc = x + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj, ++row) {
        float* dst = cols + row * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.s + ki) - static_cast<long>(g.p);
          float* d = dst + oy * g.ow;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(d, d + g.ow, 0.0f);
            continue;
          }
          const float* xr = xc + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.s + kj) - static_cast<long>(g.p);
            d[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0f : xr[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* dx) {
  const std::size_t plane = g.oh * g.ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    float* dxc = dx + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj, ++row) {
        const float* src = cols + row * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.s + ki) - static_cast<long>(g.p);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          float* dr = dxc + static_cast<std::size_t>(iy) * g.w;
          const float* s = src + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.s + kj) - static_cast<long>(g.p);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dr[ix] += s[ox];
          }
        }
      }
    }
  }
}

Shape with_batch(std::size_t batch, const Shape& per_sample) {
  Shape s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void check_finite(const Tensor& t, std::size_t layer, const Layer& l) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value produced by layer " + std::to_string(layer) + " (" + layer_name(l) + ")");
    }
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

std::string layer_name(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const Conv2d& c) {
                          return "conv2d{out=" + std::to_string(c.out_channels) + ",k=" + std::to_string(c.kernel) +
                                 ",s=" + std::to_string(c.stride) + ",pad=" + std::to_string(c.pad) + "}";
                        },
                        [](const Relu&) { return std::string("relu"); },
                        [](const MaxPool& m) { return "maxpool{k=" + std::to_string(m.k) + "}"; },
                        [](const Flatten&) { return std::string("flatten"); },
                        [](const Dense& d) { return "dense{out=" + std::to_string(d.out) + "}"; },
                    },
                    layer);
}

std::vector<Shape> NetworkSpec::layer_shapes() const {
  if (input_shape.size() != 3 || shape_size(input_shape) == 0) {
    throw BuildError(0, "input shape must be (C,H,W) with positive dims, got " + shape_string(input_shape));
  }
  if (layers.empty()) throw BuildError(0, "network has no layers");
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    auto need_rank = [&](std::size_t r) {
      if (cur.size() != r) {
        throw BuildError(i, layer_name(layer) + " expects rank-" + std::to_string(r) + " input, got " +
                                shape_string(cur));
      }
    };
    std::visit(Overloaded{
                   [&](const Conv2d& c) {
                     need_rank(3);
                     if (c.kernel == 0 || c.stride == 0 || c.out_channels == 0) {
                       throw BuildError(i, "conv2d kernel, stride and out_channels must be positive");
                     }
                     if (cur[1] + 2 * c.pad < c.kernel || cur[2] + 2 * c.pad < c.kernel) {
                       throw BuildError(i, "conv2d kernel larger than padded input " + shape_string(cur));
                     }
                     cur = {c.out_channels, (cur[1] + 2 * c.pad - c.kernel) / c.stride + 1,
                            (cur[2] + 2 * c.pad - c.kernel) / c.stride + 1};
                   },
                   [&](const Relu&) {},
                   [&](const MaxPool& m) {
                     need_rank(3);
                     if (m.k == 0 || cur[1] < m.k || cur[2] < m.k) {
                       throw BuildError(i, "maxpool window does not fit " + shape_string(cur));
                     }
                     cur = {cur[0], cur[1] / m.k, cur[2] / m.k};
                   },
                   [&](const Flatten&) { cur = {shape_size(cur)}; },
                   [&](const Dense& d) {
                     need_rank(1);
                     if (d.out == 0) throw BuildError(i, "dense out must be positive");
                     cur = {d.out};
                   },
               },
               layer);
    shapes.push_back(cur);
  }
  if (num_classes < 2) throw BuildError(layers.size() - 1, "class count must be at least 2");
  if (cur.size() != 1 || cur[0] != num_classes) {
    throw BuildError(layers.size() - 1, "network output " + shape_string(cur) + " does not match " +
                                            std::to_string(num_classes) + " classes");
  }
  return shapes;
}

NetworkSpec desk_cnn_spec(std::size_t channels, std::size_t resolution, std::size_t num_classes) {
  NetworkSpec spec;
  spec.input_shape = {channels, resolution, resolution};
  spec.num_classes = num_classes;
  spec.layers = {Conv2d{16, 3, 1, 1}, Relu{},    Conv2d{32, 3, 2, 1}, Relu{},
                 Conv2d{64, 3, 2, 1}, Relu{},    Flatten{},           Dense{num_classes}};
  if (resolution > 32 && resolution % 32 == 0) spec.layers.insert(spec.layers.end() - 2, MaxPool{resolution / 32});
  return spec;
}

TrainedModel::TrainedModel(NetworkSpec spec, std::vector<NamedTensor> parameters)
    : spec_(std::move(spec)), params_(std::move(parameters)) {
  const auto shapes = spec_.layer_shapes();
  weight_index_.assign(spec_.layers.size(), std::nullopt);
  std::size_t expected = 0;
  Shape in = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const Layer& layer = spec_.layers[i];
    std::optional<std::pair<Shape, Shape>> wb;
    if (auto* c = std::get_if<Conv2d>(&layer)) {
      wb = std::make_pair(Shape{c->out_channels, in[0], c->kernel, c->kernel}, Shape{c->out_channels});
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      wb = std::make_pair(Shape{d->out, in[0]}, Shape{d->out});
    } else if (std::holds_alternative<Relu>(layer)) {
      tap_ids_.push_back(i);
    }
    if (wb) {
      if (params_.size() < expected + 2) throw FormatError("missing parameters for layer " + std::to_string(i));
      const NamedTensor& w = params_[expected];
      const NamedTensor& b = params_[expected + 1];
      if (w.name != weight_name(i) || b.name != bias_name(i) || w.value.shape() != wb->first ||
          b.value.shape() != wb->second) {
        throw FormatError("parameter mismatch at layer " + std::to_string(i) + ": expected " + weight_name(i) +
                          shape_string(wb->first) + ", got " + w.name + shape_string(w.value.shape()));
      }
      weight_index_[i] = expected;
      expected += 2;
    }
    in = shapes[i];
  }
  if (params_.size() != expected) {
    throw FormatError("expected " + std::to_string(expected) + " parameter tensors, got " +
                      std::to_string(params_.size()));
  }
}

const Tensor& TrainedModel::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no parameter named " + name);
}

std::size_t TrainedModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

TrainedModel build_model(const NetworkSpec& spec, std::uint64_t seed) {
  const auto shapes = spec.layer_shapes();
  std::mt19937_64 rng(seed);
  std::vector<NamedTensor> params;
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    Shape wshape;
    std::size_t fan_in = 0;
    if (auto* c = std::get_if<Conv2d>(&spec.layers[i])) {
      wshape = {c->out_channels, in[0], c->kernel, c->kernel};
      fan_in = in[0] * c->kernel * c->kernel;
    } else if (auto* d = std::get_if<Dense>(&spec.layers[i])) {
      wshape = {d->out, in[0]};
      fan_in = in[0];
    }
    if (fan_in > 0) {
      std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
      Tensor w(wshape);
      for (float& v : w.data()) v = normal(rng);
      params.push_back({weight_name(i), std::move(w)});
      params.push_back({bias_name(i), Tensor(Shape{wshape[0]})});
    }
    in = shapes[i];
  }
  return TrainedModel(spec, std::move(params));
}

ForwardTrace forward_traced(const TrainedModel& model, const Tensor& batch) {
  const NetworkSpec& spec = model.spec();
  if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != spec.input_shape) {
    throw ContractError("batch shape " + shape_string(batch.shape()) + " does not match model input " +
                        shape_string(spec.input_shape));
  }
  const auto shapes = spec.layer_shapes();
  const std::size_t n = batch.dim(0);
  ForwardTrace trace;
  trace.inputs.reserve(spec.layers.size());
  trace.pool_argmax.resize(spec.layers.size());
  Tensor x = batch;
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    const Shape& out_shape = shapes[i];
    Tensor y(with_batch(n, out_shape));
    std::visit(Overloaded{
                   [&](const Conv2d& c) {
                     const auto g = conv_geometry(c, in, out_shape);
                     const auto& params = model.parameters();
                     const std::size_t wi = *model.weight_index(i);
                     ConstMatMap w(params[wi].value.data().data(), g.oc, g.c * g.k * g.k);
                     const auto bias = params[wi + 1].value.vec();
                     const std::size_t plane = g.oh * g.ow;
                     RowMatrix cols(g.c * g.k * g.k, plane);
                     for (std::size_t b = 0; b < n; ++b) {
                       im2col(x.slice(b).data(), g, cols.data());
                       MatMap yb(y.slice(b).data(), g.oc, plane);
                       yb.noalias() = w * cols;
                       yb.colwise() += bias;
                     }
                   },
                   [&](const Relu&) {
                     y.vec() = x.vec().cwiseMax(0.0f);
                   },
                   [&](const MaxPool& m) {
                     const std::size_t c = in[0], h = in[1], w = in[2], oh = out_shape[1], ow = out_shape[2];
                     auto& arg = trace.pool_argmax[i];
                     arg.resize(y.size());
                     for (std::size_t b = 0; b < n; ++b) {
                       const float* xs = x.slice(b).data();
                       float* ys = y.slice(b).data();
                       std::uint32_t* as = arg.data() + b * c * oh * ow;
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t oy = 0; oy < oh; ++oy) {
                           for (std::size_t ox = 0; ox < ow; ++ox) {
                             std::size_t best = ch * h * w + oy * m.k * w + ox * m.k;
                             for (std::size_t ky = 0; ky < m.k; ++ky) {
                               for (std::size_t kx = 0; kx < m.k; ++kx) {
                                 const std::size_t idx = ch * h * w + (oy * m.k + ky) * w + ox * m.k + kx;
                                 if (xs[idx] > xs[best]) best = idx;
                               }
                             }
                             const std::size_t o = (ch * oh + oy) * ow + ox;
                             ys[o] = xs[best];
                             as[o] = static_cast<std::uint32_t>(best);
                           }
                         }
                       }
                     }
                   },
                   [&](const Flatten&) { y = Tensor(with_batch(n, out_shape), x.storage()); },
                   [&](const Dense& d) {
                     const auto& params = model.parameters();
                     const std::size_t wi = *model.weight_index(i);
                     ConstMatMap w(params[wi].value.data().data(), d.out, in[0]);
                     const auto bias = params[wi + 1].value.vec();
                     ConstMatMap xm(x.data().data(), n, in[0]);
                     MatMap ym(y.data().data(), n, d.out);
                     // Row by row so a sample's logits do not depend on the rest of the batch.
                     for (std::size_t b = 0; b < n; ++b) {
                       ym.row(b).noalias() = (w * xm.row(b).transpose()).transpose();
                       ym.row(b) += bias.transpose();
                     }
                   },
               },
               layer);
    check_finite(y, i, layer);
    trace.inputs.push_back(std::move(x));
    x = std::move(y);
    in = out_shape;
  }
  trace.output = std::move(x);
  return trace;
}

Tensor forward(const TrainedModel& model, const Tensor& batch) { return forward_traced(model, batch).output; }

Gradients backward(const TrainedModel& model, const ForwardTrace& trace, const Tensor& logit_cotangent,
                   bool parameter_gradients) {
  const NetworkSpec& spec = model.spec();
  if (logit_cotangent.shape() != trace.output.shape()) {
    throw ContractError("cotangent shape " + shape_string(logit_cotangent.shape()) + " does not match logits " +
                        shape_string(trace.output.shape()));
  }
  const auto shapes = spec.layer_shapes();
  const auto& params = model.parameters();
  Gradients grads;
  if (parameter_gradients) {
    grads.parameters.reserve(params.size());
    for (const auto& p : params) grads.parameters.emplace_back(p.value.shape());
  }
  const std::size_t n = logit_cotangent.dim(0);
  Tensor dy = logit_cotangent;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const Layer& layer = spec.layers[li];
    const Tensor& x = trace.inputs[li];
    const Shape in(x.shape().begin() + 1, x.shape().end());
    const Shape& out_shape = shapes[li];
    Tensor dx(x.shape());
    std::visit(Overloaded{
                   [&](const Conv2d& c) {
                     const auto g = conv_geometry(c, in, out_shape);
                     const std::size_t wi = *model.weight_index(li);
                     const std::size_t kk = g.c * g.k * g.k;
                     ConstMatMap w(params[wi].value.data().data(), g.oc, kk);
                     const std::size_t plane = g.oh * g.ow;
                     RowMatrix cols(kk, plane);
                     RowMatrix dcols(kk, plane);
                     for (std::size_t b = 0; b < n; ++b) {
                       ConstMatMap dyb(dy.slice(b).data(), g.oc, plane);
                       if (parameter_gradients) {
                         im2col(x.slice(b).data(), g, cols.data());
                         MatMap dw(grads.parameters[wi].data().data(), g.oc, kk);
                         dw.noalias() += dyb * cols.transpose();
                         grads.parameters[wi + 1].vec() += dyb.rowwise().sum();
                       }
                       dcols.noalias() = w.transpose() * dyb;
                       col2im_add(dcols.data(), g, dx.slice(b).data());
                     }
                   },
                   [&](const Relu&) {
                     dx.vec() = (x.vec().array() > 0.0f).select(dy.vec(), 0.0f);
                   },
                   [&](const MaxPool&) {
                     const auto& arg = trace.pool_argmax[li];
                     const std::size_t per = shape_size(out_shape);
                     for (std::size_t b = 0; b < n; ++b) {
                       float* dxs = dx.slice(b).data();
                       const float* dys = dy.slice(b).data();
                       for (std::size_t o = 0; o < per; ++o) dxs[arg[b * per + o]] += dys[o];
                     }
                   },
                   [&](const Flatten&) { dx = Tensor(x.shape(), dy.storage()); },
                   [&](const Dense& d) {
                     const std::size_t wi = *model.weight_index(li);
                     ConstMatMap w(params[wi].value.data().data(), d.out, in[0]);
                     ConstMatMap dym(dy.data().data(), n, d.out);
                     ConstMatMap xm(x.data().data(), n, in[0]);
                     if (parameter_gradients) {
                       MatMap dw(grads.parameters[wi].data().data(), d.out, in[0]);
                       dw.noalias() += dym.transpose() * xm;
                       grads.parameters[wi + 1].vec() += dym.colwise().sum().transpose();
                     }
                     MatMap dxm(dx.data().data(), n, in[0]);
                     for (std::size_t b = 0; b < n; ++b) dxm.row(b).noalias() = (w.transpose() * dym.row(b).transpose()).transpose();
                   },
               },
               layer);
    dy = std::move(dx);
  }
  grads.input = std::move(dy);
  return grads;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.stride0();
  std::vector<int> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    auto row = logits.slice(b);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<Tensor> feature_maps(const TrainedModel& model, const Tensor& image, std::span<const std::size_t> tap_ids) {
  const auto& known = model.tap_ids();
  for (std::size_t t : tap_ids) {
    if (std::find(known.begin(), known.end(), t) == known.end()) {
      throw std::out_of_range("unknown tap id " + std::to_string(t));
    }
  }
  if (tap_ids.empty()) return {};
  const bool single = image.rank() == 3;
  Tensor batch = image;
  if (single) batch.reshape(with_batch(1, image.shape()));
  const ForwardTrace trace = forward_traced(model, batch);
  std::vector<Tensor> maps;
  maps.reserve(tap_ids.size());
  for (std::size_t t : tap_ids) {
    Tensor m = t + 1 < trace.inputs.size() ? trace.inputs[t + 1] : trace.output;
    if (single) m.reshape(Shape(m.shape().begin() + 1, m.shape().end()));
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace spectral_asrd
