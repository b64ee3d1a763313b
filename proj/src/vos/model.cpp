#include <cmath>

#include "ara/ops.hpp"
#include "ara/vos_model.hpp"

namespace ara::vos {

namespace {

ConvLayer kaiming_conv(Rng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                       std::size_t padding, double gain = std::sqrt(2.0)) {
  const double std_dev = gain / std::sqrt(double(in * k * k));
  std::vector<float> w(out * in * k * k);
  for (auto& v : w) v = static_cast<float>(rng.normal() * std_dev);
  ConvLayer layer;
  layer.weight = Tensor::from_data({out, in, k, k}, std::move(w));
  layer.bias = Tensor::zeros({out});
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

Tensor run_stack(const std::vector<ConvLayer>& layers, Tensor x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(x);
    if (i + 1 < layers.size()) x = ops::relu(x);
  }
  return x;
}

// [H,W,3] in [0,1] -> centred [1,3,H,W].
Tensor frame_to_nchw(const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3) {
    throw ShapeError("frame must be [H,W,3], got " + shape_str(frame.shape()));
  }
  Tensor chw = ops::permute(frame, {2, 0, 1});
  return ops::add_scalar(ops::reshape(chw, {1, 3, frame.dim(0), frame.dim(1)}), -0.5f);
}

void check_resolution(const VosParams& p, std::size_t H, std::size_t W) {
  const std::size_t s = p.arch.downsample;
  if (H % s != 0 || W % s != 0) {
    throw ShapeError("frame size " + std::to_string(H) + "x" + std::to_string(W) +
                     " is not a multiple of the model stride " + std::to_string(s));
  }
}

}  // namespace

Tensor ConvLayer::forward(const Tensor& x) const {
  return ops::conv2d(x, weight, bias, stride, padding);
}

VosParams VosParams::init(const VosArch& arch, Rng& rng) {
  if (arch.downsample != 4) throw std::invalid_argument("VosArch: only downsample = 4 is supported");
  const std::size_t d = arch.feature_dim, h = arch.decoder_hidden, dv = arch.value_dim;
  VosParams p;
  p.arch = arch;
  p.memory_encoder = {kaiming_conv(rng, 4, d, 4, 2, 1), kaiming_conv(rng, d, d, 4, 2, 1),
                      kaiming_conv(rng, d, dv, 3, 1, 1, 1.0)};
  p.query_encoder = {kaiming_conv(rng, 3, d, 4, 2, 1), kaiming_conv(rng, d, d, 4, 2, 1),
                     kaiming_conv(rng, d, d, 3, 1, 1, 1.0)};
  p.decoder = {kaiming_conv(rng, 1 + dv + d, h, 3, 1, 1), kaiming_conv(rng, h, 1, 3, 1, 1, 1.0)};
  for (auto& t : p.tensors()) t.set_requires_grad(true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> VosParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add = [&](const std::string& prefix, const std::vector<ConvLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers[i].weight);
      out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers[i].bias);
    }
  };
  add("memory_encoder", memory_encoder);
  add("query_encoder", query_encoder);
  add("decoder", decoder);
  return out;
}

std::vector<Tensor> VosParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

VosParams VosParams::copy(bool trainable) const {
  VosParams p = *this;
  for (auto* stack : {&p.memory_encoder, &p.query_encoder, &p.decoder}) {
    for (auto& layer : *stack) {
      layer.weight = layer.weight.detach();
      layer.bias = layer.bias.detach();
      layer.weight.set_requires_grad(trainable);
      layer.bias.set_requires_grad(trainable);
    }
  }
  return p;
}

std::size_t VosParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& t : tensors()) n += t.numel();
  return n;
}

EncodedMemory encode_memory(const VosParams& params, const Tensor& frame, const Tensor& mask) {
  const std::size_t H = frame.dim(0), W = frame.dim(1);
  check_resolution(params, H, W);
  if (mask.shape() != Shape{H, W}) {
    throw ShapeError("encode_memory: mask " + shape_str(mask.shape()) + " does not match frame " +
                     shape_str(frame.shape()));
  }
  Tensor m4 = ops::reshape(mask, {1, 1, H, W});
  Tensor rgb = frame_to_nchw(frame);
  // Keys come from the query encoder, so a memory frame and a query frame
  // are compared in the same space; the memory encoder sees the mask and
  // contributes value features.
  Tensor keys = run_stack(params.query_encoder, rgb);
  Tensor vfeat = run_stack(params.memory_encoder, ops::concat({rgb, ops::add_scalar(m4, -0.5f)}, 1));
  const std::size_t P = keys.dim(2) * keys.dim(3);
  EncodedMemory e;
  e.keys = ops::reshape(keys, {params.arch.feature_dim, P});
  Tensor pooled = ops::reshape(ops::avg_pool2d(m4, params.arch.downsample), {1, P});
  e.values = ops::concat({pooled, ops::reshape(vfeat, {params.arch.value_dim, P})}, 0);
  return e;
}

Tensor segment(const VosParams& params, std::span<const EncodedMemory> memory, const Tensor& frame) {
  if (memory.empty()) throw std::invalid_argument("segment: memory is empty");
  const std::size_t H = frame.dim(0), W = frame.dim(1);
  check_resolution(params, H, W);
  const std::size_t d = params.arch.feature_dim;
  const std::size_t h = H / params.arch.downsample, w = W / params.arch.downsample;
  const std::size_t P = h * w;
  for (const auto& m : memory) {
    if (m.keys.shape() != Shape{d, P}) {
      throw ShapeError("segment: memory resolution " + shape_str(m.keys.shape()) +
                       " does not match query frame " + shape_str(frame.shape()));
    }
  }

  Tensor q = run_stack(params.query_encoder, frame_to_nchw(frame));  // [1,d,h,w]
  Tensor qf = ops::reshape(q, {d, P});

  std::vector<Tensor> keys, values;
  for (const auto& m : memory) {
    keys.push_back(m.keys);
    values.push_back(m.values);
  }
  Tensor K = keys.size() == 1 ? keys[0] : ops::concat(keys, 1);        // [d, MP]
  Tensor V = values.size() == 1 ? values[0] : ops::concat(values, 1);  // [1+dv, MP]

  // Each query pixel attends over every memory pixel.
  Tensor affinity = ops::mul_scalar(ops::matmul(ops::transpose(K), qf), 1.0f / std::sqrt(float(d)));
  Tensor attn = ops::softmax(affinity, 0);                              // [MP, P]
  Tensor readout = ops::reshape(ops::matmul(V, attn), {1, 1 + params.arch.value_dim, h, w});

  Tensor logits = run_stack(params.decoder, ops::concat({readout, q}, 1));  // [1,1,h,w]
  Tensor up = ops::bilinear_upsample(logits, H, W);
  return ops::reshape(ops::sigmoid(up), {H, W});
}

Tensor segment(const VosParams& params, const MemorySet& memory, const Tensor& frame) {
  std::vector<EncodedMemory> enc;
  enc.reserve(memory.size());
  for (const auto& e : memory) {
    if (e.frame.shape() != frame.shape()) {
      throw ShapeError("segment: memory frame " + shape_str(e.frame.shape()) +
                       " does not match query frame " + shape_str(frame.shape()));
    }
    enc.push_back(encode_memory(params, e.frame, e.mask));
  }
  return segment(params, std::span<const EncodedMemory>(enc), frame);
}

Tensor assign_objects(const Tensor& probs) {
  const std::size_t O = probs.dim(0), H = probs.dim(1), W = probs.dim(2);
  const std::size_t plane = H * W;
  auto p = probs.data();
  std::vector<float> out(O * plane, 0.0f);
  for (std::size_t i = 0; i < plane; ++i) {
    std::size_t best = 0;
    for (std::size_t o = 1; o < O; ++o) {
      if (p[o * plane + i] > p[best * plane + i]) best = o;
    }
    if (p[best * plane + i] >= 0.5f) out[best * plane + i] = 1.0f;
  }
  return Tensor::from_data({O, H, W}, std::move(out));
}

VideoPrediction infer_video(const VosParams& params_in, const synthvid::VideoSequence& video,
                            const FrameOverrides& overrides) {
  const std::size_t T = video.length();
  if (T < 2) throw std::invalid_argument("infer_video: video needs at least 2 frames");
  for (const auto& [t, f] : overrides) {
    if (t >= T) throw std::invalid_argument("infer_video: override index out of range");
    if (f.shape() != video.frames[t].shape()) {
      throw ShapeError("infer_video: override for frame " + std::to_string(t) + " has shape " +
                       shape_str(f.shape()) + ", expected " + shape_str(video.frames[t].shape()));
    }
  }
  auto frame_at = [&](std::size_t t) -> Tensor {
    auto it = overrides.find(t);
    return it == overrides.end() ? video.frames[t] : it->second.detach();
  };

  // Inference never needs the graph.
  const VosParams params = params_in.copy(false);
  const std::size_t O = video.object_count;
  const std::size_t H = video.height(), W = video.width();
  const std::size_t plane = H * W;

  std::vector<std::vector<EncodedMemory>> memory(O);
  const Tensor first = frame_at(0);
  for (std::size_t o = 0; o < O; ++o) {
    memory[o].push_back(encode_memory(params, first, video.object_mask(0, o)));
  }

  VideoPrediction pred;
  pred.probs.resize(T);
  pred.masks.resize(T);
  for (std::size_t t = 1; t < T; ++t) {
    const Tensor frame = frame_at(t);
    std::vector<float> probs(O * plane);
    for (std::size_t o = 0; o < O; ++o) {
      Tensor p = segment(params, std::span<const EncodedMemory>(memory[o]), frame);
      std::copy(p.data().begin(), p.data().end(), probs.begin() + o * plane);
    }
    pred.probs[t] = Tensor::from_data({O, H, W}, std::move(probs));
    pred.masks[t] = assign_objects(pred.probs[t]);
    if (t + 1 < T) {
      for (std::size_t o = 0; o < O; ++o) {
        auto pd = pred.probs[t].data();
        Tensor m = Tensor::from_data(
            {H, W}, std::vector<float>(pd.begin() + o * plane, pd.begin() + (o + 1) * plane));
        memory[o].push_back(encode_memory(params, frame, m));
        // First frame plus the most recent `memory_cap` predictions.
        if (memory[o].size() > 1 + params.arch.memory_cap) memory[o].erase(memory[o].begin() + 1);
      }
    }
  }
  return pred;
}

VideoPrediction infer_video(const VosParams& params, const synthvid::VideoSequence& video,
                            const std::optional<Tensor>& first_frame_override) {
  FrameOverrides ov;
  if (first_frame_override) ov.emplace(0, *first_frame_override);
  return infer_video(params, video, ov);
}

}  // namespace ara::vos
