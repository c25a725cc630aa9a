#pragma once

// Weights file: a text header naming every tensor and its shape, followed by
// the tensors' values as little-endian IEEE-754 float32, in header order.
//
//   posekit-weights 1
//   tensors <count>
//   <name> <rank> <dim0> ... <dimN-1>
//   ...
//   data
//   <raw bytes>
//
// The single newline after "data" is the last header byte.

#include <posekit/head/refinement.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit::head {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
};

namespace detail {

inline void put_f32(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline double get_f32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4) throw std::runtime_error("weights file: truncated data");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace detail

inline void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out << "posekit-weights 1\n" << "tensors " << tensors.size() << '\n';
  for (const auto& t : tensors) {
    if (t.values.size() != t.element_count()) throw std::invalid_argument("tensor '" + t.name + "' shape mismatch");
    out << t.name << ' ' << t.shape.size();
    for (int d : t.shape) out << ' ' << d;
    out << '\n';
  }
  out << "data\n";
  for (const auto& t : tensors)
    for (double v : t.values) detail::put_f32(out, v);
}

inline std::vector<NamedTensor> read_tensors(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "posekit-weights 1") throw std::runtime_error("weights file: bad magic");
  std::size_t count = 0;
  {
    if (!std::getline(in, line)) throw std::runtime_error("weights file: missing tensor count");
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> count) || key != "tensors") throw std::runtime_error("weights file: bad tensor count line");
  }
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    if (!std::getline(in, line)) throw std::runtime_error("weights file: truncated header");
    std::istringstream ls(line);
    std::size_t rank = 0;
    if (!(ls >> t.name >> rank)) throw std::runtime_error("weights file: bad tensor line '" + line + "'");
    t.shape.resize(rank);
    for (auto& d : t.shape) {
      if (!(ls >> d) || d < 0) throw std::runtime_error("weights file: bad shape for '" + t.name + "'");
    }
  }
  if (!std::getline(in, line) || line != "data") throw std::runtime_error("weights file: missing data marker");
  for (auto& t : tensors) {
    t.values.resize(t.element_count());
    for (auto& v : t.values) v = detail::get_f32(in);
  }
  return tensors;
}

inline std::vector<NamedTensor> to_tensors(const RefinementWeights& w) {
  std::vector<NamedTensor> out;
  auto add_conv = [&](const std::string& prefix, const SeparableConvWeights& c) {
    out.push_back({prefix + ".depthwise", {c.in_channels, 3, 3}, c.depthwise});
    out.push_back({prefix + ".depthwise_bias", {c.in_channels}, c.depthwise_bias});
    out.push_back({prefix + ".pointwise", {c.out_channels, c.in_channels}, c.pointwise});
    out.push_back({prefix + ".pointwise_bias", {c.out_channels}, c.pointwise_bias});
  };
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    const std::string prefix = "refine.block" + std::to_string(b);
    add_conv(prefix, w.blocks[b].conv);
    const int ch = w.blocks[b].conv.out_channels;
    out.push_back({prefix + ".gn_gamma", {ch}, w.blocks[b].gamma});
    out.push_back({prefix + ".gn_beta", {ch}, w.blocks[b].beta});
  }
  add_conv("refine.output", w.output);
  return out;
}

inline RefinementWeights from_tensors(const std::vector<NamedTensor>& tensors) {
  auto find = [&](const std::string& name) -> const NamedTensor& {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw std::runtime_error("weights file: missing tensor '" + name + "'");
  };
  auto read_conv = [&](const std::string& prefix) {
    const auto& dw = find(prefix + ".depthwise");
    const auto& pw = find(prefix + ".pointwise");
    if (dw.shape.size() != 3 || pw.shape.size() != 2) throw std::runtime_error("weights file: bad conv rank");
    SeparableConvWeights c(dw.shape[0], pw.shape[0]);
    c.depthwise = dw.values;
    c.depthwise_bias = find(prefix + ".depthwise_bias").values;
    c.pointwise = pw.values;
    c.pointwise_bias = find(prefix + ".pointwise_bias").values;
    check_shapes(c);
    return c;
  };
  RefinementWeights w;
  for (std::size_t b = 0;; ++b) {
    const std::string prefix = "refine.block" + std::to_string(b);
    const bool present = std::any_of(tensors.begin(), tensors.end(),
                                     [&](const NamedTensor& t) { return t.name == prefix + ".depthwise"; });
    if (!present) break;
    ConvBlockWeights block;
    block.conv = read_conv(prefix);
    block.gamma = find(prefix + ".gn_gamma").values;
    block.beta = find(prefix + ".gn_beta").values;
    w.blocks.push_back(std::move(block));
  }
  w.output = read_conv("refine.output");
  return w;
}

inline void save_weights(const std::string& path, const RefinementWeights& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weights '" + path + "'");
  write_tensors(out, to_tensors(w));
}

inline RefinementWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weights '" + path + "'");
  return from_tensors(read_tensors(in));
}

}  // namespace posekit::head
