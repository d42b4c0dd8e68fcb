#ifndef METAGCD_CHECKPOINT_HPP
#define METAGCD_CHECKPOINT_HPP

// Checkpoint text format (one item per line):
//
//   METAGCD-CHECKPOINT 1
//   encoder_widths <w0> <w1> ...
//   projection_widths <w0> <w1> ...
//   attention <0|1>
//   tensor <name> <rows> <cols>
//   <rows*cols values, shortest round-trip decimal, space separated>
//   ...
//
// Tensors appear in layer order: encoder.<i>.weight, encoder.<i>.bias,
// projection.<i>.weight, projection.<i>.bias, then attention.0, attention.1.
// Biases are written as 1 × n. Values round-trip exactly.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "metagcd/model.hpp"

namespace metagcd {

namespace detail {

inline std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_exact(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw MalformedHeaderError("bad number '" + s + "'");
  return v;
}

}  // namespace detail

template <typename Tag>
void write_checkpoint(std::ostream& os, const BasicParams<Tag>& p) {
  os << "METAGCD-CHECKPOINT 1\n";
  auto widths = [&](const char* key, const Widths& w) {
    os << key;
    for (std::size_t v : w) os << ' ' << v;
    os << '\n';
  };
  widths("encoder_widths", p.encoder_widths);
  widths("projection_widths", p.projection_widths);
  os << "attention " << (p.has_attention() ? 1 : 0) << '\n';
  auto tensor = [&](const std::string& name, const Tensor& t) {
    os << "tensor " << name << ' ' << (t.rank() == 2 ? t.rows() : 1) << ' ' << (t.rank() == 2 ? t.cols() : t.size())
       << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << detail::exact(t[i]);
    os << '\n';
  };
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    tensor("encoder." + std::to_string(i) + ".weight", p.encoder[i].weight);
    tensor("encoder." + std::to_string(i) + ".bias", p.encoder[i].bias);
  }
  for (std::size_t i = 0; i < p.projection.size(); ++i) {
    tensor("projection." + std::to_string(i) + ".weight", p.projection[i].weight);
    tensor("projection." + std::to_string(i) + ".bias", p.projection[i].bias);
  }
  for (std::size_t i = 0; i < p.attention.size(); ++i) tensor("attention." + std::to_string(i), p.attention[i]);
}

inline ModelParams read_checkpoint(std::istream& is) {
  std::string line, key;
  if (!std::getline(is, line)) throw MalformedHeaderError("checkpoint is empty");
  {
    std::istringstream ls(line);
    int version = 0;
    if (!(ls >> key >> version) || key != "METAGCD-CHECKPOINT") throw MalformedHeaderError("not a checkpoint file");
    if (version != 1) throw VersionMismatchError("checkpoint version " + std::to_string(version) + ", expected 1");
  }
  auto read_widths = [&](const char* expect) {
    if (!std::getline(is, line)) throw TruncatedDataError("checkpoint ends before " + std::string(expect));
    std::istringstream ls(line);
    ls >> key;
    if (key != expect) throw MalformedHeaderError("expected '" + std::string(expect) + "', got '" + key + "'");
    Widths w;
    std::size_t v;
    while (ls >> v) w.push_back(v);
    return w;
  };
  ModelParams p;
  p.encoder_widths = read_widths("encoder_widths");
  p.projection_widths = read_widths("projection_widths");
  try {
    validate_widths(p.encoder_widths, p.projection_widths);
  } catch (const ValidationError& e) {
    throw MalformedHeaderError(std::string("checkpoint widths: ") + e.what());
  }
  int attention = 0;
  {
    if (!std::getline(is, line)) throw TruncatedDataError("checkpoint ends before attention flag");
    std::istringstream ls(line);
    if (!(ls >> key >> attention) || key != "attention") throw MalformedHeaderError("bad attention line");
  }
  auto read_tensor = [&](const std::string& name, const Shape& shape) {
    if (!std::getline(is, line)) throw TruncatedDataError("checkpoint ends before " + name);
    std::istringstream ls(line);
    std::string tag, got;
    std::size_t r = 0, c = 0;
    if (!(ls >> tag >> got >> r >> c) || tag != "tensor" || got != name)
      throw MalformedHeaderError("expected tensor " + name + ", got '" + line.substr(0, 60) + "'");
    if (r * c != shape_size(shape)) throw MalformedHeaderError("tensor " + name + " has wrong size");
    if (!std::getline(is, line)) throw TruncatedDataError("checkpoint ends inside " + name);
    std::istringstream vs(line);
    std::vector<double> data;
    std::string tok;
    while (vs >> tok) data.push_back(detail::parse_exact(tok));
    if (data.size() != shape_size(shape)) throw TruncatedDataError("tensor " + name + " has too few values");
    return Tensor(shape, std::move(data));
  };
  auto read_layers = [&](const std::string& prefix, const Widths& w) {
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const std::string base = prefix + "." + std::to_string(i);
      Tensor weight = read_tensor(base + ".weight", {w[i], w[i + 1]});
      Tensor bias = read_tensor(base + ".bias", {w[i + 1]});
      layers.push_back({std::move(weight), std::move(bias)});
    }
    return layers;
  };
  p.encoder = read_layers("encoder", p.encoder_widths);
  p.projection = read_layers("projection", p.projection_widths);
  if (attention) {
    const std::size_t d = p.embedding_dim();
    p.attention.push_back(read_tensor("attention.0", {d, d}));
    p.attention.push_back(read_tensor("attention.1", {d, d}));
  }
  return p;
}

template <typename Tag>
void save_checkpoint(const std::filesystem::path& path, const BasicParams<Tag>& p) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, p);
  if (!os) throw IoError("write failed for " + path.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace metagcd

#endif  // METAGCD_CHECKPOINT_HPP
