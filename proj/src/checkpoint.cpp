#include "can/error.hpp"
#include "can/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace can {

namespace {

constexpr const char* kMagic = "can-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_tensor(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
                  std::span<const double> values) {
  out << name << ' ' << rows << ' ' << cols << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << format_double(values[r * cols + c]);
    }
    out << '\n';
  }
}

std::vector<double> read_tensor(std::istream& in, const std::string& expected_name, std::size_t& rows,
                                std::size_t& cols) {
  std::string name;
  if (!(in >> name >> rows >> cols)) throw Error("checkpoint: truncated header for " + expected_name);
  if (name != expected_name) throw Error("checkpoint: expected tensor " + expected_name + ", found " + name);
  std::vector<double> v(rows * cols);
  for (double& x : v) {
    std::string tok;
    if (!(in >> tok)) throw Error("checkpoint: truncated data for " + name);
    try {
      std::size_t pos = 0;
      x = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error("checkpoint: bad value '" + tok + "' in " + name);
    }
  }
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n' << "layers " << params.layers.size() << '\n';
  for (const auto& l : params.layers) {
    out << "layer " << l.name << '\n';
    write_tensor(out, l.name + ".weight", l.weight.rows(), l.weight.cols(), l.weight.values());
    write_tensor(out, l.name + ".bias", 1, l.bias.size(), l.bias);
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write checkpoint " + path);
  save_checkpoint(params, f);
  if (!f) throw Error("failed writing checkpoint " + path);
}

ModelParams load_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw Error("checkpoint: missing header");
  if (version != kVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  std::string key;
  std::size_t count = 0;
  if (!(in >> key >> count) || key != "layers" || count < 2) throw Error("checkpoint: bad layer count");

  ModelParams p;
  for (std::size_t i = 0; i < count; ++i) {
    std::string tag, name;
    if (!(in >> tag >> name) || tag != "layer") throw Error("checkpoint: expected layer record");
    std::size_t wr = 0, wc = 0, br = 0, bc = 0;
    std::vector<double> w = read_tensor(in, name + ".weight", wr, wc);
    std::vector<double> b = read_tensor(in, name + ".bias", br, bc);
    if (br != 1 || bc != wr) throw Error("checkpoint: bias shape does not match " + name);
    if (!p.layers.empty() && p.layers.back().weight.rows() != wc) {
      throw Error("checkpoint: layer " + name + " input width does not match previous layer");
    }
    DenseLayer layer{name, Matrix(wr, wc), std::move(b)};
    std::ranges::copy(w, layer.weight.values().begin());
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint " + path);
  return load_checkpoint(f);
}

}  // namespace can
