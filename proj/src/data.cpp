#include "can/data.hpp"

#include "can/error.hpp"
#include "can/rng.hpp"
#include "can/simd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace can {

std::string to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw Error("unknown domain '" + s + "'");
}

bool Dataset::fully_labeled() const {
  for (int y : labels)
    if (y == kUnlabeled) return false;
  return !labels.empty();
}

int Dataset::num_classes() const {
  int m = -1;
  for (int y : labels) m = std::max(m, y);
  return m + 1;
}

void Dataset::validate() const {
  if (features.rows() == 0) throw Error("no samples");
  if (labels.size() != features.rows()) throw Error("dataset: label count does not match rows");
  for (int y : labels)
    if (y < kUnlabeled) throw Error("dataset: negative label");
  for (double v : features.values())
    if (!std::isfinite(v)) throw Error("dataset: non-finite feature");
}

namespace {

constexpr std::uint64_t kLaneMeans = 1;
constexpr std::uint64_t kLaneSource = 2;
constexpr std::uint64_t kLaneTarget = 3;
constexpr std::uint64_t kLaneShift = 4;
constexpr int kMaxMeanDraws = 10000;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

DomainPair gen_blobs(std::uint64_t seed, int classes, std::size_t per_class, std::size_t dims, const BlobShift& shift,
                     double mean_spread, double min_separation) {
  if (classes < 2) throw Error("gen_blobs: need at least 2 classes");
  if (dims < 2) throw Error("gen_blobs: need at least 2 dimensions");
  if (per_class == 0) throw Error("gen_blobs: per_class must be positive");
  if (!(shift.noise >= 0.0) || !(shift.scale > 0.0) || !(mean_spread > 0.0) || !std::isfinite(shift.rotation_deg) ||
      !(shift.translation >= 0.0) || !(min_separation >= 0.0)) {
    throw Error("gen_blobs: invalid shift parameters");
  }
  const auto m = static_cast<std::size_t>(classes);

  Rng mean_rng(derive_seed(seed, kLaneMeans));
  Matrix means(m, dims);
  auto separated = [&] {
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if (simd::squared_distance(means.row(a), means.row(b)) < min_separation * min_separation) return false;
    return true;
  };
  int attempts = 0;
  do {
    if (++attempts > kMaxMeanDraws) throw Error("gen_blobs: could not place means with the requested separation");
    for (double& v : means.values()) v = mean_spread * mean_rng.normal();
  } while (!separated());

  Rng shift_rng(derive_seed(seed, kLaneShift));
  std::vector<double> direction(dims);
  double norm = 0.0;
  for (double& v : direction) {
    v = shift_rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : direction) v /= norm;

  const double th = radians(shift.rotation_deg);
  Matrix shifted(m, dims);
  for (std::size_t c = 0; c < m; ++c) {
    auto src = means.row(c);
    auto dst = shifted.row(c);
    for (std::size_t k = 0; k < dims; ++k) dst[k] = shift.scale * src[k];
    const double x = dst[0], y = dst[1];
    dst[0] = std::cos(th) * x - std::sin(th) * y;
    dst[1] = std::sin(th) * x + std::cos(th) * y;
    for (std::size_t k = 0; k < dims; ++k) dst[k] += shift.translation * direction[k];
  }

  std::map<std::string, double> params{{"classes", classes},
                                       {"per_class", static_cast<double>(per_class)},
                                       {"dims", static_cast<double>(dims)},
                                       {"rotation_deg", shift.rotation_deg},
                                       {"translation", shift.translation},
                                       {"scale", shift.scale},
                                       {"noise", shift.noise},
                                       {"mean_spread", mean_spread},
                                       {"min_separation", min_separation}};

  auto sample = [&](const Matrix& centers, std::uint64_t lane, Domain domain) {
    Rng rng(derive_seed(seed, lane));
    Dataset d;
    d.domain = domain;
    d.generator = {"blobs", seed, params};
    d.features = Matrix(m * per_class, dims);
    d.labels.resize(m * per_class);
    for (std::size_t i = 0; i < m * per_class; ++i) {
      const std::size_t c = i % m;
      d.labels[i] = static_cast<int>(c);
      auto row = d.features.row(i);
      for (std::size_t k = 0; k < dims; ++k) row[k] = centers(c, k) + shift.noise * rng.normal();
    }
    return d;
  };
  return {sample(means, kLaneSource, Domain::Source), sample(shifted, kLaneTarget, Domain::Target)};
}

DomainPair gen_moons(std::uint64_t seed, std::size_t per_class, double rotation_deg, double noise) {
  if (per_class == 0) throw Error("gen_moons: per_class must be positive");
  if (!(noise >= 0.0) || !std::isfinite(rotation_deg)) throw Error("gen_moons: invalid parameters");
  const double th = radians(rotation_deg);
  constexpr double cx = 0.5, cy = 0.25;
  std::map<std::string, double> params{
      {"per_class", static_cast<double>(per_class)}, {"rotation_deg", rotation_deg}, {"noise", noise}};

  auto sample = [&](std::uint64_t lane, Domain domain, double angle) {
    Rng rng(derive_seed(seed, lane));
    Dataset d;
    d.domain = domain;
    d.generator = {"moons", seed, params};
    d.features = Matrix(2 * per_class, 2);
    d.labels.resize(2 * per_class);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
      const int c = static_cast<int>(i % 2);
      const double t = std::numbers::pi * rng.uniform();
      double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
      x += noise * rng.normal();
      y += noise * rng.normal();
      const double dx = x - cx, dy = y - cy;
      d.features(i, 0) = cx + std::cos(angle) * dx - std::sin(angle) * dy;
      d.features(i, 1) = cy + std::sin(angle) * dx + std::cos(angle) * dy;
      d.labels[i] = c;
    }
    return d;
  };
  return {sample(kLaneSource, Domain::Source, 0.0), sample(kLaneTarget, Domain::Target, th)};
}

std::string to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t k = 0; k < data.dims(); ++k) out += "feature_" + std::to_string(k) + ",";
  out += "label,domain\n";
  char buf[32];
  const std::string dom = to_string(data.domain);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out += buf;
    }
    out += std::to_string(data.labels[i]) + "," + dom + "\n";
  }
  return out;
}

void save_csv(const Dataset& data, const std::string& path) {
  data.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << to_csv(data);
  if (!f) throw Error("failed writing " + path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(source_name + ":" + std::to_string(line_no) + ": " + msg);
  };

  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("no samples");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "domain") {
    throw fail("header must be feature_0,...,label,domain");
  }
  const std::size_t dims = header.size() - 2;
  for (std::size_t k = 0; k < dims; ++k) {
    if (header[k] != "feature_" + std::to_string(k)) throw fail("unexpected header column '" + header[k] + "'");
  }

  std::vector<double> values;
  Dataset d;
  bool have_domain = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != dims + 2) {
      throw fail("expected " + std::to_string(dims + 2) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t k = 0; k < dims; ++k) {
      const std::string& c = cells[k];
      double v = 0.0;
      std::size_t pos = 0;
      try {
        v = std::stod(c, &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      if (pos != c.size() || c.empty()) throw fail("malformed number '" + c + "'");
      if (!std::isfinite(v)) throw fail("non-finite feature");
      values.push_back(v);
    }
    const std::string& lab = cells[dims];
    int y = 0;
    const auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), y);
    if (ec != std::errc() || ptr != lab.data() + lab.size() || lab.empty()) {
      throw fail("non-integer label '" + lab + "'");
    }
    if (y < kUnlabeled) throw fail("label must be >= -1");
    d.labels.push_back(y);
    Domain dom;
    try {
      dom = parse_domain(cells[dims + 1]);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (have_domain && dom != d.domain) throw fail("mixed domains in one file");
    d.domain = dom;
    have_domain = true;
  }
  if (d.labels.empty()) throw fail("no samples");
  d.features = Matrix(d.labels.size(), dims);
  std::ranges::copy(values, d.features.values().begin());
  return d;
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), path);
}

}  // namespace can
