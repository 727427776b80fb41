#include "tilt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tilt/rng.hpp"

namespace tilt {

namespace {

std::size_t contiguous_count(const std::vector<std::int32_t>& ids, const char* what) {
  std::int32_t max_id = -1;
  for (auto g : ids) {
    if (g < 0) throw std::invalid_argument(std::string(what) + " id is negative");
    max_id = std::max(max_id, g);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (auto g : ids) seen[static_cast<std::size_t>(g)] = true;
  for (std::size_t g = 0; g < seen.size(); ++g)
    if (!seen[g])
      throw std::invalid_argument(std::string(what) + " id " + std::to_string(g) + " is unused");
  return seen.size();
}

std::size_t floor_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("fraction must be in [0, 1]");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& tok, std::size_t line_no) {
  double v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": non-numeric field '" +
                                tok + "'");
  return v;
}

std::int32_t parse_int(const std::string& tok, std::size_t line_no) {
  std::int32_t v;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": non-integer field '" +
                                tok + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void renumber(std::vector<std::int32_t>& ids) {
  std::map<std::int32_t, std::int32_t> remap;
  for (auto& g : ids) {
    auto [it, inserted] = remap.try_emplace(g, static_cast<std::int32_t>(remap.size()));
    g = it->second;
  }
}

}  // namespace

std::size_t Dataset::group_count() const {
  return has_groups() ? contiguous_count(groups, "group") : 0;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.n = indices.size();
  out.d = d;
  out.features.reserve(out.n * d);
  out.targets.reserve(out.n);
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.targets.push_back(targets[i]);
    if (has_groups()) out.groups.push_back(groups[i]);
    if (has_annotators()) out.annotators.push_back(annotators[i]);
  }
  return out;
}

void validate(const Dataset& ds) {
  if (ds.n == 0) throw std::invalid_argument("dataset is empty");
  if (ds.d == 0) throw std::invalid_argument("feature dimension is zero");
  if (ds.features.size() != ds.n * ds.d || ds.targets.size() != ds.n)
    throw std::invalid_argument("dataset buffers have inconsistent sizes");
  for (double x : ds.features)
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite feature value");
  if (ds.has_groups()) {
    if (ds.groups.size() != ds.n) throw std::invalid_argument("group map size mismatch");
    contiguous_count(ds.groups, "group");
  }
  if (ds.has_annotators()) {
    if (ds.annotators.size() != ds.n) throw std::invalid_argument("annotator map size mismatch");
    contiguous_count(ds.annotators, "annotator");
  }
}

std::string ScenarioSpec::kind_name() const {
  switch (kind) {
    case Kind::point_estimation: return "point-estimation";
    case Kind::linear_regression_noise: return "linear-regression-noise";
    case Kind::imbalanced_logistic: return "imbalanced-logistic";
    case Kind::annotators: return "annotators";
  }
  return "?";
}

ScenarioSpec::Kind ScenarioSpec::parse_kind(const std::string& name) {
  if (name == "point-estimation") return Kind::point_estimation;
  if (name == "linear-regression-noise") return Kind::linear_regression_noise;
  if (name == "imbalanced-logistic") return Kind::imbalanced_logistic;
  if (name == "annotators") return Kind::annotators;
  throw std::invalid_argument("unknown scenario kind: " + name);
}

Dataset gen_point_estimation(const ScenarioSpec& spec) {
  if (spec.kind != ScenarioSpec::Kind::point_estimation)
    throw std::invalid_argument("spec kind is not point-estimation");
  if (spec.n == 0) throw std::invalid_argument("n must be positive");
  const std::size_t n_out = floor_count(spec.noise_fraction, spec.n);
  const std::size_t n_in = spec.n - n_out;

  Rng rng(spec.seed);
  Dataset ds;
  ds.n = spec.n;
  ds.d = 2;
  ds.features.resize(ds.n * 2);
  ds.targets.assign(ds.n, 0.0);
  ds.groups.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const bool outlier = i >= n_in;
    const auto& c = outlier ? spec.outlier_center : spec.inlier_center;
    ds.features[i * 2] = rng.normal(c[0], spec.cluster_sd);
    ds.features[i * 2 + 1] = rng.normal(c[1], spec.cluster_sd);
    ds.groups[i] = outlier ? 1 : 0;
  }
  if (n_out == 0) ds.groups.assign(ds.n, 0);
  return ds;
}

Dataset gen_linear_regression_noise(const ScenarioSpec& spec, std::span<const double> w_true,
                                    double sigma) {
  if (spec.kind != ScenarioSpec::Kind::linear_regression_noise)
    throw std::invalid_argument("spec kind is not linear-regression-noise");
  if (spec.n == 0) throw std::invalid_argument("n must be positive");
  if (w_true.size() != spec.dim) throw std::invalid_argument("w_true dimension mismatch");
  const std::size_t n_noisy = floor_count(spec.noise_fraction, spec.n);

  Rng rng(spec.seed);
  Dataset ds;
  ds.n = spec.n;
  ds.d = spec.dim;
  ds.features.resize(ds.n * ds.d);
  ds.targets.resize(ds.n);
  ds.groups.assign(ds.n, 0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < ds.d; ++j) {
      const double x = rng.normal();
      ds.features[i * ds.d + j] = x;
      dot += w_true[j] * x;
    }
    ds.targets[i] = dot + rng.normal(0.0, sigma);
  }

  double noise_mean = 5.0;
  if (spec.noise_mean_matched) {
    double sum = 0.0;
    for (double y : ds.targets) sum += y;
    noise_mean = sum / static_cast<double>(ds.n);
  }
  const double noise_sd = std::sqrt(5.0);
  for (std::size_t i : rng.sample_indices(ds.n, n_noisy)) {
    ds.targets[i] = rng.normal(noise_mean, noise_sd);
    ds.groups[i] = 1;
  }
  return ds;
}

Dataset gen_imbalanced_logistic(const ScenarioSpec& spec) {
  if (spec.kind != ScenarioSpec::Kind::imbalanced_logistic &&
      spec.kind != ScenarioSpec::Kind::annotators)
    throw std::invalid_argument("spec kind is not imbalanced-logistic");
  if (spec.n == 0) throw std::invalid_argument("n must be positive");
  if (!(spec.imbalance_ratio > 0.0)) throw std::invalid_argument("imbalance ratio must be > 0");

  // class-1 : class-0 counts in the requested ratio, remainder to the majority
  const std::size_t n0 = static_cast<std::size_t>(
      std::floor(static_cast<double>(spec.n) / (1.0 + spec.imbalance_ratio)));
  if (n0 == 0 || n0 == spec.n)
    throw std::invalid_argument("imbalance ratio leaves one class empty");

  Rng rng(spec.seed);
  Dataset ds;
  ds.n = spec.n;
  ds.d = spec.dim;
  ds.features.resize(ds.n * ds.d);
  ds.targets.resize(ds.n);
  ds.groups.resize(ds.n);
  const double offset = 0.5 * spec.class_separation / std::sqrt(static_cast<double>(ds.d));
  for (std::size_t i = 0; i < ds.n; ++i) {
    const int label = i < n0 ? 0 : 1;
    const double center = label == 0 ? -offset : offset;
    for (std::size_t j = 0; j < ds.d; ++j)
      ds.features[i * ds.d + j] = rng.normal(center, 1.0);
    ds.targets[i] = static_cast<double>(label);
    ds.groups[i] = label;
  }
  return ds;
}

Dataset gen_annotators(const ScenarioSpec& spec, const Dataset& base) {
  if (spec.kind != ScenarioSpec::Kind::annotators)
    throw std::invalid_argument("spec kind is not annotators");
  const int total = spec.hammers + spec.spammers;
  if (total <= 0) throw std::invalid_argument("need at least one annotator");
  for (double y : base.targets)
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument("annotator base must have {0,1} class labels");

  Rng rng(spec.seed + 0x9e3779b97f4a7c15ull);  // separate stream from the base draw
  Dataset ds = base;
  ds.annotators.resize(ds.n);
  ds.groups.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const int a = static_cast<int>(i % static_cast<std::size_t>(total));
    ds.annotators[i] = a;
    ds.groups[i] = a;
    if (a >= spec.hammers)  // spammers relabel uniformly at random
      ds.targets[i] = static_cast<double>(rng.below(2));
  }
  return ds;
}

Dataset generate(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioSpec::Kind::point_estimation:
      return gen_point_estimation(spec);
    case ScenarioSpec::Kind::linear_regression_noise: {
      std::vector<double> w = spec.w_true;
      if (w.empty()) {
        Rng wrng(spec.seed ^ 0xd1b54a32d192ed03ull);
        w.resize(spec.dim);
        for (auto& x : w) x = wrng.normal();
      }
      return gen_linear_regression_noise(spec, w, spec.sigma);
    }
    case ScenarioSpec::Kind::imbalanced_logistic:
      return gen_imbalanced_logistic(spec);
    case ScenarioSpec::Kind::annotators:
      return gen_annotators(spec, gen_imbalanced_logistic(spec));
  }
  throw std::invalid_argument("unknown scenario kind");
}

void save_csv(const Dataset& ds, const std::string& path) {
  validate(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t j = 0; j < ds.d; ++j) out << 'f' << j << ',';
  out << "target";
  if (ds.has_groups()) out << ",group";
  if (ds.has_annotators()) out << ",annotator";
  out << '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) out << format_double(ds.features[i * ds.d + j]) << ',';
    out << format_double(ds.targets[i]);
    if (ds.has_groups()) out << ',' << ds.groups[i];
    if (ds.has_annotators()) out << ',' << ds.annotators[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("missing header row");

  const auto header = split_csv_line(line);
  std::size_t d = 0;
  while (d < header.size() && header[d] == "f" + std::to_string(d)) ++d;
  if (d == 0) throw std::invalid_argument("header must start with feature columns f0..");
  std::size_t col = d;
  if (col >= header.size() || header[col] != "target")
    throw std::invalid_argument("expected 'target' column after features");
  ++col;
  bool has_group = false, has_annotator = false;
  if (col < header.size() && header[col] == "group") {
    has_group = true;
    ++col;
  }
  if (col < header.size() && header[col] == "annotator") {
    has_annotator = true;
    ++col;
  }
  if (col != header.size())
    throw std::invalid_argument("unknown column '" + header[col] + "'");

  Dataset ds;
  ds.d = d;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    for (std::size_t j = 0; j < d; ++j)
      ds.features.push_back(parse_double(fields[j], line_no));
    ds.targets.push_back(parse_double(fields[d], line_no));
    std::size_t k = d + 1;
    if (has_group) ds.groups.push_back(parse_int(fields[k++], line_no));
    if (has_annotator) ds.annotators.push_back(parse_int(fields[k], line_no));
    ++ds.n;
  }
  if (ds.n == 0) throw std::invalid_argument("no data rows in " + path);
  if (has_group) renumber(ds.groups);
  if (has_annotator) renumber(ds.annotators);
  validate(ds);
  return ds;
}

}  // namespace tilt
