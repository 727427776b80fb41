#ifndef TILT_DATASET_HPP
#define TILT_DATASET_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tilt {

// Samples are stored row-major; group/annotator maps are either empty or
// hold one contiguous id in [0, G) per sample.
struct Dataset {
  std::size_t n{0};
  std::size_t d{0};
  std::vector<double> features;            // n * d
  std::vector<double> targets;             // n
  std::vector<std::int32_t> groups;        // empty or n
  std::vector<std::int32_t> annotators;    // empty or n

  bool has_groups() const { return !groups.empty(); }
  bool has_annotators() const { return !annotators.empty(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
  std::size_t group_count() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  bool operator==(const Dataset&) const = default;
};

// Checks the structural invariants (finite features, consistent sizes,
// contiguous group ids each appearing at least once); throws on violation.
void validate(const Dataset& ds);

struct ScenarioSpec {
  enum class Kind { point_estimation, linear_regression_noise, imbalanced_logistic, annotators };

  Kind kind{Kind::point_estimation};
  std::size_t n{100};
  std::size_t dim{2};
  double noise_fraction{0.0};
  double imbalance_ratio{1.0};
  int hammers{0};
  int spammers{0};
  std::uint64_t seed{0};

  // scenario knobs beyond the common fields
  std::array<double, 2> inlier_center{1.0, 1.0};
  std::array<double, 2> outlier_center{5.0, 5.0};
  double cluster_sd{0.5};             // point-estimation spread
  double sigma{0.5};                  // clean-target noise scale
  bool noise_mean_matched{false};     // corrupt with clean-mean targets instead of N(5,5)
  double class_separation{2.0};       // distance between logistic class centers
  std::vector<double> w_true;         // empty: drawn from seed

  std::string kind_name() const;
  static Kind parse_kind(const std::string& name);
};

// Generators.  Each is a pure function of (spec, args); the same spec and
// seed reproduce byte-identical datasets.  Fraction-to-count rounding is
// floor(fraction * N) with the remainder going to the majority part.
Dataset gen_point_estimation(const ScenarioSpec& spec);
Dataset gen_linear_regression_noise(const ScenarioSpec& spec, std::span<const double> w_true,
                                    double sigma);
Dataset gen_imbalanced_logistic(const ScenarioSpec& spec);
Dataset gen_annotators(const ScenarioSpec& spec, const Dataset& base);

// Dispatches on spec.kind (annotators composes an imbalanced_logistic base
// with ratio 1 unless the spec says otherwise).
Dataset generate(const ScenarioSpec& spec);

// CSV schema: header f0..f{d-1},target[,group][,annotator]; UTF-8, '.'
// decimal, comma delimiter.  Values are written with enough digits to
// round-trip exactly.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace tilt

#endif
