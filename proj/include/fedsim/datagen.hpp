#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

/// Generator parameters a synthetic client was drawn from.
struct ClientTruth {
  std::optional<double> curvature;          // quadratic h_i
  std::optional<double> optimum;            // quadratic a_i
  std::optional<double> phase;              // sine theta_i
  std::vector<double> coefficients;         // concept-shift linear truth
  std::vector<double> class_proportions;    // label-skew Dirichlet draw
};

struct ClientDataset {
  int client_id = 0;
  int group = 0;
  Batch train;
  Batch test;
  ClientTruth truth;

  std::size_t n() const { return train.size(); }
};

struct FederatedDataset {
  std::vector<ClientDataset> clients;
  ModelSpec spec;  // model family the generator was designed for
  int groups = 1;

  std::size_t size() const { return clients.size(); }
  std::vector<double> sizes() const;
  void validate() const;
};

/// Client i's squared-error loss under a bias-free scalar linear model is
/// exactly h_i (w - a_i)^2 / 2.
FederatedDataset gen_quadratic_clients(const std::vector<double>& curvatures, const std::vector<double>& optima,
                                       int points_per_client = 1);

struct SineOptions {
  int clients = 50;
  int points_per_client = 20;
  int test_points = 50;
  double noise_sd = 0.0;
  std::vector<int> hidden{32};
  std::optional<std::vector<double>> phases;  // drawn U[0,1] when absent
  std::uint64_t seed = 0;
};
/// y = sin(2 pi (x + theta_i)) + noise with x ~ U[0,1].
FederatedDataset gen_sine_clients(const SineOptions& opt);

struct LabelSkewOptions {
  int clients = 10;
  int classes = 3;
  double alpha = 0.5;
  int total_points = 1000;
  int test_points = 50;  // per client
  int input_dim = 2;
  double class_separation = 3.0;
  std::uint64_t seed = 0;
};
/// Gaussian class blobs; per-client class shares drawn Dirichlet(alpha).
FederatedDataset gen_label_skew_classification(const LabelSkewOptions& opt);

struct ConceptShiftOptions {
  int clients = 10;
  int clusters = 2;
  int input_dim = 1;
  int points_per_client = 20;
  int test_points = 20;
  double noise_sd = 0.0;
  double truth_scale = 2.0;
  std::optional<std::vector<std::vector<double>>> truths;
  std::uint64_t seed = 0;
};
/// Shared inputs, cluster-specific linear maps; client i belongs to cluster i mod G.
FederatedDataset gen_concept_shift_regression(const ConceptShiftOptions& opt);

struct CsvOptions {
  std::string partition_column;
  std::optional<std::string> target_column;  // default: last remaining column
  std::optional<std::string> group_column;
  bool classification = false;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};
/// One client per distinct partition value (sorted), seeded 80/20 split.
FederatedDataset load_csv_partition(const std::string& path, const CsvOptions& opt);

}  // namespace fedsim
