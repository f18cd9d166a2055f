#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "krdiv/flow.hpp"
#include "krdiv/measures.hpp"
#include "krdiv/minimizer.hpp"
#include "krdiv/transport.hpp"

namespace krdiv {

/// One asserted quantity: value compared against a reference or bound.
struct Check {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string relation;  // "<=", "==", ">=" ...
};

/// Builds value <= bound + tol.
Check check_le(std::string name, double value, double bound, double tol);
/// Builds |value - reference| <= tol.
Check check_near(std::string name, double value, double reference, double tol);

bool all_pass(const std::vector<Check>& checks);

nlohmann::json to_json(const Check& c);
nlohmann::json to_json(const std::vector<Check>& checks);
nlohmann::json to_json(const GaussianMixture& m);
nlohmann::json to_json(const GapReport& r);
nlohmann::json to_json(const FlowReport& r);
nlohmann::json to_json(const MinimizeResult& r);

/// Parses a measure spec; SpecError messages name the offending field.
GaussianMixture mixture_from_json(const nlohmann::json& j);
GaussianMixture load_mixture(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Random expansion with standard normal coefficients up to `max_degree`.
ChaosFn random_chaos(std::size_t dim, unsigned max_degree, std::mt19937_64& rng);

struct OperatorSuiteConfig {
  std::size_t dim = 2;
  unsigned degree = 6;
  unsigned nodes_per_axis = 20;
  std::uint64_t seed = 0;
  std::size_t count = 50;  // random functions per identity
  std::vector<double> times{0.05, 0.2, 1.0};
  double identity_tol = 1e-10;
  double mehler_tol = 1e-6;
  /// Test hook: perturbs one coefficient of the representation check.
  bool inject_fault = false;
};

/// Adjointness, ID = L, representation, norm contraction, Mehler agreement
/// and the semigroup law at the configured size.
std::vector<Check> verify_operators(const OperatorSuiteConfig& cfg);

}  // namespace krdiv
