#pragma once

// Shared by the unit tests and the acceptance gate: fixtures, independent
// oracles and the latent-interpolation baseline.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hairedit/ad/ops.hpp"
#include "hairedit/core/io.hpp"
#include "hairedit/pipeline/pipeline.hpp"

namespace hairedit::testing {

// Toy engine with default settings, built once per process.
std::shared_ptr<const Engine> toy_engine();
// Toy engine with smaller optimizer budgets, for tests that only need the
// plumbing to run.
std::shared_ptr<const Engine> fast_engine();

// Generated face at truncation psi; 8-bit quantized like a decoded PNG.
Image sample_face(const GeneratorBackend& gen, std::uint64_t seed, double psi = 0.7);
// Seeds from `first` on whose sample has at least `min_hair` hair pixels.
std::vector<std::uint64_t> seeds_with_hair(const Engine& engine, int count, std::uint64_t first = 0,
                                           int min_hair = 60);

// Per-cell loop blend, written without the library's blend code.
FeatureMap reference_blend(const FeatureMap& a, const FeatureMap& b, const BinaryMask& m);

// Random mask with roughly `density` of the cells on.
BinaryMask random_mask(int h, int w, double density, std::uint64_t seed);
FeatureMap random_features(Stage stage, Shape3 shape, std::uint64_t seed);
Image random_image(int h, int w, std::uint64_t seed, double lo = 0.05, double hi = 0.95);

// ||g_analytic - g_fd|| / max(||g_analytic||, ||g_fd||) over `coords` random
// coordinates of x (all of them when coords <= 0), with central differences.
using ScalarFn = std::function<ad::Var(ad::Tape&, ad::Var x)>;
double gradient_relative_error(const ScalarFn& f, const std::vector<double>& x, int coords, std::uint64_t seed,
                               double eps = 1e-6);

// Latent-interpolation alternative to feature blending: style-stage features
// of (1 - alpha) w_bald + alpha w_proxy.
FeatureMap latent_interpolation_features(const LatentWPlus& w_bald, const LatentWPlus& w_proxy, double alpha,
                                         const GeneratorBackend& gen);
// Largest |f - ref| over cells where m is 0.
double max_deviation_outside(const FeatureMap& f, const FeatureMap& ref, const BinaryMask& m);

// Runs the CLI binary with the given arguments; returns its exit status.
// stdout and stderr go to `log` when it is non-empty.
int run_cli(const std::vector<std::string>& args, const std::filesystem::path& log = {});

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

bool files_equal(const std::filesystem::path& a, const std::filesystem::path& b);

// Regression values frozen in tests/fixtures/golden.hewt. The make_golden
// tool writes that file from this function; the golden test recomputes
// every entry and compares.
io::TensorArchive golden_values();

}  // namespace hairedit::testing
