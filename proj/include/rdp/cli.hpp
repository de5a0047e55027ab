#pragma once

// Command-line front end and the figure presets it exposes.

#include <string>
#include <vector>

#include "rdp/dgp.hpp"
#include "rdp/frontier.hpp"
#include "rdp/io.hpp"
#include "rdp/sae.hpp"

namespace rdp::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidation = 2, kRuntime = 3 };

struct DgpSetup {
    dgp::ConceptPmf pmf;
    dgp::ConceptBasis basis;
    io::Json config;  // resolved keys, reloadable by dgp_from_config
};

/// Pmf keys (n, kind, support | bernoulli) plus d, basis and basis_seed.
DgpSetup dgp_from_config(const io::Json& config);

/// Four orthonormal concepts in R^4, each active with probability 0.2.
DgpSetup fig3_dgp();
/// Width 3, TopK-2, lambda 0, near-monosemantic start.
sae::TrainConfig fig3_train();
inline constexpr std::size_t kFig3Seeds = 7;
inline constexpr std::uint64_t kFig3BaseSeed = 0;

/// Twenty random unit concepts in R^6 with E||c||_0 = 0.6.
DgpSetup fig4_dgp();
/// K in 1..8, the default lambda axis, 7 seeds, width 20.
frontier::SweepGrid fig4_grid();

/// Runs the tool; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace rdp::cli
