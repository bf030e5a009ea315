#pragma once

#include <string>
#include <vector>

#include "nilnet/io.hpp"

// Subcommand front end: graph {gen,check}, couple {synth,sweep},
// net {spectrum,split}, cm {reduce,design}, nf reduce, sim {run,lyap,scan},
// pipeline run. Artifacts are written into --out as JSON (plus plot-ready CSV
// tables with --format csv). Exit codes: 0 success, 2 validation or schema
// error, 3 numerical failure.

namespace nilnet::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);  // args without the program name

// Runs the whole synthesis-to-chaos chain from a manifest document: graph
// check, coupling synthesis (with the single-chain perturbation when the
// kernel is geometric), alpha* network design, center-manifold reduction,
// normal-form extraction and blow-up, saddle-focus scan. Stage artifacts are
// cached in out_dir by input hash; reruns with an identical manifest
// reproduce identical bytes. Returns the summary document (also written to
// out_dir/summary.json).
io::json run_pipeline(const io::json& manifest, const std::string& out_dir);

}  // namespace nilnet::cli
