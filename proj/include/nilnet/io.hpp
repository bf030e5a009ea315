#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "nilnet/coupling.hpp"
#include "nilnet/cmred.hpp"
#include "nilnet/dynsim.hpp"
#include "nilnet/graphlab.hpp"
#include "nilnet/netlin.hpp"
#include "nilnet/nform.hpp"
#include "nilnet/numkit.hpp"

// JSON (and plot-ready CSV) serialization for every artifact the command line
// tool reads or writes. Loaders validate the document shape and report the
// offending location as a JSON pointer. Serialization is deterministic: keys
// are emitted sorted and floats use shortest round-trip formatting, so equal
// in-memory values always produce identical bytes.

namespace nilnet::io {

using json = nlohmann::json;
using numkit::Matrix;

// --- files ---
json read_json_file(const std::string& path);  // ValidationError on missing or unparsable
void write_text_file(const std::string& path, const std::string& text);
std::string dump_json(const json& j);  // dump(2) + trailing newline
void write_json_file(const std::string& path, const json& j);
std::string content_hash(const json& j);  // 16 hex digits, FNV-1a of the dump

// --- schema helpers (ptr is the JSON-pointer prefix for error messages) ---
const json& require_key(const json& j, const std::string& key, const std::string& ptr);
double require_number(const json& j, const std::string& ptr);
std::size_t require_index(const json& j, const std::string& ptr);
bool require_bool(const json& j, const std::string& ptr);
std::string require_string(const json& j, const std::string& ptr);
const json& require_array(const json& j, const std::string& ptr);
const json& require_object(const json& j, const std::string& ptr);

// --- core types ---
json to_json(const Matrix& M);
Matrix matrix_from_json(const json& j, const std::string& ptr = "");
json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j, const std::string& ptr = "");
json to_json(const graphlab::Graph& g);
graphlab::Graph graph_from_json(const json& j, const std::string& ptr = "");
json to_json(const cmred::PolyField& f);
cmred::PolyField polyfield_from_json(const json& j, const std::string& ptr = "");
json spectrum_to_json(const numkit::Spectrum& s);

// --- reports and designs ---
json to_json(const graphlab::VersatilityReport& r);
json to_json(const coupling::SkewnessCertificate& c);
json to_json(const coupling::CouplingDesign& d);
coupling::CouplingDesign coupling_design_from_json(const json& j, const std::string& ptr = "");
json to_json(const coupling::BetaSweepResult& r);
std::string beta_tracks_csv(const coupling::BetaSweepResult& r);
json to_json(const netlin::NetworkDesign& n);
netlin::NetworkDesign network_design_from_json(const json& j, const std::string& ptr = "");
json blocks_to_json(const std::vector<netlin::BlockSpectrum>& blocks);
json to_json(const netlin::CenterSplit& s);
json to_json(const cmred::CenterModel& m);
json to_json(const nform::UnfoldingData& u);
std::array<double, 6> a_coeffs_from_json(const json& j, const std::string& ptr = "");
json to_json(const nform::NormalFormResult& r);
json to_json(const dynsim::Trajectory& t);
std::string trajectory_csv(const dynsim::Trajectory& t);
json to_json(const dynsim::LyapunovEstimate& e);
json to_json(const dynsim::SweepResult& r);
json scan_to_json(const dynsim::ScanReport& r);  // elapsed time excluded: artifacts
                                                 // must be byte-identical across reruns
std::string scan_csv(const dynsim::ScanReport& r);

}  // namespace nilnet::io
