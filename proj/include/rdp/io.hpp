#pragma once

// File formats: structured config/pmf text, CSV tables and JSON reports.
// Concept indices are 1-based in every file and 0-based in memory.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rdp/audit.hpp"
#include "rdp/combinat.hpp"
#include "rdp/dgp.hpp"
#include "rdp/frontier.hpp"
#include "rdp/poly.hpp"
#include "rdp/sae.hpp"

namespace rdp::io {

using Json = nlohmann::ordered_json;

/// Shortest round-trip text ("%.17g"); integers print without a fraction.
std::string format_double(double v);

std::string read_file(const std::string& path);
/// Creates missing parent directories.
void write_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit, lowercase hex.
std::string fnv1a_hex(std::string_view data);
std::string file_hash(const std::string& path);

/// Accepts JSON, or `key = value` lines whose values are numbers, strings,
/// booleans, arrays or inline tables such as {set=[1,2], p=0.4}. Arrays may
/// span lines; `#` starts a comment outside strings.
Json parse_structured(const std::string& text);
Json load_structured(const std::string& path);

/// Keys `n`, `kind` ("explicit" or "bernoulli"), and `support` or `bernoulli`.
dgp::ConceptPmf pmf_from_json(const Json& j);
Json pmf_to_json(const dgp::ConceptPmf& pmf);
/// The pmf in `key = value` form.
std::string pmf_to_text(const dgp::ConceptPmf& pmf);
dgp::ConceptPmf load_pmf(const std::string& path);

/// d rows, header v1..vn, one column per concept.
std::string basis_csv(const dgp::ConceptBasis& basis);
/// Without an explicit mode, orthonormal is chosen when the columns are orthonormal within 1e-9.
dgp::ConceptBasis parse_basis_csv(const std::string& text, std::optional<dgp::BasisMode> mode = std::nullopt);

/// m rows, header c1..cn,zero_row.
std::string cosine_csv(const poly::CosineTable& table);

/// step,D,R,P_joint,loss
std::string trace_csv(const std::vector<sae::TracePoint>& trace);

Json train_config_json(const sae::TrainConfig& cfg);
/// Overlays recognized keys onto `base`; unknown keys are errors.
sae::TrainConfig train_config_from_json(const Json& j, sae::TrainConfig base = {});

/// w_enc.csv, w_dec.csv, b_enc.csv, b_dec.csv and sae.json in `dir`.
/// Returns the written paths.
std::vector<std::string> save_checkpoint(const std::string& dir, const sae::SaeParams& params,
                                         const sae::TrainConfig& cfg);
sae::SaeParams load_checkpoint(const std::string& dir);

/// run_id,k,lambda,seed,R,D,P,status
std::string sweep_csv(const std::vector<frontier::SweepPoint>& points);
std::vector<frontier::SweepPoint> parse_sweep_csv(const std::string& text);

/// D0,P0,R_star,feasible (or R0,P0,D_star,feasible for the distortion dual).
std::string envelope_csv(const frontier::Envelope& env);

/// D_threshold,min_rate
std::string staircase_csv(const combinat::FrontierStaircase& stairs);

Json code_json(const combinat::AlignedCode& code);
Json rate_tax_json(const combinat::RateTaxReport& report);
Json predicates_json(const std::vector<combinat::PredicateRow>& rows);

struct AuditTable {
    std::vector<audit::AuditRecord> records;
    std::vector<std::string> proxies;  // column order
};

/// sae_id,R,D,<proxy>...; empty proxy cells are treated as missing.
AuditTable parse_audit_csv(const std::string& text);
/// {"proxy": 1 | -1, ...}
std::map<std::string, int> parse_orientation(const Json& j);
Json audit_json(const audit::AuditReport& report);
/// i,j,sae_i,sae_j (1-based record positions)
std::string pairs_csv(const std::vector<audit::AuditRecord>& records,
                      const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// Splits one CSV line; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace rdp::io
