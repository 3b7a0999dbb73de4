#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "qpkr/engine.hpp"
#include "qpkr/model.hpp"

// Persistence: CSV data files, JSON parameter blocks, content digests.
// Every number is printed with %.17g so values survive a write/read cycle
// bit-for-bit and repeated runs produce byte-identical files.

namespace qpkr::io {

std::string g17(double v);
double parse_double(const std::string& s);  // strict: whole token must parse

std::string sha256_bytes(const void* data, std::size_t n);
std::string sha256_file(const std::filesystem::path& path);

// ISO-8601 UTC wall-clock time, e.g. "2026-03-14T09:26:53Z".
std::string utc_timestamp();

// Observable table, one row per recorded kick count:
//   t,p2,p2_err,pi0,pi0_err
// p2 is the ensemble <m^2> (squared momentum displacement in lattice units),
// pi0 the ensemble return probability. Extra in-memory fields (m1, ensemble
// metadata) live in the JSON sidecar, not in the CSV.
void write_observable_csv(const std::filesystem::path& path,
                          const engine::EnsembleResult& series);
engine::EnsembleResult read_observable_csv(const std::filesystem::path& path);

// Generic CSV table for plot data: header joined with commas, then rows of
// preformatted cells. Cells must not contain commas or newlines.
void write_table_csv(const std::filesystem::path& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

// Parameter sets as JSON. Symbolic frequencies serialize structurally
// ({"sqrt": 5} meaning 2*pi*sqrt(5)) so presets round-trip exactly.
std::string parameter_set_to_json(const model::ParameterSet& ps);
model::ParameterSet parameter_set_from_json(const std::string& text);

// Atomic-ish text file write: write to <path>.tmp then rename over path.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qpkr::io
