#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "filterbench/errors.hpp"
#include "filterbench/hmm.hpp"
#include "filterbench/markov.hpp"

namespace fb {

// Round-trip exact float formatting (17 significant digits).
std::string format_double(double v);

// Parse one table: header row must equal `schema` exactly. Blank cells,
// non-numeric cells, and NaN are hard errors naming the line number.
std::vector<std::vector<double>> ingest_csv(const std::string& path,
                                            const std::vector<std::string>& schema);

// Columns emitted in sorted name order; floats at 17 significant digits.
void emit_csv(const std::map<std::string, std::vector<double>>& columns,
              const std::string& path);

// FNV-1a over the canonical config text.
std::uint64_t config_hash(const std::string& canonical);

// JSON model files.
MarkovSpec load_markov_spec_json(const std::string& path);
DiscreteHMM load_hmm_json(const std::string& path);

// CLI entry point (exit codes: 0 ok, 2 usage/spec, 3 data, 4 numerical).
int run_cli(int argc, char** argv);

} // namespace fb
