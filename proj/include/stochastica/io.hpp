#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "stochastica/density.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/pathintegral.hpp"

namespace stochastica::io {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double x);

/// '#' metadata lines, then path_id,step,t,asset,value.
void write_paths_csv(std::ostream& out, const PathBatch& batch);

/// Little-endian binary layout, see docs/pathbatch_format.md.
void write_paths_binary(std::ostream& out, const PathBatch& batch);
PathBatch read_paths_binary(std::istream& in);

/// '#' metadata lines (t, mass, model hash, label), then S,p.
void write_density_csv(std::ostream& out, const DensityGrid& d, std::uint64_t model_hash,
                       const std::string& label = "");

/// '#' source metadata, then t,S,G rows with a blank line between times.
void write_green_csv(std::ostream& out, const GreensFunction& g, std::uint64_t model_hash);

std::string hex(std::uint64_t v);

/// JSON text with every floating-point number printed by format_double
/// (non-finite values become null). Object keys keep nlohmann's sorted order.
std::string dump_json(const nlohmann::json& j, int indent = 2);

}  // namespace stochastica::io
