#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace stochastica::cli {

enum class Format { csv, json };

struct Options {
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<Format> format;
  std::size_t threads = 1;
};

/// Each command writes its report to `out` (or to --out when that names
/// the report file) and returns the process exit code.
int cmd_simulate(const Options& opts, std::ostream& out);
int cmd_density(const Options& opts, std::ostream& out);
int cmd_price(const Options& opts, std::ostream& out);
int cmd_greeks(const Options& opts, std::ostream& out);
int cmd_hedge(const Options& opts, std::ostream& out);
int cmd_index(const Options& opts, std::ostream& out);
int cmd_check(const Options& opts, std::ostream& out);

}  // namespace stochastica::cli
