#include "stochastica/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

#include "stochastica/errors.hpp"

namespace stochastica::io {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

void dump_into(std::string& out, const nlohmann::json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ',';
          out += nl;
        }
        first = false;
        out += pad;
        out += nlohmann::json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        dump_into(out, it.value(), indent, depth + 1);
      }
      out += nl;
      out += close;
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) {
          out += ',';
          out += nl;
        }
        first = false;
        out += pad;
        dump_into(out, v, indent, depth + 1);
      }
      out += nl;
      out += close;
      out += ']';
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::json& j, int indent) {
  std::string out;
  dump_into(out, j, indent, 0);
  return out;
}

void write_paths_csv(std::ostream& out, const PathBatch& b) {
  out << "# stochastica path batch\n"
      << "# n_paths=" << b.n_paths << " n_steps=" << b.grid.n_steps << " dimension=" << b.dimension
      << "\n# t0=" << format_double(b.grid.t0) << " dt=" << format_double(b.grid.dt)
      << "\n# seed=" << b.seed << " model_hash=" << hex(b.model_hash) << "\n"
      << "path_id,step,t,asset,value\n";
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    for (std::size_t m = 0; m <= b.grid.n_steps; ++m) {
      const std::string t = format_double(b.grid.time(m));
      for (Eigen::Index a = 0; a < b.dimension; ++a) {
        out << p << ',' << m << ',' << t << ',' << a << ',' << format_double(b.at(p, m, a)) << '\n';
      }
    }
  }
}

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'T', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 4);
}

void put_f64(std::ostream& out, double x) {
  std::uint64_t v;
  std::memcpy(&v, &x, sizeof v);
  put_u64(out, v);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 8)) throw ValidationError("path batch: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 4)) throw ValidationError("path batch: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t v = get_u64(in);
  double x;
  std::memcpy(&x, &v, sizeof x);
  return x;
}

}  // namespace

void write_paths_binary(std::ostream& out, const PathBatch& b) {
  out.write(kMagic.data(), 4);
  put_u32(out, kVersion);
  put_u64(out, b.n_paths);
  put_u64(out, b.grid.n_steps);
  put_u64(out, static_cast<std::uint64_t>(b.dimension));
  put_f64(out, b.grid.t0);
  put_f64(out, b.grid.dt);
  put_u64(out, b.seed);
  put_u64(out, b.model_hash);
  for (double v : b.values) put_f64(out, v);
}

PathBatch read_paths_binary(std::istream& in) {
  std::array<char, 4> magic;
  if (!in.read(magic.data(), 4) || magic != kMagic) throw ValidationError("path batch: bad magic");
  if (get_u32(in) != kVersion) throw ValidationError("path batch: unsupported version");
  PathBatch b;
  b.n_paths = get_u64(in);
  const std::uint64_t n_steps = get_u64(in);
  b.dimension = static_cast<Eigen::Index>(get_u64(in));
  const double t0 = get_f64(in);
  const double dt = get_f64(in);
  b.grid = TimeGrid(t0, dt, n_steps);
  b.seed = get_u64(in);
  b.model_hash = get_u64(in);
  const std::size_t count = b.n_paths * (n_steps + 1) * static_cast<std::size_t>(b.dimension);
  b.values.resize(count);
  for (double& v : b.values) v = get_f64(in);
  return b;
}

void write_density_csv(std::ostream& out, const DensityGrid& d, std::uint64_t model_hash,
                       const std::string& label) {
  out << "# stochastica density";
  if (!label.empty()) out << ' ' << label;
  out << "\n# t=" << format_double(d.t()) << " mass=" << format_double(d.mass())
      << " model_hash=" << hex(model_hash);
  if (d.regularization_width > 0.0)
    out << " regularization_width=" << format_double(d.regularization_width);
  out << "\nS,p\n";
  for (Eigen::Index i = 0; i < d.size(); ++i)
    out << format_double(d.s()(i)) << ',' << format_double(d.p()(i)) << '\n';
}

void write_green_csv(std::ostream& out, const GreensFunction& g, std::uint64_t model_hash) {
  out << "# stochastica green's function\n# t0=" << format_double(g.t0)
      << " S0=" << format_double(g.s0) << " model_hash=" << hex(model_hash)
      << " leaked_mass=" << format_double(g.leaked_mass) << "\nt,S,G\n";
  for (Eigen::Index k = 0; k < g.times.size(); ++k) {
    if (k > 0) out << '\n';
    const std::string t = format_double(g.times(k));
    for (Eigen::Index j = 0; j < g.s.size(); ++j)
      out << t << ',' << format_double(g.s(j)) << ',' << format_double(g.values(k, j)) << '\n';
  }
}

}  // namespace stochastica::io
