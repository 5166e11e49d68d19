#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "stochastica/io.hpp"
#include "stochastica/models.hpp"

using namespace stochastica;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
  oracle::Uniform u(21);
  for (int i = 0; i < 10000; ++i) {
    const double x = std::ldexp(u(-1, 1), u.integer(-300, 300));
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(100.0), "100");
}

TEST(DumpJson, FullPrecisionAndNullForNonFinite) {
  nlohmann::json j = {{"b", 0.1}, {"a", {1, 2.5}}, {"c", std::nan("")}, {"s", "x"}};
  EXPECT_EQ(io::dump_json(j, 0), R"({"a":[1,2.5],"b":0.10000000000000001,"c":null,"s":"x"})");
  EXPECT_EQ(nlohmann::json::parse(io::dump_json(j)).at("b").get<double>(), 0.1);
}

TEST(PathBinary, RoundTrip) {
  const Vector s0 = Vector::Constant(2, 1.0);
  Vector mu(2), sigma(2);
  mu << 0.1, 0.0;
  sigma << 0.2, 0.3;
  const ModelSpec m = make_gbm(mu, sigma, CovarianceSpec(Matrix::Identity(2, 2)));
  const PathBatch b = simulate_paths(m, s0, TimeGrid::over(0.25, 1.25, 7), 5, 99);
  std::stringstream buf;
  io::write_paths_binary(buf, b);
  EXPECT_EQ(buf.str().size(), 4 + 4 + 8 * 3 + 8 * 2 + 8 * 2 + 8 * b.values.size());
  const PathBatch r = io::read_paths_binary(buf);
  EXPECT_EQ(r.n_paths, b.n_paths);
  EXPECT_EQ(r.dimension, 2);
  EXPECT_EQ(r.grid.n_steps, 7u);
  EXPECT_EQ(r.grid.t0, b.grid.t0);
  EXPECT_EQ(r.grid.dt, b.grid.dt);
  EXPECT_EQ(r.seed, 99u);
  EXPECT_EQ(r.model_hash, m.hash());
  EXPECT_EQ(r.values, b.values);
}

TEST(PathBinary, RejectsBadInput) {
  std::stringstream bad("XXXX0000");
  EXPECT_THROW(io::read_paths_binary(bad), ValidationError);
  const PathBatch b = simulate_paths(make_bm(0, 1), Vector::Constant(1, 0.0), TimeGrid::over(0, 1, 4), 3, 1);
  std::stringstream buf;
  io::write_paths_binary(buf, b);
  std::string text = buf.str();
  text.resize(text.size() - 3);
  std::stringstream cut(text);
  EXPECT_THROW(io::read_paths_binary(cut), ValidationError);
}

TEST(PathCsv, HeaderAndRows) {
  const PathBatch b = simulate_paths(make_bm(0, 1), Vector::Constant(1, 2.0), TimeGrid::over(0, 1, 4), 3, 1);
  std::ostringstream out;
  io::write_paths_csv(out, b);
  const auto ls = lines(out.str());
  std::size_t header = 0;
  while (ls[header].rfind('#', 0) == 0) ++header;
  EXPECT_EQ(ls[header], "path_id,step,t,asset,value");
  EXPECT_EQ(ls.size() - header - 1, 3u * 5u);
  EXPECT_EQ(ls[header + 1], "0,0,0,0,2");
  EXPECT_NE(out.str().find("seed=1"), std::string::npos);
}

TEST(DensityCsv, Layout) {
  Vector s(3), p(3);
  s << 0, 1, 2;
  p << 0, 1, 0;
  const DensityGrid d(s, p, 0.5);
  std::ostringstream out;
  io::write_density_csv(out, d, 0xABCDu, "fokker-planck");
  const auto ls = lines(out.str());
  EXPECT_EQ(ls[0], "# stochastica density fokker-planck");
  EXPECT_NE(ls[1].find("mass=1"), std::string::npos);
  EXPECT_NE(ls[1].find("model_hash=000000000000abcd"), std::string::npos);
  EXPECT_EQ(ls[2], "S,p");
  EXPECT_EQ(ls[4], "1,1");
}

TEST(GreenCsv, BlankLineBetweenTimes) {
  const GreensFunction g =
      greens_function(make_gbm(0.05, 0.2), DiscountCurve::flat(0.05), 0.0, 100.0, 0.5, 0.25);
  std::ostringstream out;
  io::write_green_csv(out, g, 1);
  const auto ls = lines(out.str());
  std::size_t blanks = 0, rows = 0;
  for (const auto& l : ls) {
    if (l.empty()) ++blanks;
    else if (l[0] != '#' && l != "t,S,G") ++rows;
  }
  EXPECT_EQ(blanks, static_cast<std::size_t>(g.times.size() - 1));
  EXPECT_EQ(rows, static_cast<std::size_t>(g.times.size() * g.s.size()));
}
