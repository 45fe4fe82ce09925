#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "cwqed/io.hpp"

using namespace cwqed;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("cwqed-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

io::RunConfig small_config(const TempDir& d) {
  io::RunConfig c;
  c.set("beta", "0.05");
  c.set("order", "tree");
  c.set("cache_dir", (d.path() / "cache").string());
  c.set("output", (d.path() / "out" / "run").string());
  return c;
}

}  // namespace

TEST(RunConfig, DefaultsAndTypes) {
  io::RunConfig c;
  EXPECT_DOUBLE_EQ(c.real("beta"), 0.05);
  EXPECT_EQ(c.integer("points"), 61);
  EXPECT_EQ(c.text("order"), "tree+loop");
  EXPECT_FALSE(c.has("atoms"));
  EXPECT_THROW(c.text("atoms"), io::config_error);
  c.set("atoms", "7");
  EXPECT_EQ(c.integer("atoms"), 7);
  EXPECT_THROW(c.set("atoms", "7.5"), io::config_error);
  EXPECT_THROW(c.set("beta", "abc"), io::config_error);
  EXPECT_THROW(c.set("beta", "0.1x"), io::config_error);
  EXPECT_THROW(c.set("beta", "inf"), io::config_error);
  EXPECT_THROW(c.set("beta", ""), io::config_error);
  EXPECT_THROW(c.set("bogus", "1"), io::config_error);
  EXPECT_THROW(c.set("order", ""), io::config_error);
}

TEST(RunConfig, PhysicsExcludesPlumbingKeys) {
  io::RunConfig a, b;
  a.set("output", "x");
  b.set("output", "y");
  b.set("cache_dir", "/tmp/elsewhere");
  b.set("tol_g3c", "0.5");
  EXPECT_EQ(a.physics(), b.physics());
  EXPECT_EQ(io::Cache::key("grid", a.physics()), io::Cache::key("grid", b.physics()));
  b.set("beta", "0.06");
  EXPECT_NE(io::Cache::key("grid", a.physics()), io::Cache::key("grid", b.physics()));
  EXPECT_NE(io::Cache::key("grid", a.physics()), io::Cache::key("scan", a.physics()));
  EXPECT_FALSE(a.physics().contains("output"));
}

TEST(ParseConfig, CommentsWhitespaceAndErrors) {
  std::istringstream in("# comment\n beta = 0.3  \n\natoms=4 # trailing\norder = tree\n");
  io::RunConfig c;
  io::parse_config(in, c);
  EXPECT_DOUBLE_EQ(c.real("beta"), 0.3);
  EXPECT_EQ(c.integer("atoms"), 4);
  EXPECT_EQ(c.text("order"), "tree");

  std::istringstream bad("beta = 0.3\nnonsense line\n");
  io::RunConfig c2;
  try {
    io::parse_config(bad, c2);
    FAIL() << "expected config_error";
  } catch (const io::config_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::load_config("/nonexistent/cwqed.cfg"), io::config_error);
}

TEST(Format, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(io::format_double(x)), x);
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cache, RoundTripIsBitExact) {
  TempDir d;
  io::Cache cache(d.path());
  const std::vector<double> v = {0.0, -0.0, 1.0 / 3.0, 5e-324, -1.7976931348623157e308, 42.0};
  cache.store("k1", {{"note", "x"}}, v);
  const auto e = cache.load("k1");
  ASSERT_TRUE(e.has_value());
  ASSERT_EQ(e->payload.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(e->payload[i]), std::bit_cast<std::uint64_t>(v[i]));
  EXPECT_EQ(e->meta["note"], "x");
  EXPECT_FALSE(cache.load("missing").has_value());
}

TEST(Cache, CorruptEntriesAreRejectedAndRemoved) {
  TempDir d;
  io::Cache cache(d.path());
  cache.store("flip", {}, {1.0, 2.0, 3.0});
  {
    auto bytes = slurp(cache.path("flip"));
    bytes[bytes.size() - 3] ^= 0x40;
    std::ofstream(cache.path("flip"), std::ios::binary | std::ios::trunc) << bytes;
  }
  std::string diag;
  EXPECT_FALSE(cache.load("flip", &diag).has_value());
  EXPECT_NE(diag.find("checksum"), std::string::npos);
  EXPECT_FALSE(fs::exists(cache.path("flip")));

  cache.store("trunc", {}, {1.0, 2.0});
  {
    auto bytes = slurp(cache.path("trunc"));
    bytes.resize(bytes.size() - 4);
    std::ofstream(cache.path("trunc"), std::ios::binary | std::ios::trunc) << bytes;
  }
  EXPECT_THROW(io::Cache::read_file(cache.path("trunc")), io::cache_corrupt);

  std::ofstream(cache.path("old"), std::ios::binary) << "CWQEDCACHE 0\n{}\n";
  diag.clear();
  EXPECT_FALSE(cache.load("old", &diag).has_value());
  EXPECT_NE(diag.find("version"), std::string::npos);
}

TEST(Cache, GarbageCollection) {
  TempDir d;
  io::Cache cache(d.path());
  cache.store("good", {}, {1.0});
  cache.store("bad", {}, {1.0});
  std::ofstream(cache.path("bad"), std::ios::binary | std::ios::trunc) << "junk";
  std::ofstream(d.path() / "left.tmp") << "partial";
  std::ofstream(d.path() / "README") << "not ours";
  const auto r = cache.collect();
  EXPECT_EQ(r.removed, 2);
  EXPECT_EQ(r.kept, 1);
  EXPECT_TRUE(fs::exists(cache.path("good")));
  EXPECT_TRUE(fs::exists(d.path() / "README"));
  const auto all = cache.collect(true);
  EXPECT_EQ(all.removed, 1);
  EXPECT_FALSE(fs::exists(cache.path("good")));
}

TEST(Csv, DeterministicAndExact) {
  const std::vector<std::vector<double>> rows = {{0.1, -2.0 / 3.0}, {1e-17, 123456.789}};
  std::ostringstream a, b;
  io::write_csv(a, {{"beta", "0.05"}}, {"x", "y"}, rows);
  io::write_csv(b, {{"beta", "0.05"}}, {"x", "y"}, rows);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  const auto t = io::read_csv(in);
  EXPECT_EQ(t.meta.at("beta"), "0.05");
  ASSERT_EQ(t.header.size(), 2u);
  ASSERT_EQ(t.rows.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(t.rows[i][j], rows[i][j]);
  std::ostringstream c;
  EXPECT_THROW(io::write_csv(c, {}, {"x"}, rows), precondition_violation);
}

TEST(Commands, ParameterResolution) {
  io::RunConfig c;
  EXPECT_THROW(cli::resolve_params(c), io::config_error);
  c.set("od", "4");
  EXPECT_EQ(cli::resolve_params(c).num_atoms, 20);
  c.set("atoms", "3");
  EXPECT_THROW(cli::resolve_params(c), io::config_error);
  io::RunConfig r;
  r.set("atoms_min", "5");
  r.set("atoms_max", "4");
  EXPECT_THROW(cli::resolve_atom_range(r), io::config_error);
  r.set("atoms_max", "7");
  EXPECT_EQ(cli::resolve_atom_range(r), (std::vector<int>{5, 6, 7}));
  io::RunConfig o;
  o.set("order", "loop");
  EXPECT_THROW(cli::resolve_order(o), io::config_error);
  io::RunConfig b;
  b.set("beta", "1.5");
  b.set("atoms", "2");
  EXPECT_THROW(cli::resolve_params(b), io::config_error);
}

TEST(Commands, GridWritesFilesAndHitsCache) {
  TempDir d;
  auto c = small_config(d);
  c.set("atoms", "2");
  c.set("points", "5");
  c.set("extent", "1");
  std::ostringstream log;
  const auto first = cli::cmd_grid(c, log);
  EXPECT_EQ(first.exit_code, 0);
  EXPECT_FALSE(first.cache_hit);
  ASSERT_EQ(first.files.size(), 2u);
  const auto csv1 = slurp(first.files[0]);
  const auto second = cli::cmd_grid(c, log);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(slurp(second.files[0]), csv1);
  std::istringstream in(csv1);
  const auto t = io::read_csv(in);
  EXPECT_EQ(t.rows.size(), 25u);
  EXPECT_EQ(t.header.back(), "g3c");
  EXPECT_EQ(t.meta.at("atoms"), "2");
  // Changing only the output path reuses the cached values.
  c.set("output", (d.path() / "other").string());
  EXPECT_TRUE(cli::cmd_grid(c, log).cache_hit);
  c.set("observable", "count_rate");
  EXPECT_THROW(cli::cmd_grid(c, log), io::config_error);
}

TEST(Commands, CorruptCacheIsRecomputed) {
  TempDir d;
  auto c = small_config(d);
  c.set("atoms", "1");
  c.set("points", "3");
  std::ostringstream log;
  const auto first = cli::cmd_grid(c, log);
  const auto csv1 = slurp(first.files[0]);
  for (const auto& e : fs::directory_iterator(d.path() / "cache")) std::ofstream(e.path(), std::ios::trunc) << "bad";
  std::ostringstream log2;
  const auto second = cli::cmd_grid(c, log2);
  EXPECT_FALSE(second.cache_hit);
  EXPECT_NE(log2.str().find("rejected"), std::string::npos);
  EXPECT_EQ(slurp(second.files[0]), csv1);
}

TEST(Commands, ScanAndCountRate) {
  TempDir d;
  auto c = small_config(d);
  c.set("atoms_min", "1");
  c.set("atoms_max", "3");
  c.set("observable", "count_rate");
  std::ostringstream log;
  const auto r = cli::cmd_scan(c, log);
  const auto text = slurp(r.files.at(0));
  std::istringstream lines(text);
  std::string line;
  int n = 0;
  nlohmann::json last;
  while (std::getline(lines, line)) {
    last = nlohmann::json::parse(line);
    ++n;
  }
  EXPECT_EQ(n, 4);
  EXPECT_TRUE(last.contains("first_g3c_above_0.1"));
  auto rc = small_config(d);
  rc.set("atoms", "2");
  const auto cr = cli::cmd_countrate(rc, log);
  const auto j = nlohmann::json::parse(slurp(cr.files.at(0)));
  EXPECT_GT(j["S_tilde"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["S"].get<double>(), std::pow(0.02, 3) * j["S_tilde"].get<double>());
  c.set("atoms_max", "0");
  EXPECT_THROW(cli::cmd_scan(c, log), io::config_error);
}

TEST(Commands, VerifyThresholdsAndExitCodes) {
  io::RunConfig c;
  EXPECT_DOUBLE_EQ(cli::verify_thresholds(c, 0.02).cumulant, 0.012);
  EXPECT_DOUBLE_EQ(cli::verify_thresholds(c, 0.06).g3c, 0.062);
  EXPECT_THROW(cli::verify_thresholds(c, 0.03), io::config_error);

  TempDir d;
  auto v = small_config(d);
  v.set("atoms", "1");
  v.set("time_points", "6");
  v.set("time_max", "2");
  v.set("n_max", "1");
  v.set("tol_cumulant", "0.5");
  v.set("tol_g3c", "0.5");
  std::ostringstream log;
  const auto ok = cli::cmd_verify(v, log);
  EXPECT_EQ(ok.exit_code, 0);
  ASSERT_EQ(ok.files.size(), 2u);
  const auto rep = nlohmann::json::parse(slurp(ok.files[1]));
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_LT(rep["g3c_error"].get<double>(), 0.5);
  v.set("tol_g3c", "1e-9");
  EXPECT_EQ(cli::cmd_verify(v, log).exit_code, 1);
}

TEST(Commands, CacheGc) {
  TempDir d;
  auto c = small_config(d);
  c.set("atoms", "1");
  c.set("points", "3");
  std::ostringstream log;
  cli::cmd_grid(c, log);
  cli::cmd_cache_gc(c, false, log);
  EXPECT_NE(log.str().find("kept 1"), std::string::npos);
  cli::cmd_cache_gc(c, true, log);
  EXPECT_NE(log.str().find("removed 1"), std::string::npos);
}
