#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gppm/errors.hpp"
#include "gppm/io.hpp"
#include "gppm/model.hpp"
#include "gppm/rng.hpp"
#include "json.hpp"

using namespace gppm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gppm_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kCustomersToy =
    "customer_id,install_day,first_spend_day,channel\n"
    "c1,1,3,email\n"
    "c2,2,5,ads\n";

const char* kEventsToy =
    "customer_id,day,spend\n"
    "c1,3,1\n"
    "c1,7,1\n"
    "c2,5,1\n"
    "c1,9,0\n";

PosteriorDraws toy_draws(int chains, int iters, std::vector<std::string> names,
                         std::uint64_t seed) {
  PosteriorDraws d;
  d.names = std::move(names);
  d.seed = seed;
  Rng rng(seed);
  const int dim = static_cast<int>(d.names.size());
  for (int c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(iters, dim);
    for (int i = 0; i < iters; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = rng.normal();
    d.chains.push_back(std::move(m));
    ChainStats s;
    s.accept_rate = rng.uniform();
    s.divergences = c;
    s.step_size = 0.05 + 0.01 * c;
    s.inv_mass = Eigen::VectorXd::Constant(dim, 1.0 + c);
    d.stats.push_back(std::move(s));
  }
  return d;
}

DrawsMeta toy_meta() {
  DrawsMeta meta;
  meta.spec = ModelSpec::reduced();
  meta.dims.horizon = 12;
  meta.dims.n_recency = 7;
  meta.dims.n_lifetime = 9;
  meta.dims.n_customers = 4;
  meta.dims.channel_levels = {"ads", "email"};
  meta.dims.first_spend_days = {1, 3};
  meta.dims.install_days = {1, 2, 3};
  meta.seed = 99;
  return meta;
}

}  // namespace

TEST_CASE("panel loads from the two-customer toy fixture") {
  TempDir dir;
  write_file(dir.file("customers.csv"), kCustomersToy);
  write_file(dir.file("events.csv"), kEventsToy);

  int dups = -1;
  SpendPanel p = load_panel(dir.file("events.csv"), dir.file("customers.csv"), 0, &dups);
  CHECK(dups == 0);
  // the spend-0 row on day 9 marks an observed day, so it sets the horizon
  CHECK(p.horizon() == 9);
  REQUIRE(p.size() == 2);
  const auto& c1 = p.customers()[0];
  CHECK(c1.customer_id == "c1");
  CHECK(c1.install_day == 1);
  CHECK(c1.first_spend_day == 3);
  CHECK(c1.channel == "email");
  CHECK(c1.spend_days == std::vector<int>{3, 7});
  const auto& c2 = p.customers()[1];
  CHECK(c2.customer_id == "c2");
  CHECK(c2.spend_days == std::vector<int>{5});
  CHECK(p.channel_levels() == std::vector<std::string>{"ads", "email"});
  CHECK(p.channel_index(0) == 1);
  CHECK(p.channel_index(1) == 0);

  SUBCASE("explicit horizon wins over the last observed day") {
    SpendPanel wide = load_panel(dir.file("events.csv"), dir.file("customers.csv"), 20);
    CHECK(wide.horizon() == 20);
  }
}

TEST_CASE("panel save and reload reproduces every record") {
  TempDir dir;
  write_file(dir.file("customers.csv"), kCustomersToy);
  write_file(dir.file("events.csv"), kEventsToy);
  SpendPanel p = load_panel(dir.file("events.csv"), dir.file("customers.csv"));

  save_panel(p, dir.file("events2.csv"), dir.file("customers2.csv"));
  // the CSV pair stores events only, so the horizon rides along explicitly
  SpendPanel q = load_panel(dir.file("events2.csv"), dir.file("customers2.csv"), p.horizon());

  CHECK(q.horizon() == p.horizon());
  REQUIRE(q.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(q.customers()[i].customer_id == p.customers()[i].customer_id);
    CHECK(q.customers()[i].install_day == p.customers()[i].install_day);
    CHECK(q.customers()[i].first_spend_day == p.customers()[i].first_spend_day);
    CHECK(q.customers()[i].channel == p.customers()[i].channel);
    CHECK(q.customers()[i].spend_days == p.customers()[i].spend_days);
  }
  CHECK(q.channel_levels() == p.channel_levels());
}

TEST_CASE("duplicate spend rows collapse to one incidence and are counted") {
  TempDir dir;
  write_file(dir.file("customers.csv"), kCustomersToy);
  write_file(dir.file("events.csv"),
             "customer_id,day,spend\n"
             "c1,3,1\n"
             "c1,7,1\n"
             "c1,7,1\n"
             "c2,5,1\n"
             "c1,7,1\n");
  int dups = -1;
  SpendPanel p = load_panel(dir.file("events.csv"), dir.file("customers.csv"), 0, &dups);
  CHECK(dups == 2);
  CHECK(p.customers()[0].spend_days == std::vector<int>{3, 7});
}

TEST_CASE("malformed panel files fail with the offending line") {
  TempDir dir;
  write_file(dir.file("customers.csv"), kCustomersToy);

  auto events = [&](const std::string& body) {
    write_file(dir.file("events.csv"), "customer_id,day,spend\n" + body);
    return dir.file("events.csv");
  };
  auto expect_message = [&](const std::string& body, const std::string& fragment) {
    CHECK_THROWS_WITH_AS(load_panel(events(body), dir.file("customers.csv")),
                         doctest::Contains(fragment.c_str()), ValidationError);
  };

  // row text is on line 2 of the file (after the header)
  expect_message("ghost,3,1\n", "events.csv:2: unknown customer_id 'ghost'");
  expect_message("c1,three,1\n", "events.csv:2: day must be an integer, got 'three'");
  expect_message("c1,0,1\n", "day must be >= 1");
  expect_message("c1,3,2\n", "spend must be 0 or 1");
  expect_message("c1,3\n", "expected 3 fields, got 2");
  expect_message("", "no spend events");
  expect_message("c1,3,0\n", "no spend events");

  SUBCASE("first_spend_day with no matching spend event") {
    // c2 claims day 5 but only spends on day 6
    write_file(dir.file("events.csv"),
               "customer_id,day,spend\nc1,3,1\nc2,6,1\n");
    CHECK_THROWS_WITH_AS(
        load_panel(dir.file("events.csv"), dir.file("customers.csv")),
        doctest::Contains("customers.csv:3: first_spend_day 5 has no matching spend event"),
        ValidationError);
  }
  SUBCASE("bad headers and unreadable paths") {
    write_file(dir.file("bad.csv"), "customer,day,spend\nc1,3,1\n");
    CHECK_THROWS_WITH_AS(load_panel(dir.file("bad.csv"), dir.file("customers.csv")),
                         doctest::Contains("expected header 'customer_id,day,spend'"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(load_panel(dir.file("missing.csv"), dir.file("customers.csv")),
                         doctest::Contains("cannot open"), ValidationError);
  }
  SUBCASE("customer file problems") {
    write_file(dir.file("events.csv"), "customer_id,day,spend\nc1,3,1\nc2,5,1\n");
    write_file(dir.file("c_dup.csv"),
               "customer_id,install_day,first_spend_day,channel\n"
               "c1,1,3,email\nc2,2,5,ads\nc1,1,3,email\n");
    CHECK_THROWS_WITH_AS(load_panel(dir.file("events.csv"), dir.file("c_dup.csv")),
                         doctest::Contains("c_dup.csv:4: duplicate customer_id 'c1'"),
                         ValidationError);
    write_file(dir.file("c_short.csv"),
               "customer_id,install_day,first_spend_day,channel\nc1,1,3\n");
    CHECK_THROWS_WITH_AS(load_panel(dir.file("events.csv"), dir.file("c_short.csv")),
                         doctest::Contains("expected 4 fields"), ValidationError);
    write_file(dir.file("c_int.csv"),
               "customer_id,install_day,first_spend_day,channel\nc1,one,3,email\n");
    CHECK_THROWS_WITH_AS(load_panel(dir.file("events.csv"), dir.file("c_int.csv")),
                         doctest::Contains("install_day must be an integer"), ValidationError);
  }
}

TEST_CASE("draws round trip is bit exact") {
  TempDir dir;
  const ModelDims dims = toy_meta().dims;
  const GppmLayout layout = build_layout(ModelSpec::reduced(), dims);
  PosteriorDraws d = toy_draws(3, 17, layout.names, 42);
  const std::string path = dir.file("draws.bin");
  save_draws(d, toy_meta(), path);

  LoadedDraws back = load_draws(path);
  REQUIRE(back.draws.chains.size() == 3);
  CHECK(back.draws.names == d.names);
  CHECK(back.draws.seed == d.seed);
  for (int c = 0; c < 3; ++c) {
    REQUIRE(back.draws.chains[c].rows() == 17);
    REQUIRE(back.draws.chains[c].cols() == layout.dim);
    CHECK((back.draws.chains[c].array() == d.chains[c].array()).all());
    CHECK(back.draws.stats[c].accept_rate == d.stats[c].accept_rate);
    CHECK(back.draws.stats[c].divergences == d.stats[c].divergences);
    CHECK(back.draws.stats[c].step_size == d.stats[c].step_size);
    CHECK((back.draws.stats[c].inv_mass.array() == d.stats[c].inv_mass.array()).all());
  }
  const DrawsMeta meta = toy_meta();
  CHECK(back.meta.seed == meta.seed);
  CHECK(back.meta.spec.long_run == meta.spec.long_run);
  CHECK(back.meta.spec.cyclic == meta.spec.cyclic);
  CHECK(back.meta.spec.recency == meta.spec.recency);
  CHECK(back.meta.spec.purchase_number_cap == meta.spec.purchase_number_cap);
  CHECK(back.meta.spec.cyclic_period == meta.spec.cyclic_period);
  CHECK(back.meta.dims.horizon == meta.dims.horizon);
  CHECK(back.meta.dims.n_recency == meta.dims.n_recency);
  CHECK(back.meta.dims.n_lifetime == meta.dims.n_lifetime);
  CHECK(back.meta.dims.n_customers == meta.dims.n_customers);
  CHECK(back.meta.dims.channel_levels == meta.dims.channel_levels);
  CHECK(back.meta.dims.first_spend_days == meta.dims.first_spend_days);
  CHECK(back.meta.dims.install_days == meta.dims.install_days);

  SUBCASE("saving twice produces identical bytes") {
    save_draws(d, toy_meta(), dir.file("draws2.bin"));
    CHECK(read_file(path) == read_file(dir.file("draws2.bin")));
  }
}

TEST_CASE("draws header names every parameter exactly once") {
  TempDir dir;
  const GppmLayout layout = build_layout(ModelSpec::full(), toy_meta().dims);
  PosteriorDraws d = toy_draws(2, 3, layout.names, 7);
  DrawsMeta meta = toy_meta();
  meta.spec = ModelSpec::full();
  save_draws(d, meta, dir.file("draws.bin"));

  // pull the JSON header straight out of the bytes
  const std::string buf = read_file(dir.file("draws.bin"));
  REQUIRE(buf.size() > 20);
  CHECK(buf.substr(0, 8) == "GPPMDRWS");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, buf.data() + 12, 8);
  const auto header = nlohmann::json::parse(buf.substr(20, header_len));

  CHECK(header.at("format") == "gppm-draws");
  CHECK(header.at("dim").get<int>() == layout.dim);
  CHECK(header.at("chains").get<int>() == 2);
  CHECK(header.at("iterations").get<int>() == 3);
  const auto names = header.at("names").get<std::vector<std::string>>();
  REQUIRE(static_cast<int>(names.size()) == layout.dim);
  std::set<std::string> uniq(names.begin(), names.end());
  CHECK(uniq.size() == names.size());
  CHECK(header.at("model").contains("spec"));
  CHECK(header.at("model").contains("dims"));

  SUBCASE("duplicated names are rejected on load") {
    PosteriorDraws bad = d;
    bad.names[1] = bad.names[0];
    save_draws(bad, meta, dir.file("dup.bin"));
    CHECK_THROWS_WITH_AS(load_draws(dir.file("dup.bin")),
                         doctest::Contains("repeats a parameter name"), ValidationError);
  }
}

TEST_CASE("damaged draws files fail loudly") {
  TempDir dir;
  PosteriorDraws d = toy_draws(2, 5, {"a", "b", "c"}, 11);
  DrawsMeta meta = toy_meta();
  const std::string path = dir.file("draws.bin");
  save_draws(d, meta, path);
  const std::string good = read_file(path);

  SUBCASE("version bump is fatal before anything else is trusted") {
    std::string bumped = good;
    bumped[8] = 2;  // version word sits right after the 8-byte magic
    write_file(dir.file("v2.bin"), bumped);
    CHECK_THROWS_WITH_AS(load_draws(dir.file("v2.bin")),
                         doctest::Contains("unsupported draws file version 2"),
                         ValidationError);
  }
  SUBCASE("truncation is a checksum error") {
    write_file(dir.file("cut.bin"), good.substr(0, good.size() - 41));
    CHECK_THROWS_WITH_AS(load_draws(dir.file("cut.bin")), doctest::Contains("checksum"),
                         ValidationError);
  }
  SUBCASE("a flipped payload byte is a checksum error") {
    std::string flipped = good;
    flipped[good.size() - 100] ^= 0x40;
    write_file(dir.file("flip.bin"), flipped);
    CHECK_THROWS_WITH_AS(load_draws(dir.file("flip.bin")), doctest::Contains("checksum"),
                         ValidationError);
  }
  SUBCASE("wrong magic") {
    write_file(dir.file("junk.bin"), std::string(64, 'x'));
    CHECK_THROWS_WITH_AS(load_draws(dir.file("junk.bin")), doctest::Contains("bad magic"),
                         ValidationError);
  }
  SUBCASE("too short") {
    write_file(dir.file("tiny.bin"), "GPPM");
    CHECK_THROWS_WITH_AS(load_draws(dir.file("tiny.bin")), doctest::Contains("too short"),
                         ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_draws(dir.file("nope.bin")), doctest::Contains("cannot open"),
                         ValidationError);
  }
}

TEST_CASE("save_draws validates its inputs") {
  TempDir dir;
  DrawsMeta meta = toy_meta();
  PosteriorDraws empty;
  CHECK_THROWS_AS(save_draws(empty, meta, dir.file("x.bin")), ValidationError);

  PosteriorDraws d = toy_draws(2, 5, {"a", "b", "c"}, 1);
  d.names.pop_back();
  CHECK_THROWS_WITH_AS(save_draws(d, meta, dir.file("x.bin")),
                       doctest::Contains("names do not match"), ValidationError);

  PosteriorDraws ragged = toy_draws(2, 5, {"a", "b", "c"}, 1);
  ragged.chains[1] = Eigen::MatrixXd::Zero(4, 3);
  CHECK_THROWS_WITH_AS(save_draws(ragged, meta, dir.file("x.bin")),
                       doctest::Contains("chains differ in shape"), ValidationError);
}

TEST_CASE("fnv1a64 matches its published test vectors") {
  // reference values for the 64-bit FNV-1a of short ASCII strings
  CHECK(fnv1a64("", 0) == 14695981039346656037ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ULL);
}
