#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "gppm/errors.hpp"
#include "gppm/svg.hpp"

using namespace gppm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gppm_svg_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "cannot open ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_substr(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

CurveSummary curve(int lo, int hi, const std::function<double(double)>& med,
                   const std::function<double(double)>& half_width) {
  CurveSummary c;
  c.active = true;
  const int n = hi - lo + 1;
  c.inputs.resize(n);
  c.median.resize(n);
  c.lower.resize(n);
  c.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = lo + i;
    c.inputs[i] = x;
    c.median[i] = med(x);
    c.lower[i] = med(x) - half_width(x);
    c.upper[i] = med(x) + half_width(x);
  }
  return c;
}

// Hand-built six-panel spec: smooth curves with known shapes, no sampling
// anywhere, so the rendered bytes are a stable fixture.
DashboardSpec fixture_spec() {
  DashboardSpec spec;
  spec.title = "Fixture dashboard";
  const double pi = 3.14159265358979323846;
  spec.curves.long_run =
      curve(1, 60, [&](double t) { return -2.0 + 0.5 * std::sin(2 * pi * t / 60.0); },
            [](double t) { return 0.2 + 0.002 * t; });
  spec.curves.short_run =
      curve(1, 60, [](double t) { return 0.8 * std::exp(-(t - 30) * (t - 30) / 50.0); },
            [](double) { return 0.15; });
  spec.curves.cyclic =
      curve(1, 7, [&](double k) { return 0.4 * std::sin(2 * pi * (k - 1) / 7.0); },
            [](double) { return 0.1; });
  spec.curves.recency =
      curve(1, 59, [](double r) { return -0.5 * (std::sqrt(r) - 1.0); },
            [](double r) { return 0.1 + 0.003 * r; });
  spec.curves.lifetime =
      curve(1, 59, [](double l) { return -0.3 * (std::pow(l, 0.4) - 1.0); },
            [](double) { return 0.12; });
  spec.curves.purchase_number =
      curve(1, 10, [](double k) { return 0.6 * (1.0 - std::exp(-0.4 * (k - 1))); },
            [](double) { return 0.2; });
  spec.windows = {{10, 14, "promo"}, {40, 41, "outage"}};
  return spec;
}

const std::vector<std::string> kPanelFiles = {
    "long_run.svg", "short_run.svg", "cyclic.svg",
    "recency.svg",  "lifetime.svg",  "purchase_number.svg"};

}  // namespace

TEST_CASE("dashboard matches the reviewed golden bytes") {
  const fs::path golden = fs::path(GPPM_TEST_DIR) / "golden" / "dashboard";
  TempDir tmp;
  const auto written = render_dashboard(fixture_spec(), tmp.dir("out"));
  REQUIRE(written.size() == 7);

  if (std::getenv("GPPM_REGEN_GOLDEN")) {
    fs::create_directories(golden);
    for (const auto& p : written) fs::copy(p, golden / fs::path(p).filename(),
                                           fs::copy_options::overwrite_existing);
    FAIL("golden files regenerated; review them and rerun without GPPM_REGEN_GOLDEN");
  }

  for (const auto& p : written) {
    const fs::path ref = golden / fs::path(p).filename();
    REQUIRE_MESSAGE(fs::exists(ref), "missing golden file ", ref.string());
    CHECK_MESSAGE(read_file(p) == read_file(ref.string()),
                  "rendered bytes differ from golden for ", ref.filename().string());
  }
}

TEST_CASE("rendering the same spec twice gives identical bytes") {
  TempDir tmp;
  const auto a = render_dashboard(fixture_spec(), tmp.dir("a"));
  const auto b = render_dashboard(fixture_spec(), tmp.dir("b"));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(read_file(a[i]) == read_file(b[i]));
}

TEST_CASE("event windows shade the calendar panels and only those") {
  TempDir tmp;
  render_dashboard(fixture_spec(), tmp.dir("with"));
  CHECK(count_substr(read_file(tmp.dir("with") + "/long_run.svg"), "event-window") == 2);
  CHECK(count_substr(read_file(tmp.dir("with") + "/short_run.svg"), "event-window") == 2);
  CHECK(count_substr(read_file(tmp.dir("with") + "/long_run.svg"), ">promo<") == 1);
  for (const auto& name : {"cyclic.svg", "recency.svg", "lifetime.svg",
                           "purchase_number.svg"})
    CHECK(count_substr(read_file(tmp.dir("with") + "/" + name), "event-window") == 0);

  DashboardSpec bare = fixture_spec();
  bare.windows.clear();
  render_dashboard(bare, tmp.dir("without"));
  for (const auto& name : kPanelFiles)
    CHECK(count_substr(read_file(tmp.dir("without") + "/" + name), "event-window") == 0);
}

TEST_CASE("band must enclose the median pointwise") {
  DashboardSpec spec = fixture_spec();
  spec.curves.recency.upper[5] = spec.curves.recency.median[5] - 0.01;
  TempDir tmp;
  CHECK_THROWS_WITH_AS(render_dashboard(spec, tmp.dir("bad")),
                       doctest::Contains("band does not enclose the median in panel "
                                         "'recency'"),
                       ValidationError);
}

TEST_CASE("inactive components render as placeholders") {
  DashboardSpec spec = fixture_spec();
  spec.curves.cyclic = CurveSummary{};
  TempDir tmp;
  const auto written = render_dashboard(spec, tmp.dir("out"));
  REQUIRE(written.size() == 7);
  const std::string svg = read_file(tmp.dir("out") + "/cyclic.svg");
  CHECK(count_substr(svg, "component not estimated") == 1);
  CHECK(count_substr(svg, "polyline") == 0);
}

TEST_CASE("window bounds are validated") {
  DashboardSpec spec = fixture_spec();
  TempDir tmp;
  spec.windows = {{0, 4, "bad"}};
  CHECK_THROWS_AS(render_dashboard(spec, tmp.dir("w0")), ValidationError);
  spec.windows = {{9, 4, "bad"}};
  CHECK_THROWS_AS(render_dashboard(spec, tmp.dir("w1")), ValidationError);
}

TEST_CASE("svg files are structurally sound") {
  TempDir tmp;
  render_dashboard(fixture_spec(), tmp.dir("out"));
  for (const auto& name : kPanelFiles) {
    const std::string svg = read_file(tmp.dir("out") + "/" + name);
    CHECK(svg.rfind("<svg ", 0) == 0);
    CHECK(count_substr(svg, "<svg ") == 1);
    CHECK(count_substr(svg, "</svg>") == 1);
    CHECK(count_substr(svg, "<text") == count_substr(svg, "</text>"));
    CHECK(count_substr(svg, "class=\"band\"") == 1);
    CHECK(count_substr(svg, "class=\"median\"") == 1);
    CHECK(count_substr(svg, "NaN") == 0);
    CHECK(count_substr(svg, "nan") == 0);
    CHECK(count_substr(svg, "inf") == 0);
  }
  const std::string html = read_file(tmp.dir("out") + "/dashboard.html");
  CHECK(count_substr(html, "<svg ") == 6);
  CHECK(html.rfind("<!DOCTYPE html>", 0) == 0);
}
