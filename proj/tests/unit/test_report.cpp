#include <doctest.h>

#include <regex>
#include <stack>

#include "soymat/error.hpp"
#include "soymat/report.hpp"
#include "support/scratch.hpp"

using namespace soymat;

namespace {

// Minimal well-formedness check: every element closes in order.
bool tags_balanced(const std::string& xml) {
  std::stack<std::string> open;
  const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(xml.begin(), xml.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3] == "/") continue;
    if (m[1] == "/") {
      if (open.empty() || open.top() != m[2]) return false;
      open.pop();
    } else {
      open.push(m[2]);
    }
  }
  return open.empty();
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(hash_hex(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("file hashes follow content") {
    const auto dir = testing::scratch_dir("report_hash");
    write_text_file(dir / "a.txt", "foobar");
    CHECK(read_text_file(dir / "a.txt") == "foobar");
    CHECK(hash_file(dir / "a.txt") == hash_hex(0x85944171f73967e8ULL));
    CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), DataError);
  }

  TEST_CASE("scatter plot has one circle per point") {
    std::vector<ScatterPoint> pts;
    for (int i = 0; i < 37; ++i) pts.push_back({10.0 + i % 20, 12.0 + (i * 7) % 19});
    const std::string svg = scatter_svg(pts, "env1 <weekly> & more");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count(svg, "<circle") == 37u);
    CHECK(count(svg, "<line") >= 1u);
    CHECK(tags_balanced(svg));
    CHECK(svg.find("<weekly>") == std::string::npos);  // title is escaped
    CHECK(tags_balanced(scatter_svg({}, "empty")));
  }

  TEST_CASE("manifest round trip") {
    RunManifest m;
    m.command = "run";
    m.seed = 18446744073709551557ULL;
    m.config_json = R"({"epochs":3,"schedules":["weekly"]})";
    m.inputs = {"data/boundaries.json"};
    m.outputs = {{"metrics.csv", "0123456789abcdef"}};
    const RunManifest back = RunManifest::from_json(m.to_json());
    CHECK(back.command == "run");
    CHECK(back.seed == m.seed);
    CHECK(back.inputs == m.inputs);
    CHECK(back.outputs == m.outputs);
    CHECK(RunManifest::from_json(back.to_json()).to_json() == m.to_json());
  }

  TEST_CASE("finish_manifest hashes and writes") {
    const auto dir = testing::scratch_dir("report_manifest");
    write_text_file(dir / "x.csv", "a,b\n");
    RunManifest m;
    m.command = "baseline";
    finish_manifest(m, dir, {"x.csv"});
    CHECK(m.outputs.at("x.csv") == hash_hex(fnv1a64("a,b\n")));
    const RunManifest back = RunManifest::from_json(read_text_file(dir / kManifestFile));
    CHECK(back.outputs == m.outputs);
  }
}
