#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "surf/dataset.hpp"
#include "surf/pipeline.hpp"
#include "surf/rng.hpp"

using namespace surf;
using nlohmann::json;

namespace {

const char* kTmpDir = "/tmp/surf_app_tests";

std::string write_file(const std::string& name, const std::string& content) {
  std::filesystem::create_directories(kTmpDir);
  const std::string path = std::string(kTmpDir) + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string figure_table(int n_samples, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream out;
  out << "sample,otu1,otu2,otu3,otu4,otu5,otu6,status\n";
  for (int i = 0; i < n_samples; ++i) {
    out << "s" << i;
    for (int j = 0; j < 6; ++j)
      out << ',' << std::floor(20.0 * rng.uniform01());
    out << ',' << (rng.bernoulli(0.4) ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string figure_taxonomy() {
  return "otu_id\tlineage\n"
         "otu1\tK;P1;C1\n"
         "otu2\tK;P1;C1\n"
         "otu3\tK;P1;C1\n"
         "otu4\tK;P2;C2\n"
         "otu5\tK;P2;C2\n"
         "otu6\tK;P2;\n";
}

}  // namespace

TEST_CASE("load_dataset basics") {
  const std::string table = write_file(
      "tiny.csv", "id,otuA,otuB,status\ns1,1,2,0\ns2,3,4,1\ns3,5,6,1\n");
  LoadOptions options;
  options.response_name = "status";
  options.family = Family::binomial;
  const Dataset data = load_dataset(table, options);
  CHECK(data.n() == 3);
  CHECK(data.p() == 2);
  CHECK(data.column_names == std::vector<std::string>{"otuA", "otuB"});
  CHECK(data.y(0) == 0.0);
  CHECK(data.y(2) == 1.0);
  // Centered columns.
  CHECK(data.X.col(0).mean() == doctest::Approx(0.0));
  CHECK(data.X(0, 0) == doctest::Approx(1.0 - 3.0));
}

TEST_CASE("normalization to proportions happens before centering") {
  const std::string table = write_file(
      "norm.csv", "id,a,b,c,status\ns1,2,6,2,0\ns2,1,1,2,1\n");
  LoadOptions options;
  options.response_name = "status";
  options.normalize_proportions = true;
  const Dataset data = load_dataset(table, options);
  CHECK(data.normalized);
  // Proportions: row 1 = (0.2, 0.6, 0.2), row 2 = (0.25, 0.25, 0.5); the
  // loader then centers each column.
  CHECK(data.X(0, 0) == doctest::Approx(0.2 - 0.225));
  CHECK(data.X(0, 1) == doctest::Approx(0.6 - 0.425));
  CHECK(data.X(1, 2) == doctest::Approx(0.5 - 0.35));
}

TEST_CASE("load_dataset error paths") {
  LoadOptions options;
  options.response_name = "status";

  const std::string missing = write_file("missing.csv", "id,a,b\ns1,1,2\n");
  CHECK_THROWS_WITH_AS(load_dataset(missing, options),
                       doctest::Contains("status"), InputError);

  const std::string bad_cell =
      write_file("badcell.csv", "id,a,status\ns1,1,0\ns2,oops,1\n");
  CHECK_THROWS_WITH_AS(load_dataset(bad_cell, options),
                       doctest::Contains("row 3"), InputError);

  const std::string dup =
      write_file("dup.csv", "id,a,a,status\ns1,1,2,0\n");
  CHECK_THROWS_AS(load_dataset(dup, options), InputError);

  const std::string table = write_file("okay.csv",
                                       "id,otu1,status\ns1,1,0\ns2,2,1\n");
  LoadOptions bad_tax = options;
  bad_tax.taxonomy_path =
      write_file("tax_unknown.tsv", "otu_id\tlineage\notu9\tA;B\n");
  CHECK_THROWS_WITH_AS(load_dataset(table, bad_tax),
                       doctest::Contains("unknown OTU"), InputError);

  LoadOptions bad_pass = options;
  bad_pass.passthrough = {"nope"};
  CHECK_THROWS_AS(load_dataset(table, bad_pass), InputError);
}

TEST_CASE("taxonomy attaches and aggregate mode reproduces the worked tree") {
  const std::string table = write_file("fig.csv", figure_table(12, 7));
  const std::string tax = write_file("fig_tax.tsv", figure_taxonomy());
  LoadOptions options;
  options.response_name = "status";
  options.taxonomy_path = tax;
  const Dataset data = load_dataset(table, options);
  REQUIRE(data.taxonomy.has_value());
  CHECK(data.taxonomy->leaf_count() == 6);

  PipelineConfig config;
  const Report report = run_pipeline(data, Mode::aggregate, config);
  CHECK(report.body["augmentation"]["column_count"] == 10);
  // The phylum that duplicates its only class is among the dropped nodes.
  bool p1_dropped = false;
  for (const auto& d : report.body["augmentation"]["dropped"]) {
    if (d["node"] == "phylum:P1") {
      CHECK(d["duplicate_of"] == "class:C1");
      p1_dropped = true;
    }
  }
  CHECK(p1_dropped);

  const std::string csv = augmented_design_csv(data);
  CHECK(csv.find("class:C1") != std::string::npos);
  CHECK(csv.find("phylum:P1") == std::string::npos);
  // Header row: 10 columns.
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(std::count(header.begin(), header.end(), ',') == 9);
}

TEST_CASE("select pipeline on a constructed single-true-variable dataset") {
  Rng rng(17);
  std::ostringstream table;
  table << "id";
  const int p = 6, n = 60;
  for (int j = 0; j < p; ++j) table << ",x" << j;
  table << ",y\n";
  for (int i = 0; i < n; ++i) {
    table << "s" << i;
    double x3 = 0.0;
    for (int j = 0; j < p; ++j) {
      const double v = rng.normal();
      if (j == 3) x3 = v;
      table << ',' << v;
    }
    table << ',' << (3.0 * x3 + 0.5 * rng.normal()) << "\n";
  }
  const std::string path = write_file("signal.csv", table.str());

  LoadOptions options;
  options.response_name = "y";
  options.family = Family::gaussian;
  const Dataset data = load_dataset(path, options);

  PipelineConfig config;
  config.seed = 11;
  config.threads = 2;
  config.ranking.B = 25;
  config.forward.n_perm = 100;
  const Report report = run_pipeline(data, Mode::select, config);
  REQUIRE(report.body["steps"].size() == 1);
  CHECK(report.body["steps"][0]["variable"] == "x3");
  CHECK(report.body["steps"][0]["p_value"].get<double>() <= 0.05);
  CHECK(report.body["final_model"]["coefficients"].size() == 1);

  // rank mode emits the trace but no steps.
  const Report rank_report = run_pipeline(data, Mode::rank, config);
  CHECK(rank_report.body.contains("ranking"));
  CHECK_FALSE(rank_report.body.contains("steps"));
  CHECK(rank_report.body["ranking"]["trace"][0]["variable"] == "x3");
}

TEST_CASE("reports are deterministic and round-trip through JSON") {
  const std::string table = write_file("det.csv", figure_table(30, 23));
  const std::string tax = write_file("det_tax.tsv", figure_taxonomy());
  LoadOptions options;
  options.response_name = "status";
  options.taxonomy_path = tax;
  const Dataset data = load_dataset(table, options);

  PipelineConfig config;
  config.seed = 5;
  config.ranking.B = 10;
  config.forward.n_perm = 40;

  config.threads = 1;
  const Report a = run_pipeline(data, Mode::select, config);
  config.threads = 3;
  const Report b = run_pipeline(data, Mode::select, config);
  CHECK(a.body.dump() == b.body.dump());

  const std::string out_path = std::string(kTmpDir) + "/report.json";
  write_report(a, out_path, "json");
  std::ifstream in(out_path);
  const json parsed = json::parse(in);
  json body = parsed;
  body.erase("_meta");
  CHECK(body.dump() == a.body.dump());
  CHECK(parsed.contains("_meta"));

  // Text format mentions the outcome.
  const std::string text_path = std::string(kTmpDir) + "/report.txt";
  write_report(a, text_path, "text");
  std::ifstream tin(text_path);
  std::stringstream buffer;
  buffer << tin.rdbuf();
  CHECK(buffer.str().find("mode: select") != std::string::npos);
}

TEST_CASE("empty selection writes an empty steps array") {
  Rng rng(29);
  std::ostringstream table;
  table << "id,a,b,c,y\n";
  for (int i = 0; i < 40; ++i) {
    table << "s" << i << ',' << rng.normal() << ',' << rng.normal() << ','
          << rng.normal() << ',' << rng.normal() << "\n";
  }
  const std::string path = write_file("noise.csv", table.str());
  LoadOptions options;
  options.response_name = "y";
  options.family = Family::gaussian;
  const Dataset data = load_dataset(path, options);
  PipelineConfig config;
  config.seed = 3;  // a seed on which noise selects nothing
  config.ranking.B = 10;
  config.forward.n_perm = 60;
  const Report report = run_pipeline(data, Mode::select, config);
  CHECK(report.body["steps"].is_array());
  if (report.body["steps"].empty()) {
    CHECK(report.body.contains("terminal"));
  }
}

TEST_CASE("CLI end to end") {
  const std::string table = write_file("cli.csv", figure_table(40, 31));
  const std::string tax = write_file("cli_tax.tsv", figure_taxonomy());
  const std::string report1 = std::string(kTmpDir) + "/cli_report1.json";
  const std::string report2 = std::string(kTmpDir) + "/cli_report2.json";

  const std::string base = std::string(SURF_CLI_PATH) + " --table " + table +
                           " --response status --family binomial --taxonomy " +
                           tax + " --B 8 --perms 40 --seed 7 --mode select";
  SUBCASE("select runs, exits 0, and is byte-deterministic") {
    const int rc1 = std::system(
        (base + " --threads 1 --out " + report1 + " > /dev/null").c_str());
    const int rc2 = std::system(
        (base + " --threads 2 --out " + report2 + " > /dev/null").c_str());
    REQUIRE(rc1 == 0);
    REQUIRE(rc2 == 0);
    std::ifstream in1(report1), in2(report2);
    json j1 = json::parse(in1), j2 = json::parse(in2);
    j1.erase("_meta");
    j2.erase("_meta");
    CHECK(j1.dump() == j2.dump());
  }
  SUBCASE("input errors exit with code 2") {
    const std::string cmd = std::string(SURF_CLI_PATH) + " --table " + table +
                            " --response nope --mode select 2> /dev/null";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    const int rc2 = std::system((std::string(SURF_CLI_PATH) +
                                 " --mode bogus 2> /dev/null")
                                    .c_str());
    CHECK(WEXITSTATUS(rc2) == 2);
  }
  SUBCASE("numerical failures exit with code 3") {
    // One positive case: every CV fold draw fails, all subsamples skipped.
    Rng rng(37);
    std::ostringstream degenerate;
    degenerate << "id,a,b,status\n";
    for (int i = 0; i < 30; ++i) {
      degenerate << "s" << i << ',' << rng.normal() << ',' << rng.normal()
                 << ',' << (i == 0 ? 1 : 0) << "\n";
    }
    const std::string bad = write_file("degenerate.csv", degenerate.str());
    const std::string cmd = std::string(SURF_CLI_PATH) + " --table " + bad +
                            " --response status --family binomial "
                            "--mode rank --B 5 2> /dev/null > /dev/null";
    const int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 3);
  }
  SUBCASE("aggregate mode writes the design CSV") {
    const std::string design = std::string(kTmpDir) + "/design.csv";
    const std::string cmd = std::string(SURF_CLI_PATH) + " --table " + table +
                            " --response status --taxonomy " + tax +
                            " --mode aggregate --out " +
                            std::string(kTmpDir) + "/agg.json --out-design " +
                            design + " > /dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream in(design);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header.find("kingdom:K") != std::string::npos);
    CHECK(header.find("phylum:P1") == std::string::npos);
  }
  SUBCASE("simulate mode emits metrics") {
    const std::string scenario = write_file("scen.cfg",
                                            "name = tiny\n"
                                            "family = binomial\n"
                                            "n = 40\np = 10\nreps = 2\n"
                                            "seed = 3\nsnr = 3\n"
                                            "true_vars = 0:-1\n"
                                            "equivalence = 0~1\n"
                                            "B = 8\nperms = 30\n"
                                            "stability_B = 10\n");
    const std::string metrics = std::string(kTmpDir) + "/metrics.csv";
    const std::string summary = std::string(kTmpDir) + "/summary.json";
    const std::string cmd = std::string(SURF_CLI_PATH) +
                            " --mode simulate --scenario " + scenario +
                            " --methods surf,lasso --metrics-out " + metrics +
                            " --summary-out " + summary + " > /dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream in(metrics);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header.find("fp_mean") != std::string::npos);
    std::ifstream sin(summary);
    const json s = json::parse(sin);
    CHECK(s["methods"].contains("surf"));
    CHECK(s["methods"].contains("lasso"));
  }
}
