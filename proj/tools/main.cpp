#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "ctxnorm/context.hpp"
#include "ctxnorm/data.hpp"
#include "ctxnorm/error.hpp"
#include "ctxnorm/experiment.hpp"
#include "ctxnorm/serialize.hpp"

namespace {

int run_gen_data(const std::string& spec_path, const std::string& out_path) {
  const ctxnorm::DataSpec spec =
      ctxnorm::data_spec_from_json(ctxnorm::read_text_file(spec_path));
  const ctxnorm::Dataset ds = ctxnorm::realize_dataset(spec);
  ctxnorm::save_dataset(ds, out_path);
  std::printf("wrote %s: %d samples, dim %d, %d classes%s\n", out_path.c_str(), ds.n(),
              ds.dim(), ds.classes, ds.has_contexts() ? ", with context labels" : "");
  return 0;
}

int run_cluster(const std::string& data_path, int k, std::uint64_t seed,
                const std::string& out_path) {
  const ctxnorm::Dataset ds = ctxnorm::load_dataset(data_path);
  const ctxnorm::KMeansModel model = ctxnorm::kmeans_fit(ds.features, k, 100, 1e-6, seed);
  ctxnorm::write_text_file(out_path, ctxnorm::kmeans_to_json(model));
  std::printf("wrote %s: k=%d, inertia %.6g after %d iterations\n", out_path.c_str(),
              model.k(), model.inertia, model.iterations_run);
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  const ctxnorm::ExperimentConfig cfg =
      ctxnorm::config_from_json(ctxnorm::read_text_file(config_path));
  const ctxnorm::MetricsReport report = ctxnorm::run_experiment(cfg, out_dir);
  std::cout << ctxnorm::compare_table(report).text;
  std::printf("report written to %s\n", out_dir.c_str());
  return 0;
}

int run_compare(const std::string& report_dir) {
  const ctxnorm::MetricsReport report = ctxnorm::report_from_dir(report_dir);
  const ctxnorm::CompareTable table = ctxnorm::compare_table(report);
  std::cout << table.text;
  ctxnorm::write_text_file(report_dir + "/summary.csv", table.summary_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normalization-layer experiment harness"};
  app.require_subcommand(1);

  std::string spec_path, gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset from a JSON spec");
  gen->add_option("--spec", spec_path, "JSON spec file")->required();
  gen->add_option("--out", gen_out, "output dataset path")->required();

  std::string data_path, cluster_out;
  int k = 0;
  std::uint64_t cluster_seed = 0;
  CLI::App* cluster = app.add_subcommand("cluster", "fit k-means contexts on a dataset");
  cluster->add_option("--data", data_path, "dataset path")->required();
  cluster->add_option("--k", k, "cluster count")->required()->check(CLI::PositiveNumber);
  cluster->add_option("--seed", cluster_seed, "rng seed")->required();
  cluster->add_option("--out", cluster_out, "output model path")->required();

  std::string config_path, train_out;
  CLI::App* train = app.add_subcommand("train", "train every configured method");
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--out", train_out, "report output directory")->required();

  std::string report_dir;
  CLI::App* compare = app.add_subcommand("compare", "summarize a report directory");
  compare->add_option("--report", report_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen_data(spec_path, gen_out);
    if (cluster->parsed()) return run_cluster(data_path, k, cluster_seed, cluster_out);
    if (train->parsed()) return run_train(config_path, train_out);
    if (compare->parsed()) return run_compare(report_dir);
  } catch (const ctxnorm::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.code().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
