// Command-line front end for linear latent structure analysis: rank
// estimation, subspace fitting, score estimation, matrix completion, basis
// selection, clustering, simulation, and experiment drivers.

#include "lls/basis_select.hpp"
#include "lls/cluster.hpp"
#include "lls/io.hpp"
#include "lls/qp.hpp"
#include "lls/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Stages {
  std::vector<std::pair<std::string, double>> timings;

  template <typename F>
  auto run(const std::string& name, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings.emplace_back(name, std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count());
    } else {
      auto result = fn();
      timings.emplace_back(name, std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count());
      return result;
    }
  }
};

json warnings_json(const lls::Warnings& warnings) {
  // Deduplicate, preserving first appearance; "exactly once" per message.
  std::vector<std::pair<std::string, int>> unique;
  for (const auto& m : warnings.messages()) {
    auto it = std::find_if(unique.begin(), unique.end(),
                           [&](const auto& p) { return p.first == m; });
    if (it == unique.end())
      unique.emplace_back(m, 1);
    else
      ++it->second;
  }
  json arr = json::array();
  for (const auto& [message, count] : unique) arr.push_back({{"message", message}, {"count", count}});
  return arr;
}

void write_manifest(const std::string& path, const std::string& command, const json& inputs,
                    const json& options, const json& results, const Stages& stages,
                    const lls::Warnings& warnings) {
  if (path.empty()) return;
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["inputs"] = inputs;
  m["options"] = options;
  m["results"] = results;
  json st = json::array();
  for (const auto& [name, ms] : stages.timings) st.push_back({{"stage", name}, {"ms", ms}});
  m["stages"] = st;
  m["warnings"] = warnings_json(warnings);
  std::ofstream out(path);
  if (!out) throw lls::input_error("cannot write manifest '" + path + "'");
  out << m.dump(2) << "\n";
}

struct DataArgs {
  std::string data_path;
  std::string design_path;
  std::string missing_token = ".";
  bool header = false;
  bool missing_as_category = false;

  void attach(CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--data", data_path, "input dataset CSV");
    if (required) opt->required();
    cmd->add_option("--design", design_path, "design file (one line: L_1 ... L_J)");
    cmd->add_option("--missing-token", missing_token, "token that marks a missing answer");
    cmd->add_flag("--header", header, "skip the first input line");
    cmd->add_flag("--missing-as-category", missing_as_category,
                  "recode missing answers as an extra outcome per question");
  }

  lls::Dataset load() const {
    std::optional<lls::SurveyDesign> design;
    if (!design_path.empty()) design = lls::read_design_file(design_path);
    lls::LoadOptions opts;
    opts.missing_token = missing_token;
    opts.has_header = header;
    opts.missing_as_category = missing_as_category;
    return lls::load_dataset_file(data_path, std::move(design), opts);
  }
};

int cmd_rank(const DataArgs& data_args, double alpha, double multiplier,
             const std::string& sv_file, double threshold, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::RankEstimate est;
  if (!sv_file.empty()) {
    std::ifstream in(sv_file);
    if (!in) throw lls::input_error("cannot open '" + sv_file + "'");
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (values.empty()) throw lls::input_error("no singular values in '" + sv_file + "'");
    if (threshold < 0.0) throw lls::input_error("--threshold is required with --sv-file");
    est.singular_values = Eigen::Map<lls::Vec>(values.data(), values.size());
    est.threshold = threshold;
    est.K = lls::rank_from_singular_values(est.singular_values, threshold);
  } else {
    lls::Dataset data = stages.run("load", [&] { return data_args.load(); });
    lls::BuildOptions build;
    build.alpha = alpha;
    auto [fm, se] = stages.run("frequency_matrix",
                               [&] { return lls::build_frequency_matrix(data, build, &warnings); });
    est = stages.run("rank", [&] { return lls::estimate_rank(fm, se, multiplier); });
  }

  std::cout << "singular values:";
  for (int i = 0; i < std::min<int>(est.singular_values.size(), 12); ++i)
    std::cout << ' ' << lls::format_double(est.singular_values(i));
  if (est.singular_values.size() > 12) std::cout << " ...";
  std::cout << "\nthreshold: " << lls::format_double(est.threshold) << "\nK = " << est.K << "\n";

  json results;
  results["K"] = est.K;
  results["threshold"] = est.threshold;
  json sv = json::array();
  for (int i = 0; i < est.singular_values.size(); ++i) sv.push_back(est.singular_values(i));
  results["singular_values"] = sv;
  write_manifest(manifest, "rank",
                 {{"data", data_args.data_path}, {"sv_file", sv_file}},
                 {{"alpha", alpha}, {"multiplier", multiplier}}, results, stages, warnings);
  return 0;
}

int cmd_fit(const DataArgs& data_args, int K, const lls::SubspaceOptions& sub, double alpha,
            double multiplier, const std::string& out, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::Dataset data = stages.run("load", [&] { return data_args.load(); });
  lls::BuildOptions build;
  build.alpha = alpha;
  auto [fm, se] = stages.run("frequency_matrix",
                             [&] { return lls::build_frequency_matrix(data, build, &warnings); });
  int chosen_k = K;
  if (chosen_k <= 0) {
    auto est = stages.run("rank", [&] { return lls::estimate_rank(fm, se, multiplier); });
    chosen_k = est.K;
    warnings.add("K chosen by rank estimation: " + std::to_string(chosen_k));
    std::cout << "K = " << chosen_k << " (rank estimate)\n";
  }
  lls::SubspaceFit fit =
      stages.run("fit", [&] { return lls::find_subspace(fm, chosen_k, sub, &warnings); });
  stages.run("write", [&] { lls::write_basis_csv(fit.basis, out); });

  json results;
  results["K"] = chosen_k;
  results["iterations"] = fit.iterations;
  results["step_distances"] = fit.step_distances;
  results["qp_fallbacks"] = fit.completion.qp_fallbacks;
  results["basis_file"] = out;
  write_manifest(manifest, "fit", {{"data", data_args.data_path}},
                 {{"k", chosen_k},
                  {"iters", sub.n_iter},
                  {"tol", sub.tol},
                  {"init", sub.init == lls::CompletionInit::product ? "product" : "identity"}},
                 results, stages, warnings);
  std::cout << "basis written to " << out << "\n";
  return 0;
}

int cmd_scores(const DataArgs& data_args, const std::string& basis_path,
               const lls::ScoreOptions& opts, const std::string& out, const std::string& hist_path,
               int bins, int component, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::Dataset data = stages.run("load", [&] { return data_args.load(); });
  lls::Basis basis = stages.run("basis", [&] { return lls::read_basis_csv(basis_path); });
  lls::MixingEstimate est =
      stages.run("scores", [&] { return lls::estimate_all_scores(data, basis, opts, &warnings); });
  stages.run("write", [&] {
    lls::write_scores_csv(est, out);
    if (!hist_path.empty())
      lls::write_histogram_csv(lls::score_histogram(est, component - 1, bins), hist_path);
  });

  json results;
  results["patterns"] = est.support.size();
  results["scored_weight"] = est.scored_weight();
  results["scores_file"] = out;
  write_manifest(manifest, "scores", {{"data", data_args.data_path}, {"basis", basis_path}},
                 {{"mode", opts.mode == lls::ScoreMode::qp ? "qp" : "svd"},
                  {"min_row_eligible", opts.min_row_eligible},
                  {"bins", bins}},
                 results, stages, warnings);
  std::cout << est.support.size() << " patterns scored; written to " << out << "\n";
  return 0;
}

int cmd_complete(const DataArgs& data_args, const std::string& basis_path, bool raw,
                 const std::string& out, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::Dataset data = stages.run("load", [&] { return data_args.load(); });
  auto [fm, se] =
      stages.run("frequency_matrix", [&] { return lls::build_frequency_matrix(data, {}, &warnings); });
  lls::FrequencyMatrix result = fm;
  if (!raw) {
    if (basis_path.empty())
      throw lls::input_error("complete: provide --basis or use --raw for the masked dump");
    lls::Basis basis = lls::read_basis_csv(basis_path);
    result = stages.run("complete",
                        [&] { return lls::complete_matrix(fm, basis, &warnings, nullptr); });
  }
  stages.run("write", [&] { lls::write_matrix_csv(result, out); });
  write_manifest(manifest, "complete", {{"data", data_args.data_path}, {"basis", basis_path}},
                 {{"raw", raw}}, {{"matrix_file", out}}, stages, warnings);
  std::cout << "matrix written to " << out << "\n";
  return 0;
}

int cmd_basis(const DataArgs& data_args, const std::string& basis_path,
              const std::string& pure_types, bool cluster_means, int K, std::uint64_t seed,
              const std::string& out, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::Basis basis = stages.run("basis", [&] { return lls::read_basis_csv(basis_path); });

  lls::Basis result;
  if (!pure_types.empty()) {
    std::ifstream in(pure_types);
    if (!in) throw lls::input_error("cannot open '" + pure_types + "'");
    std::vector<lls::PureTypeSpec> specs;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      std::string tok;
      std::vector<double> row;
      while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
      lls::PureTypeSpec spec;
      spec.target = Eigen::Map<lls::Vec>(row.data(), row.size());
      specs.push_back(std::move(spec));
    }
    result = stages.run("project", [&] { return lls::pure_type_basis(specs, basis); });
  } else if (cluster_means) {
    if (K <= 0) throw lls::input_error("basis --cluster-means needs --k");
    lls::Dataset data = stages.run("load", [&] { return data_args.load(); });
    lls::MixingEstimate est =
        stages.run("scores", [&] { return lls::estimate_all_scores(data, basis, {}, &warnings); });
    result = stages.run("cluster_means",
                        [&] { return lls::cluster_mean_basis(est, basis, K, seed); });
  } else {
    throw lls::input_error("basis: choose --pure-types FILE or --cluster-means");
  }
  stages.run("write", [&] { lls::write_basis_csv(result, out); });
  write_manifest(manifest, "basis", {{"basis", basis_path}, {"pure_types", pure_types}},
                 {{"cluster_means", cluster_means}, {"k", K}}, {{"basis_file", out}}, stages,
                 warnings);
  std::cout << "basis written to " << out << "\n";
  return 0;
}

int cmd_cluster(const std::string& scores_path, const std::string& basis_path,
                const std::string& method, int K, const std::string& linkage_name,
                std::uint64_t seed, const std::string& out, const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::Basis basis = lls::read_basis_csv(basis_path);
  lls::MixingEstimate est =
      stages.run("load", [&] { return lls::read_scores_csv(scores_path, basis); });

  std::vector<int> keep;
  for (std::size_t i = 0; i < est.support.size(); ++i)
    if (!est.support[i].failed) keep.push_back(static_cast<int>(i));
  lls::Mat points(basis.dimension(), keep.size());
  std::vector<double> weights(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    points.col(static_cast<int>(i)) = est.support[keep[i]].g;
    weights[i] = est.support[keep[i]].weight;
  }

  lls::ClusterResult clusters = stages.run("cluster", [&] {
    if (method == "kmeans") return lls::kmeans(points, weights, K, seed);
    lls::Linkage linkage = lls::Linkage::centroid;
    if (linkage_name == "single") linkage = lls::Linkage::single;
    else if (linkage_name == "complete") linkage = lls::Linkage::complete;
    else if (linkage_name != "centroid")
      throw lls::input_error("unknown linkage '" + linkage_name + "'");
    return lls::hierarchical(points, weights, K, std::nullopt, linkage);
  });

  stages.run("write", [&] {
    std::ofstream o(out);
    if (!o) throw lls::input_error("cannot write '" + out + "'");
    o << "pattern,weight,cluster\n";
    for (std::size_t i = 0; i < keep.size(); ++i)
      o << est.support[keep[i]].pattern.to_string() << ','
        << lls::format_double(weights[i]) << ',' << clusters.assignments[i] << "\n";
  });
  write_manifest(manifest, "cluster", {{"scores", scores_path}},
                 {{"method", method}, {"k", K}, {"linkage", linkage_name}, {"seed", seed}},
                 {{"clusters_file", out}}, stages, warnings);
  std::cout << "clusters written to " << out << "\n";
  return 0;
}

int cmd_simulate(int K, int J, std::int64_t I, const std::string& design_name, std::uint64_t seed,
                 const std::string& out, const std::string& truth_dir,
                 const std::string& manifest) {
  Stages stages;
  lls::Warnings warnings;
  lls::ScoreDesign design = lls::parse_score_design(design_name);
  lls::Basis basis = lls::make_block_basis(K, J);
  lls::ScoreSample sample = lls::sample_scores(design, I, K, seed);
  lls::Dataset data =
      stages.run("simulate", [&] { return lls::simulate_responses(basis, sample.scores, seed); });
  stages.run("write", [&] {
    lls::write_dataset_csv(data, out);
    if (!truth_dir.empty()) {
      fs::create_directories(truth_dir);
      lls::write_basis_csv(basis, (fs::path(truth_dir) / "basis.csv").string());
      std::ofstream ts(fs::path(truth_dir) / "scores.csv");
      ts << "individual";
      for (int k = 1; k <= K; ++k) ts << ",g" << k;
      ts << ",label\n";
      for (std::size_t i = 0; i < sample.scores.size(); ++i) {
        ts << i + 1;
        for (int k = 0; k < K; ++k) ts << ',' << lls::format_double(sample.scores[i](k));
        ts << ',' << sample.labels[i] << "\n";
      }
    }
  });
  write_manifest(manifest, "simulate", json::object(),
                 {{"k", K}, {"j", J}, {"i", I}, {"design", design_name}, {"seed", seed}},
                 {{"dataset_file", out}, {"truth_dir", truth_dir}}, stages, warnings);
  std::cout << I << " records written to " << out << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   std::optional<std::uint64_t> seed_override, int jobs, bool full) {
  Stages stages;
  lls::Warnings warnings;
  auto kv = lls::read_config_file(config_path);
  auto it = kv.find("experiment");
  if (it == kv.end())
    throw lls::input_error("config: missing 'experiment' key (recovery, cluster, or figure1)");
  std::string kind = it->second;
  lls::ExperimentConfig config = lls::experiment_config_from(kv);
  if (seed_override) config.seed = *seed_override;
  if (jobs > 0) config.jobs = jobs;

  fs::create_directories(out_dir);
  json report;
  report["experiment"] = kind;
  report["config"] = {{"k", config.K},
                      {"j", config.J},
                      {"i", config.I},
                      {"design", lls::score_design_name(config.design)},
                      {"replications", config.replications},
                      {"seed", config.seed}};
  std::ofstream table((fs::path(out_dir) / "report.csv").string());

  if (kind == "recovery") {
    lls::RecoveryReport rec =
        stages.run("experiment", [&] { return lls::run_recovery_experiment(config, &warnings); });
    report["median_distance"] = rec.median_distance;
    report["distances"] = rec.distances;
    report["fit_seconds"] = rec.seconds;
    if (config.accept) report["accept"] = {{"threshold", *config.accept},
                                           {"pass", rec.median_distance <= *config.accept}};
    table << "replication,distance,fit_seconds\n";
    for (std::size_t r = 0; r < rec.distances.size(); ++r)
      table << r + 1 << ',' << lls::format_double(rec.distances[r]) << ','
            << lls::format_double(rec.seconds[r]) << "\n";
    std::cout << "median subspace distance: " << lls::format_double(rec.median_distance) << "\n";
  } else if (kind == "cluster") {
    lls::ClusterReport rep =
        stages.run("experiment", [&] { return lls::run_cluster_experiment(config, &warnings); });
    report["mean_score_rate"] = rep.mean_score_rate;
    report["mean_raw_rate"] = rep.mean_raw_rate;
    report["score_rates"] = rep.score_rates;
    report["raw_rates"] = rep.raw_rates;
    if (config.accept) report["accept"] = {{"threshold", *config.accept},
                                           {"pass", rep.mean_score_rate <= *config.accept}};
    table << "replication,score_rate,raw_rate\n";
    for (std::size_t r = 0; r < rep.score_rates.size(); ++r)
      table << r + 1 << ',' << lls::format_double(rep.score_rates[r]) << ','
            << lls::format_double(rep.raw_rates[r]) << "\n";
    std::cout << "misclassification: scores " << lls::format_double(rep.mean_score_rate)
              << ", raw responses " << lls::format_double(rep.mean_raw_rate) << "\n";
  } else if (kind == "figure1") {
    if (full) {
      config.J = 1500;
      config.I = 10000;
    }
    lls::Figure1Report rep =
        stages.run("experiment", [&] { return lls::run_figure1_experiment(config, &warnings); });
    report["true_basis_mass"] = rep.true_basis_mass;
    report["recon_basis_mass"] = rep.recon_basis_mass;
    report["subspace_distance"] = rep.subspace_dist;
    lls::write_histogram_csv(rep.true_hist, (fs::path(out_dir) / "hist_true_basis.csv").string());
    lls::write_histogram_csv(rep.recon_hist, (fs::path(out_dir) / "hist_recon_basis.csv").string());
    table << "basis,interval_mass\n";
    table << "true," << lls::format_double(rep.true_basis_mass) << "\n";
    table << "reconstructed," << lls::format_double(rep.recon_basis_mass) << "\n";
    std::cout << "interval mass: true basis " << lls::format_double(rep.true_basis_mass)
              << ", reconstructed " << lls::format_double(rep.recon_basis_mass) << "\n";
  } else {
    throw lls::input_error("config: unknown experiment '" + kind + "'");
  }

  report["warnings"] = warnings_json(warnings);
  json st = json::array();
  for (const auto& [name, ms] : stages.timings) st.push_back({{"stage", name}, {"ms", ms}});
  report["stages"] = st;
  std::ofstream out((fs::path(out_dir) / "report.json").string());
  out << report.dump(2) << "\n";
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear latent structure analysis"};
  app.require_subcommand(1);

  // rank
  auto* rank = app.add_subcommand("rank", "estimate the computational rank K");
  DataArgs rank_data;
  rank_data.attach(rank, false);
  double alpha = 0.3173;  // one-standard-error cells
  double multiplier = 2.0;
  std::string sv_file, manifest;
  double threshold = -1.0;
  rank->add_option("--alpha", alpha, "Wilson confidence level for cell errors");
  rank->add_option("--multiplier", multiplier, "threshold multiplier over the error quadratic sum");
  rank->add_option("--sv-file", sv_file, "read singular values from a file instead of data");
  rank->add_option("--threshold", threshold, "explicit threshold (with --sv-file)");
  rank->add_option("--manifest", manifest, "manifest JSON path");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the supporting subspace basis");
  DataArgs fit_data;
  fit_data.attach(fit);
  int fit_k = 0;
  lls::SubspaceOptions sub;
  std::string fit_out = "basis.csv", fit_manifest;
  double fit_alpha = 0.3173, fit_multiplier = 2.0;
  std::string init_name = "product";
  fit->add_option("--k", fit_k, "subspace dimension (0 = choose by rank estimate)");
  fit->add_option("--iters", sub.n_iter, "completion iterations");
  fit->add_option("--tol", sub.tol, "stop when successive subspace distance falls below");
  fit->add_option("--init", init_name, "initial completion: product or identity")
      ->check(CLI::IsMember({"product", "identity"}));
  fit->add_option("--alpha", fit_alpha, "Wilson confidence level (rank estimate)");
  fit->add_option("--multiplier", fit_multiplier, "rank threshold multiplier");
  fit->add_option("--out", fit_out, "output basis CSV");
  fit->add_option("--manifest", fit_manifest, "manifest JSON path");

  // scores
  auto* scores = app.add_subcommand("scores", "estimate scores for observed patterns");
  DataArgs scores_data;
  scores_data.attach(scores);
  std::string scores_basis, scores_out = "scores.csv", scores_hist, scores_manifest;
  std::string mode_name = "qp";
  lls::ScoreOptions score_opts;
  int bins = 50, component = 1;
  scores->add_option("--basis", scores_basis, "basis CSV")->required();
  scores->add_option("--mode", mode_name, "qp or svd")->check(CLI::IsMember({"qp", "svd"}));
  scores->add_option("--min-rows", score_opts.min_row_eligible,
                     "drop rows whose denominator has fewer eligible respondents");
  scores->add_flag("--mean-over-questions", score_opts.mean_over_questions,
                   "average per-question solutions for complete patterns");
  scores->add_option("--out", scores_out, "output scores CSV");
  scores->add_option("--hist", scores_hist, "histogram CSV path");
  scores->add_option("--bins", bins, "histogram bin count");
  scores->add_option("--component", component, "histogram score component (1-based)");
  scores->add_option("--manifest", scores_manifest, "manifest JSON path");

  // complete
  auto* complete = app.add_subcommand("complete", "dump the (completed) frequency matrix");
  DataArgs complete_data;
  complete_data.attach(complete);
  std::string complete_basis, complete_out = "matrix.csv", complete_manifest;
  bool complete_raw = false;
  complete->add_option("--basis", complete_basis, "basis CSV for completion");
  complete->add_flag("--raw", complete_raw, "dump the raw matrix with '?' cells");
  complete->add_option("--out", complete_out, "output matrix CSV");
  complete->add_option("--manifest", complete_manifest, "manifest JSON path");

  // basis
  auto* basis_cmd = app.add_subcommand("basis", "select an interpretable basis");
  DataArgs basis_data;
  basis_data.attach(basis_cmd, false);
  std::string basis_in, basis_pure, basis_out = "basis_out.csv", basis_manifest;
  bool basis_cluster_means = false;
  int basis_k = 0;
  std::uint64_t basis_seed = 1;
  basis_cmd->add_option("--basis", basis_in, "current basis CSV")->required();
  basis_cmd->add_option("--pure-types", basis_pure, "CSV of pure-type probability rows");
  basis_cmd->add_flag("--cluster-means", basis_cluster_means, "cluster-mean basis");
  basis_cmd->add_option("--k", basis_k, "cluster count for --cluster-means");
  basis_cmd->add_option("--seed", basis_seed, "clustering seed");
  basis_cmd->add_option("--out", basis_out, "output basis CSV");
  basis_cmd->add_option("--manifest", basis_manifest, "manifest JSON path");

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "cluster score vectors");
  std::string cluster_scores, cluster_basis, cluster_out = "clusters.csv", cluster_manifest;
  std::string cluster_method = "kmeans", cluster_linkage = "centroid";
  int cluster_k = 2;
  std::uint64_t cluster_seed = 1;
  cluster_cmd->add_option("--scores", cluster_scores, "scores CSV (from the scores command)")
      ->required();
  cluster_cmd->add_option("--basis", cluster_basis, "basis CSV the scores refer to")->required();
  cluster_cmd->add_option("--method", cluster_method, "kmeans or hier")
      ->check(CLI::IsMember({"kmeans", "hier"}));
  cluster_cmd->add_option("--k", cluster_k, "cluster count");
  cluster_cmd->add_option("--linkage", cluster_linkage, "centroid, single, or complete");
  cluster_cmd->add_option("--seed", cluster_seed, "seed");
  cluster_cmd->add_option("--out", cluster_out, "output CSV (pattern -> cluster)");
  cluster_cmd->add_option("--manifest", cluster_manifest, "manifest JSON path");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a seeded synthetic dataset");
  int sim_k = 2, sim_j = 60;
  std::int64_t sim_i = 1430;
  std::string sim_design = "simplex-grid", sim_out = "simulated.csv", sim_truth, sim_manifest;
  std::uint64_t sim_seed = 20240501;
  simulate->add_option("--k", sim_k, "latent dimension");
  simulate->add_option("--j", sim_j, "question count");
  simulate->add_option("--i", sim_i, "individual count");
  simulate->add_option("--score-design", sim_design, "simplex-grid, two-interval, or five-point");
  simulate->add_option("--seed", sim_seed, "seed");
  simulate->add_option("--out", sim_out, "output dataset CSV");
  simulate->add_option("--truth-dir", sim_truth, "directory for truth sidecars");
  simulate->add_option("--manifest", sim_manifest, "manifest JSON path");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a configured experiment");
  std::string exp_config, exp_out = "experiment_out";
  std::uint64_t exp_seed = 0;
  bool exp_seed_set = false, exp_full = false;
  int exp_jobs = 0;
  experiment->add_option("--config", exp_config, "key=value config file")->required();
  experiment->add_option("--out-dir", exp_out, "output directory");
  experiment->add_option("--seed", exp_seed, "override the config seed")
      ->each([&](const std::string&) { exp_seed_set = true; });
  experiment->add_option("--jobs", exp_jobs, "parallel replications");
  experiment->add_flag("--full", exp_full, "full-scale figure-1 run (J=1500, I=10000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rank->parsed())
      return cmd_rank(rank_data, alpha, multiplier, sv_file, threshold, manifest);
    if (fit->parsed()) {
      sub.init = init_name == "identity" ? lls::CompletionInit::identity
                                         : lls::CompletionInit::product;
      return cmd_fit(fit_data, fit_k, sub, fit_alpha, fit_multiplier, fit_out, fit_manifest);
    }
    if (scores->parsed()) {
      score_opts.mode = mode_name == "svd" ? lls::ScoreMode::svd : lls::ScoreMode::qp;
      return cmd_scores(scores_data, scores_basis, score_opts, scores_out, scores_hist, bins,
                        component, scores_manifest);
    }
    if (complete->parsed())
      return cmd_complete(complete_data, complete_basis, complete_raw, complete_out,
                          complete_manifest);
    if (basis_cmd->parsed())
      return cmd_basis(basis_data, basis_in, basis_pure, basis_cluster_means, basis_k, basis_seed,
                       basis_out, basis_manifest);
    if (cluster_cmd->parsed())
      return cmd_cluster(cluster_scores, cluster_basis, cluster_method, cluster_k, cluster_linkage,
                         cluster_seed, cluster_out, cluster_manifest);
    if (simulate->parsed())
      return cmd_simulate(sim_k, sim_j, sim_i, sim_design, sim_seed, sim_out, sim_truth,
                          sim_manifest);
    if (experiment->parsed())
      return cmd_experiment(exp_config, exp_out,
                            exp_seed_set ? std::optional<std::uint64_t>(exp_seed) : std::nullopt,
                            exp_jobs, exp_full);
  } catch (const lls::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lls::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
