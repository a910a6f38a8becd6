#include "lls/sim.hpp"

#include "lls/basis_select.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

namespace lls {

Basis make_block_basis(int K, int J) {
  if (K < 1 || J < 1) throw input_error("make_block_basis: K and J must be positive");
  if (K > 1 && J % (K - 1) != 0)
    throw input_error("make_block_basis: K-1 = " + std::to_string(K - 1) +
                      " must divide J = " + std::to_string(J));
  SurveyDesign design;
  design.levels.assign(J, 2);
  Basis basis;
  basis.design = design;
  basis.vectors = Mat::Zero(2 * J, K);
  const int block = K > 1 ? J / (K - 1) : J;
  for (int j = 0; j < J; ++j) {
    basis.vectors(2 * j, 0) = 1.0;  // lambda^1 answers outcome 1 everywhere
    for (int k = 1; k < K; ++k) {
      bool in_block = j >= (k - 1) * block && j < k * block;
      basis.vectors(2 * j + (in_block ? 1 : 0), k) = 1.0;
    }
  }
  basis.validate();
  return basis;
}

ScoreDesign parse_score_design(const std::string& name) {
  if (name == "simplex-grid" || name == "simplex_grid") return ScoreDesign::simplex_grid;
  if (name == "two-interval" || name == "two_interval") return ScoreDesign::two_interval;
  if (name == "five-point" || name == "five_point") return ScoreDesign::five_point;
  if (name == "custom") return ScoreDesign::custom;
  throw input_error("unknown score design '" + name + "'");
}

std::string score_design_name(ScoreDesign design) {
  switch (design) {
    case ScoreDesign::simplex_grid: return "simplex-grid";
    case ScoreDesign::two_interval: return "two-interval";
    case ScoreDesign::five_point: return "five-point";
    default: return "custom";
  }
}

std::vector<Vec> five_point_locations() {
  // Shrunk simplex corners plus two edge midpoints; minimal separation 0.60.
  auto point = [](double a, double b, double c) {
    Vec g(3);
    g << a, b, c;
    return g;
  };
  return {point(0.9, 0.05, 0.05), point(0.05, 0.9, 0.05), point(0.05, 0.05, 0.9),
          point(0.475, 0.475, 0.05), point(0.475, 0.05, 0.475)};
}

Basis make_random_basis(int K, int J, std::uint64_t seed) {
  if (K < 1 || J < 1) throw input_error("make_random_basis: K and J must be positive");
  SurveyDesign design;
  design.levels.assign(J, 2);
  Rng rng(seed);
  Basis basis;
  basis.design = design;
  basis.vectors = Mat(2 * J, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j) {
      double p = 0.05 + 0.9 * rng.uniform();
      basis.vectors(2 * j, k) = p;
      basis.vectors(2 * j + 1, k) = 1.0 - p;
    }
  basis.validate();
  return basis;
}

namespace {

// Lattice {n/m : sum n = m} of the unit simplex, lexicographic order.
void lattice_points(int K, int m, Vec prefix, int at, int remaining, std::vector<Vec>& out) {
  if (at == K - 1) {
    prefix(at) = m > 0 ? static_cast<double>(remaining) / m : 1.0 / K;
    out.push_back(prefix);
    return;
  }
  for (int n = 0; n <= remaining; ++n) {
    prefix(at) = m > 0 ? static_cast<double>(n) / m : 1.0 / K;
    lattice_points(K, m, prefix, at + 1, remaining - n, out);
  }
}

std::int64_t lattice_size(int K, int m) {
  // C(m + K - 1, K - 1)
  std::int64_t v = 1;
  for (int i = 1; i <= K - 1; ++i) v = v * (m + i) / i;
  return v;
}

}  // namespace

ScoreSample sample_scores(ScoreDesign design, std::int64_t count, int K, std::uint64_t seed,
                          const std::vector<Vec>* custom_points) {
  (void)seed;  // the named layouts are deterministic
  if (count < 1) throw input_error("sample_scores: count must be positive");
  ScoreSample out;
  out.scores.reserve(count);
  out.labels.reserve(count);

  switch (design) {
    case ScoreDesign::simplex_grid: {
      int m = 0;
      while (lattice_size(K, m + 1) <= count) ++m;
      std::vector<Vec> lattice;
      lattice_points(K, m, Vec::Zero(K), 0, m, lattice);
      for (std::int64_t i = 0; i < count; ++i) {
        out.scores.push_back(lattice[i % lattice.size()]);
        out.labels.push_back(static_cast<int>(i % lattice.size()) % 8);
      }
      break;
    }
    case ScoreDesign::two_interval: {
      if (K != 2) throw input_error("two-interval design requires K = 2");
      auto spaced = [](double lo, double hi, std::int64_t n, std::int64_t i) {
        return n > 1 ? lo + (hi - lo) * static_cast<double>(i) / (n - 1) : lo;
      };
      std::int64_t first = count / 2, second = count - first;
      for (std::int64_t i = 0; i < first; ++i) {
        double g1 = spaced(0.10, 0.25, first, i);
        Vec g(2);
        g << g1, 1.0 - g1;
        out.scores.push_back(g);
        out.labels.push_back(0);
      }
      for (std::int64_t i = 0; i < second; ++i) {
        double g1 = spaced(0.50, 0.75, second, i);
        Vec g(2);
        g << g1, 1.0 - g1;
        out.scores.push_back(g);
        out.labels.push_back(1);
      }
      break;
    }
    case ScoreDesign::five_point: {
      if (K != 3) throw input_error("five-point design requires K = 3");
      auto points = five_point_locations();
      for (std::int64_t i = 0; i < count; ++i) {
        int p = static_cast<int>((i * 5) / count);  // I/5 per point, in blocks
        p = std::min(p, 4);
        out.scores.push_back(points[p]);
        out.labels.push_back(p);
      }
      break;
    }
    case ScoreDesign::custom: {
      if (!custom_points || custom_points->empty())
        throw input_error("custom design needs explicit points");
      for (std::int64_t i = 0; i < count; ++i) {
        int p = static_cast<int>(i % custom_points->size());
        out.scores.push_back((*custom_points)[p]);
        out.labels.push_back(p % 8);
      }
      break;
    }
  }
  return out;
}

Dataset simulate_responses(const Basis& basis, const std::vector<Vec>& scores,
                           std::uint64_t seed) {
  const SurveyDesign& design = basis.design;
  const int J = design.question_count();
  Rng rng(seed);
  std::vector<ResponseRecord> records;
  records.reserve(scores.size());
  for (const Vec& g : scores) {
    Vec beta = basis.beta(g);
    if (beta.minCoeff() < -1e-9)
      throw numeric_error("simulate_responses: negative mixed probability " +
                          std::to_string(beta.minCoeff()));
    ResponseRecord rec(J, 0);
    for (int j = 0; j < J; ++j) {
      double u = rng.uniform();
      double acc = 0.0;
      int drawn = design.levels[j];
      for (int l = 1; l <= design.levels[j]; ++l) {
        acc += std::max(0.0, beta(design.cell_index(j, l)));
        if (u < acc) {
          drawn = l;
          break;
        }
      }
      rec[j] = drawn;
    }
    records.push_back(std::move(rec));
  }
  return Dataset(design, std::move(records));
}

double median(std::vector<double> values) {
  if (values.empty()) throw input_error("median of empty set");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void run_replications(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1) {
    for (int r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  int width = std::min(jobs, count);
  pool.reserve(width);
  for (int t = 0; t < width; ++t)
    pool.emplace_back([&]() {
      for (int r = next.fetch_add(1); r < count && !failed.load(); r = next.fetch_add(1)) {
        try {
          body(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

RecoveryReport run_recovery_experiment(const ExperimentConfig& config, Warnings* warnings) {
  Basis truth = make_block_basis(config.K, config.J);
  RecoveryReport report;
  report.distances.resize(config.replications);
  report.seconds.resize(config.replications);
  std::vector<Warnings> rep_warnings(config.replications);

  run_replications(config.replications, config.jobs, [&](int rep) {
    std::uint64_t rep_seed = mix_seed(config.seed, rep);
    ScoreSample sample = sample_scores(config.design, config.I, config.K, rep_seed);
    Dataset data = simulate_responses(truth, sample.scores, rep_seed);
    auto [fm, se] = build_frequency_matrix(data);
    auto t0 = std::chrono::steady_clock::now();
    SubspaceFit fit = find_subspace(fm, config.K, config.subspace, &rep_warnings[rep]);
    auto t1 = std::chrono::steady_clock::now();
    report.distances[rep] = subspace_distance(fit.basis, truth);
    report.seconds[rep] = std::chrono::duration<double>(t1 - t0).count();
  });
  if (warnings)
    for (const auto& w : rep_warnings) warnings->merge(w);
  report.median_distance = median(report.distances);
  return report;
}

ClusterReport run_cluster_experiment(const ExperimentConfig& config, Warnings* warnings) {
  if (config.design != ScoreDesign::five_point)
    throw input_error("cluster experiment runs the five-point design");

  ClusterReport report;
  report.score_rates.resize(config.replications);
  report.raw_rates.resize(config.replications);
  std::vector<Warnings> rep_warnings(config.replications);

  Basis truth = make_block_basis(config.K, config.J);
  run_replications(config.replications, config.jobs, [&](int rep) {
    Warnings* local = &rep_warnings[rep];
    std::uint64_t rep_seed = mix_seed(config.seed, rep);
    ScoreSample sample = sample_scores(config.design, config.I, config.K, rep_seed);
    int classes = 1;
    for (int l : sample.labels) classes = std::max(classes, l + 1);
    Dataset data = simulate_responses(truth, sample.scores, rep_seed);

    auto [fm, se] = build_frequency_matrix(data);
    SubspaceFit fit = find_subspace(fm, config.K, config.subspace, local);
    MixingEstimate est = estimate_all_scores(data, fit.basis, config.score, local);

    PatternTable table = unique_patterns(data);
    const int P = static_cast<int>(table.patterns.size());

    // Scores clustered in orthonormal coordinates of the fitted plane (the
    // beta images); the fitted basis itself is an arbitrary affine frame, and
    // raw g coordinates would make distances depend on its conditioning.
    Eigen::HouseholderQR<Mat> qr(fit.basis.vectors);
    Mat frame = qr.householderQ() * Mat::Identity(fit.basis.vectors.rows(), config.K);
    std::vector<int> ok;
    for (int p = 0; p < P; ++p)
      if (!est.support[p].failed) ok.push_back(p);
    Mat score_points(config.K, ok.size());
    std::vector<double> score_weights(ok.size());
    for (std::size_t i = 0; i < ok.size(); ++i) {
      score_points.col(static_cast<int>(i)) =
          frame.transpose() * (fit.basis.vectors * est.support[ok[i]].g);
      score_weights[i] = est.support[ok[i]].weight;
    }
    ClusterResult by_score =
        hierarchical(score_points, score_weights, classes, std::nullopt, config.linkage);
    std::vector<int> cluster_of_pattern(P, 0);
    for (std::size_t i = 0; i < ok.size(); ++i)
      cluster_of_pattern[ok[i]] = by_score.assignments[i];

    std::vector<int> assign(data.record_count());
    for (std::int64_t i = 0; i < data.record_count(); ++i)
      assign[i] = cluster_of_pattern[table.record_index[i]];
    report.score_rates[rep] = misclassification_rate(assign, sample.labels);

    // Raw 0/1 response vectors, same clustering and metric.
    const int total = data.design().total_cells();
    Mat raw_points = Mat::Zero(total, P);
    std::vector<double> raw_weights(P);
    for (int p = 0; p < P; ++p) {
      for (int j = 0; j < data.design().question_count(); ++j) {
        int a = table.patterns[p].entries[j];
        if (a != 0) raw_points(data.design().cell_index(j, a), p) = 1.0;
      }
      raw_weights[p] = static_cast<double>(table.counts[p]) /
                       static_cast<double>(data.record_count());
    }
    ClusterResult by_raw = hierarchical(raw_points, raw_weights, classes, std::nullopt, config.linkage);
    for (std::int64_t i = 0; i < data.record_count(); ++i)
      assign[i] = by_raw.assignments[table.record_index[i]];
    report.raw_rates[rep] = misclassification_rate(assign, sample.labels);
  });

  if (warnings)
    for (const auto& w : rep_warnings) warnings->merge(w);
  for (int r = 0; r < config.replications; ++r) {
    report.mean_score_rate += report.score_rates[r] / config.replications;
    report.mean_raw_rate += report.raw_rates[r] / config.replications;
  }
  return report;
}

namespace {

double interval_mass(const MixingEstimate& est, int component) {
  double mass = 0.0, total = 0.0;
  for (const auto& s : est.support) {
    if (s.failed) continue;
    total += s.weight;
    double v = s.g(component);
    if ((v >= 0.05 && v <= 0.30) || (v >= 0.45 && v <= 0.80)) mass += s.weight;
  }
  return total > 0.0 ? mass / total : 0.0;
}

}  // namespace

Figure1Report run_figure1_experiment(const ExperimentConfig& config, Warnings* warnings) {
  if (config.design != ScoreDesign::two_interval)
    throw input_error("figure-1 experiment runs the two-interval design");
  // Full-scale runs use a position-random plane; at desk scale the block
  // plane keeps the per-question information comparable to J = 1500.
  Basis truth = config.J >= 1000 ? make_random_basis(2, config.J, mix_seed(config.seed, 77))
                                 : make_block_basis(2, config.J);
  ScoreSample sample = sample_scores(config.design, config.I, 2, config.seed);
  Dataset data = simulate_responses(truth, sample.scores, config.seed);

  Figure1Report report;
  MixingEstimate with_truth = estimate_all_scores(data, truth, config.score, warnings);
  report.true_basis_mass = interval_mass(with_truth, 0);
  report.true_hist = score_histogram(with_truth, 0, 50);

  auto [fm, se] = build_frequency_matrix(data);
  SubspaceFit fit = find_subspace(fm, 2, config.subspace, warnings);
  report.subspace_dist = subspace_distance(fit.basis, truth);

  // Align the fitted plane to the generator's coordinates by projecting the
  // true basis vectors onto it as pure types.
  std::vector<PureTypeSpec> specs(2);
  specs[0].target = truth.vectors.col(0);
  specs[1].target = truth.vectors.col(1);
  Basis aligned = pure_type_basis(specs, fit.basis);
  MixingEstimate with_fit = estimate_all_scores(data, aligned, config.score, warnings);
  report.recon_basis_mass = interval_mass(with_fit, 0);
  report.recon_hist = score_histogram(with_fit, 0, 50);
  return report;
}

}  // namespace lls
