#include "lls/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lls {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write '" + path + "'");
  return out;
}

double parse_double(const std::string& tok, const std::string& context) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw input_error("bad number '" + tok + "' in " + context);
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream in(line);
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

SurveyDesign read_design_file(const std::string& path) {
  auto in = open_in(path);
  SurveyDesign design;
  int l;
  while (in >> l) design.levels.push_back(l);
  design.validate();
  return design;
}

void write_design_file(const SurveyDesign& design, const std::string& path) {
  auto out = open_out(path);
  for (int j = 0; j < design.question_count(); ++j)
    out << (j ? " " : "") << design.levels[j];
  out << "\n";
}

Dataset load_dataset_file(const std::string& path, std::optional<SurveyDesign> design,
                          const LoadOptions& options) {
  auto in = open_in(path);
  return load_dataset(in, std::move(design), options);
}

void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::string& missing_token) {
  auto out = open_out(path);
  const int J = data.design().question_count();
  for (std::int64_t i = 0; i < data.record_count(); ++i) {
    for (int j = 0; j < J; ++j) {
      if (j) out << ',';
      int a = data.answer(i, j);
      if (a == 0)
        out << missing_token;
      else
        out << a;
    }
    out << "\n";
  }
}

void write_basis_csv(const Basis& basis, const std::string& path) {
  auto out = open_out(path);
  for (int k = 0; k < basis.dimension(); ++k) {
    for (int c = 0; c < basis.vectors.rows(); ++c) {
      if (c) out << ',';
      out << format_double(basis.vectors(c, k));
    }
    out << "\n";
  }
  write_design_file(basis.design, path + ".design");
}

Basis read_basis_csv(const std::string& path) {
  SurveyDesign design = read_design_file(path + ".design");
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, path));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw input_error("basis file '" + path + "' is empty");
  Basis basis;
  basis.design = design;
  basis.vectors = Mat(design.total_cells(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<int>(rows[k].size()) != design.total_cells())
      throw input_error("basis row " + std::to_string(k + 1) + " has " +
                        std::to_string(rows[k].size()) + " values, expected " +
                        std::to_string(design.total_cells()));
    for (int c = 0; c < design.total_cells(); ++c) basis.vectors(c, static_cast<int>(k)) = rows[k][c];
  }
  try {
    basis.validate();
  } catch (const numeric_error& e) {
    throw input_error("basis file '" + path + "': " + e.what());
  }
  return basis;
}

namespace {

std::string cell_label(const SurveyDesign& design, int flat) {
  int j = 0;
  while (design.cell_offset(j) + design.levels[j] <= flat) ++j;
  return std::to_string(j + 1) + ":" + std::to_string(flat - design.cell_offset(j) + 1);
}

}  // namespace

void write_matrix_csv(const FrequencyMatrix& fm, const std::string& path) {
  auto out = open_out(path);
  const int total = fm.cells();
  out << "cell,M1";
  for (int c = 0; c < total; ++c) out << ',' << cell_label(fm.design, c);
  out << "\n";
  for (int r = 0; r < total; ++r) {
    out << cell_label(fm.design, r) << ',' << format_double(fm.first_order(r));
    for (int c = 0; c < total; ++c) {
      out << ',';
      if (fm.completed || fm.is_estimable(r, c))
        out << format_double(fm.second_order(r, c));
      else
        out << '?';
    }
    out << "\n";
  }

  std::string meta = path + ".meta.json";
  auto mo = open_out(meta);
  mo << "{\n  \"levels\": [";
  for (int j = 0; j < fm.design.question_count(); ++j)
    mo << (j ? "," : "") << fm.design.levels[j];
  mo << "],\n  \"records\": " << fm.record_count
     << ",\n  \"renormalized\": " << (fm.renormalized ? "true" : "false")
     << ",\n  \"completed\": " << (fm.completed ? "true" : "false") << "\n}\n";
}

void write_scores_csv(const MixingEstimate& estimate, const std::string& path) {
  auto out = open_out(path);
  const int K = estimate.basis.dimension();
  out << "pattern,weight";
  for (int k = 1; k <= K; ++k) out << ",g" << k;
  out << ",residual,mode,flags\n";
  for (const auto& s : estimate.support) {
    out << s.pattern.to_string() << ',' << format_double(s.weight);
    for (int k = 0; k < K; ++k) out << ',' << (s.failed ? "nan" : format_double(s.g(k)));
    out << ',' << (s.failed ? "nan" : format_double(s.residual));
    out << ',' << (s.mode_used == ScoreMode::qp ? "qp" : "svd");
    out << ',' << (s.failed ? "failed" : (s.qp_fallback ? "qp_fallback" : "ok"));
    out << "\n";
  }
}

MixingEstimate read_scores_csv(const std::string& path, const Basis& basis) {
  auto in = open_in(path);
  MixingEstimate est;
  est.basis = basis;
  std::string line;
  if (!std::getline(in, line)) throw input_error("scores file '" + path + "' is empty");
  const int K = basis.dimension();
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != 2 + K + 3)
      throw input_error("scores row '" + line + "' has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(2 + K + 3));
    ScoredPattern sp;
    sp.pattern = ResponsePattern::parse(fields[0]);
    sp.weight = parse_double(fields[1], path);
    sp.failed = fields.back() == "failed";
    sp.qp_fallback = fields.back() == "qp_fallback";
    sp.g = Vec(K);
    for (int k = 0; k < K; ++k)
      sp.g(k) = sp.failed ? std::numeric_limits<double>::quiet_NaN()
                          : parse_double(fields[2 + k], path);
    sp.residual = sp.failed ? 0.0 : parse_double(fields[2 + K], path);
    sp.mode_used = fields[2 + K + 1] == "qp" ? ScoreMode::qp : ScoreMode::svd;
    est.support.push_back(std::move(sp));
  }
  return est;
}

void write_histogram_csv(const Histogram& hist, const std::string& path) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,mass\n";
  for (std::size_t b = 0; b < hist.masses.size(); ++b)
    out << format_double(hist.edges[b]) << ',' << format_double(hist.edges[b + 1]) << ','
        << format_double(hist.masses[b]) << "\n";
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw input_error(path + ":" + std::to_string(no) + ": expected key=value");
    auto trim = [](std::string s) {
      auto x = s.find_first_not_of(" \t");
      auto y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig experiment_config_from(const std::map<std::string, std::string>& kv) {
  ExperimentConfig config;
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto as_int = [&](const std::string& v, const char* key) {
    try {
      return std::stoll(v);
    } catch (const std::exception&) {
      throw input_error(std::string("config: bad integer for ") + key + ": '" + v + "'");
    }
  };
  if (auto* v = get("k")) config.K = static_cast<int>(as_int(*v, "k"));
  if (auto* v = get("j")) config.J = static_cast<int>(as_int(*v, "j"));
  if (auto* v = get("i")) config.I = as_int(*v, "i");
  if (auto* v = get("replications")) config.replications = static_cast<int>(as_int(*v, "replications"));
  if (auto* v = get("seed")) config.seed = static_cast<std::uint64_t>(as_int(*v, "seed"));
  if (auto* v = get("design")) config.design = parse_score_design(*v);
  if (auto* v = get("iters")) config.subspace.n_iter = static_cast<int>(as_int(*v, "iters"));
  if (auto* v = get("tol")) config.subspace.tol = parse_double(*v, "config tol");
  if (auto* v = get("init"))
    config.subspace.init = *v == "identity" ? CompletionInit::identity : CompletionInit::product;
  if (auto* v = get("linkage")) {
    if (*v == "single") config.linkage = Linkage::single;
    else if (*v == "centroid") config.linkage = Linkage::centroid;
    else if (*v == "complete") config.linkage = Linkage::complete;
    else throw input_error("config: unknown linkage '" + *v + "'");
  }
  if (auto* v = get("mode"))
    config.score.mode = *v == "svd" ? ScoreMode::svd : ScoreMode::qp;
  if (auto* v = get("accept")) config.accept = parse_double(*v, "config accept");
  if (auto* v = get("jobs")) config.jobs = static_cast<int>(as_int(*v, "jobs"));
  return config;
}

}  // namespace lls
