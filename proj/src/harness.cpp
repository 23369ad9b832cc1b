#include "ensopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ensopt/rng.hpp"

namespace ensopt {

namespace {

// Substream tags under the master seed: CMA sampling, per-point realization
// draws, and problem generation never share a stream.
constexpr std::uint64_t kCmaStreamTag = 1;
constexpr std::uint64_t kDrawStreamTag = 2;
constexpr std::uint64_t kProblemStreamTag = 3;

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << v[i];
  }
  return os.str();
}

Vector parse_vector(const std::string& text) {
  std::istringstream is(text);
  std::vector<double> values;
  double v;
  while (is >> v) values.push_back(v);
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::MeanOfSamples: return "mean_of_samples";
    case Strategy::OneRealization: return "one_realization";
    case Strategy::Neighborhood: return "neighborhood";
  }
  throw std::logic_error("unreachable");
}

std::string to_string(VerifyPolicy p) {
  return p == VerifyPolicy::OnNewBest ? "on_new_best" : "every_generation";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "mean_of_samples") return Strategy::MeanOfSamples;
  if (s == "one_realization") return Strategy::OneRealization;
  if (s == "neighborhood") return Strategy::Neighborhood;
  throw std::invalid_argument("unknown strategy: " + s);
}

VerifyPolicy verify_policy_from_string(const std::string& s) {
  if (s == "on_new_best") return VerifyPolicy::OnNewBest;
  if (s == "every_generation") return VerifyPolicy::EveryGeneration;
  throw std::invalid_argument("unknown verification policy: " + s);
}

void RunConfig::validate() const {
  if (problem.name != "shifted_sphere" && problem.name != "npv_proxy")
    throw std::invalid_argument("unknown problem: " + problem.name);
  if (problem.dimension < 1)
    throw std::invalid_argument("config: dimension must be >= 1");
  if (problem.name == "npv_proxy" && problem.dimension != 4 &&
      problem.dimension != 12)
    throw std::invalid_argument("config: npv_proxy dimension must be 4 or 12");
  if (lambda < 2) throw std::invalid_argument("config: lambda must be >= 2");
  if (n_runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (budget_simulations < problem.n_realizations)
    throw std::invalid_argument(
        "config: budget must afford at least one verification (>= N_r)");
  if (estimator.n_realizations != problem.n_realizations)
    throw std::invalid_argument("config: estimator N_r must match the problem");
  estimator.validate();
  if (m0 && m0->size() != problem.dimension)
    throw std::invalid_argument("config: m0 dimension mismatch");
}

std::uint64_t problem_seed(std::uint64_t master_seed) {
  return mix64(master_seed, kProblemStreamTag);
}

Problem build_problem(const ProblemSpec& spec, std::uint64_t master_seed) {
  const std::uint64_t seed = problem_seed(master_seed);
  if (spec.name == "shifted_sphere")
    return make_shifted_sphere(spec.dimension, spec.n_realizations,
                               spec.shift_scale, seed)
        .problem;
  if (spec.name == "npv_proxy")
    return make_npv_proxy(spec.dimension, spec.n_realizations, spec.field,
                          spec.economics, seed)
        .problem;
  throw std::invalid_argument("unknown problem: " + spec.name);
}

namespace {

Vector default_m0(const Problem& problem) {
  Vector m(problem.dimension);
  for (int i = 0; i < problem.dimension; ++i)
    m[i] = 0.5 * (problem.bounds[i].first + problem.bounds[i].second);
  return m;
}

double default_sigma0(const Problem& problem) {
  double extent = 0.0;
  for (const auto& [lo, hi] : problem.bounds) extent += hi - lo;
  return 0.3 * extent / problem.dimension;
}

// Exact ensemble mean over all realizations; the records are genuine
// simulations and go into the archive.
double verify_point(const Problem& problem, const DesignPoint& point,
                    Archive& archive, long generation, long& cum_verification) {
  std::vector<double> values(problem.n_realizations);
#pragma omp parallel for schedule(static)
  for (int r = 1; r <= problem.n_realizations; ++r)
    values[r - 1] = problem.evaluate(point, r);
  for (int r = 1; r <= problem.n_realizations; ++r)
    archive.insert(point, r, values[r - 1], generation);
  cum_verification += problem.n_realizations;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         problem.n_realizations;
}

}  // namespace

RunTrace run_single(const RunConfig& config, int run_index) {
  config.validate();
  const Problem problem = build_problem(config.problem, config.master_seed);

  const Vector m0 = config.m0 ? *config.m0 : default_m0(problem);
  const double sigma0 =
      config.sigma0 > 0 ? config.sigma0 : default_sigma0(problem);

  CmaEs optimizer(problem.dimension, m0, sigma0, config.lambda,
                  mix64(config.master_seed, kCmaStreamTag,
                        static_cast<std::uint64_t>(run_index)));
  optimizer.set_distance_scaling(config.distance_scaling);

  Archive archive;
  RunTrace trace;
  trace.run_id = run_index;
  trace.header = config_to_keys(config);
  trace.header["run_id"] = std::to_string(run_index);

  long cum_estimation = 0;
  long cum_verification = 0;
  double best_estimate = -std::numeric_limits<double>::infinity();
  Vector best_estimate_point;
  std::optional<double> best_verified;
  std::optional<Vector> best_verified_point;

  try {
    while (cum_estimation + cum_verification < config.budget_simulations) {
      const long generation = optimizer.generation();
      const auto points = optimizer.ask();

      std::vector<double> fitness(config.lambda);
      std::vector<EvaluationRecord> deferred;
      std::vector<EvaluationRecord>* defer =
          config.estimator.intra_generation_visibility ? nullptr : &deferred;
      long neighbors_total = 0;

      for (int i = 0; i < config.lambda; ++i) {
        auto rng = substream(config.master_seed, kDrawStreamTag,
                             static_cast<std::uint64_t>(run_index),
                             static_cast<std::uint64_t>(generation),
                             static_cast<std::uint64_t>(i));
        EstimateResult est;
        switch (config.strategy) {
          case Strategy::MeanOfSamples:
            est = estimate_mean_of_samples(points[i], problem, archive,
                                           config.estimator, generation, defer);
            break;
          case Strategy::OneRealization:
            est = estimate_one_realization(points[i], problem, archive,
                                           config.estimator, rng, generation,
                                           defer);
            break;
          case Strategy::Neighborhood:
            est = estimate_neighborhood(points[i], problem, archive,
                                        config.estimator, optimizer, rng,
                                        generation, defer);
            break;
        }
        fitness[i] = est.estimate;
        cum_estimation += est.fresh_simulations;
        neighbors_total += est.neighbors_used;
      }
      for (auto& rec : deferred) archive.insert(std::move(rec));

      int gen_best = 0;
      for (int i = 1; i < config.lambda; ++i)
        if (fitness[i] > fitness[gen_best]) gen_best = i;

      optimizer.tell(points, fitness, /*maximize=*/true);

      const bool new_best = fitness[gen_best] > best_estimate;
      if (new_best) {
        best_estimate = fitness[gen_best];
        best_estimate_point = points[gen_best];
      }
      const bool do_verify =
          config.verify == VerifyPolicy::EveryGeneration ||
          (config.verify == VerifyPolicy::OnNewBest && new_best);
      if (do_verify) {
        const double verified = verify_point(problem, points[gen_best], archive,
                                             generation, cum_verification);
        if (!best_verified || verified > *best_verified) {
          best_verified = verified;
          best_verified_point = points[gen_best];
        }
      }

      TraceRow row;
      row.run_id = run_index;
      row.generation = generation;
      row.cum_estimation_sims = cum_estimation;
      row.cum_verification_sims = cum_verification;
      row.best_estimate = best_estimate;
      row.best_verified = best_verified;
      row.sigma = optimizer.sigma();
      row.mean_neighbors = static_cast<double>(neighbors_total) / config.lambda;
      trace.rows.push_back(row);
    }
  } catch (const std::exception&) {
    trace.complete = false;
  }

  trace.archive_records = static_cast<long>(archive.count_simulations());
  trace.best_estimate_point = best_estimate_point;
  trace.best_estimate_value = best_estimate;
  trace.best_verified_point = best_verified_point;
  trace.best_verified_value = best_verified;
  return trace;
}

std::vector<RunTrace> run_campaign(const RunConfig& config) {
  config.validate();
  std::vector<RunTrace> traces;
  traces.reserve(config.n_runs);
  for (int run = 0; run < config.n_runs; ++run)
    traces.push_back(run_single(config, run));
  return traces;
}

void write_trace(const RunTrace& trace, std::ostream& os) {
  for (const auto& [key, value] : trace.header)
    os << "# " << key << '=' << value << '\n';
  os << "run_id,generation,cum_estimation_sims,cum_verification_sims,"
        "best_estimate,best_verified,sigma,mean_neighbors\n";
  for (const auto& row : trace.rows) {
    os << row.run_id << ',' << row.generation << ',' << row.cum_estimation_sims
       << ',' << row.cum_verification_sims << ',' << format_double(row.best_estimate)
       << ',';
    if (row.best_verified) os << format_double(*row.best_verified);
    os << ',' << format_double(row.sigma) << ',' << format_double(row.mean_neighbors)
       << '\n';
  }
  os << "# archive_records=" << trace.archive_records << '\n';
  os << "# p_max_E=" << format_vector(trace.best_estimate_point) << '\n';
  os << "# p_max_E_value=" << format_double(trace.best_estimate_value) << '\n';
  if (trace.best_verified_point) {
    os << "# p_max_R=" << format_vector(*trace.best_verified_point) << '\n';
    os << "# p_max_R_value=" << format_double(*trace.best_verified_value) << '\n';
  }
  os << "# complete=" << (trace.complete ? 1 : 0) << '\n';
}

void write_trace(const RunTrace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("trace: cannot open " + path);
  write_trace(trace, os);
}

RunTrace read_trace(std::istream& is) {
  RunTrace trace;
  std::string line;
  bool saw_rows = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("trace: malformed comment line: " + line);
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "archive_records") {
        trace.archive_records = std::stol(value);
      } else if (key == "p_max_E") {
        trace.best_estimate_point = parse_vector(value);
      } else if (key == "p_max_E_value") {
        trace.best_estimate_value = std::stod(value);
      } else if (key == "p_max_R") {
        trace.best_verified_point = parse_vector(value);
      } else if (key == "p_max_R_value") {
        trace.best_verified_value = std::stod(value);
      } else if (key == "complete") {
        trace.complete = value == "1";
      } else {
        trace.header[key] = value;
      }
      continue;
    }
    if (!saw_rows && line.rfind("run_id,", 0) == 0) {
      saw_rows = true;
      continue;
    }
    std::istringstream row_stream(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row_stream, cell, ',')) cells.push_back(cell);
    if (cells.size() < 8) throw std::runtime_error("trace: short row: " + line);
    TraceRow row;
    row.run_id = std::stoi(cells[0]);
    row.generation = std::stol(cells[1]);
    row.cum_estimation_sims = std::stol(cells[2]);
    row.cum_verification_sims = std::stol(cells[3]);
    row.best_estimate = std::stod(cells[4]);
    if (!cells[5].empty()) row.best_verified = std::stod(cells[5]);
    row.sigma = std::stod(cells[6]);
    row.mean_neighbors = std::stod(cells[7]);
    trace.rows.push_back(row);
  }
  if (trace.header.count("run_id"))
    trace.run_id = std::stoi(trace.header.at("run_id"));
  return trace;
}

RunTrace read_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("trace: cannot open " + path);
  return read_trace(is);
}

std::vector<RunTrace> read_trace_dir(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunTrace> traces;
  for (const auto& file : files) traces.push_back(read_trace(file.string()));
  if (traces.empty())
    throw std::runtime_error("trace: no .csv files in " + dir);
  return traces;
}

std::optional<long> sims_at_first_crossing(const RunTrace& trace,
                                           double threshold) {
  for (const auto& row : trace.rows)
    if (row.best_verified && *row.best_verified >= threshold)
      return row.cum_estimation_sims + row.cum_verification_sims;
  return std::nullopt;
}

std::vector<StrategySummary> summarize_traces(
    const std::vector<std::pair<std::string, std::vector<RunTrace>>>& groups,
    const std::vector<double>& thresholds) {
  std::vector<StrategySummary> summaries;
  for (const auto& [label, traces] : groups) {
    StrategySummary summary;
    summary.label = label;
    summary.n_runs = static_cast<int>(traces.size());
    for (double threshold : thresholds) {
      ThresholdSummary ts;
      ts.threshold = threshold;
      long total_sims = 0;
      int reached = 0;
      for (const auto& trace : traces) {
        if (auto sims = sims_at_first_crossing(trace, threshold)) {
          ++reached;
          total_sims += *sims;
        }
      }
      ts.fraction_reached =
          traces.empty() ? 0.0 : static_cast<double>(reached) / traces.size();
      ts.mean_sims_at_crossing =
          reached ? static_cast<double>(total_sims) / reached
                  : std::numeric_limits<double>::quiet_NaN();
      summary.thresholds.push_back(ts);
    }
    summaries.push_back(std::move(summary));
  }
  return summaries;
}

std::vector<StrategySummary> compare_strategies(
    const std::vector<RunConfig>& configs, const std::vector<double>& thresholds) {
  if (configs.empty()) throw std::invalid_argument("compare: no configs");
  for (const auto& config : configs) {
    if (!(config.problem == configs.front().problem) ||
        config.master_seed != configs.front().master_seed)
      throw std::invalid_argument("compare: configs must share the same problem");
  }
  std::vector<std::pair<std::string, std::vector<RunTrace>>> groups;
  for (const auto& config : configs)
    groups.emplace_back(to_string(config.strategy), run_campaign(config));
  return summarize_traces(groups, thresholds);
}

void print_summary_table(const std::vector<StrategySummary>& summaries,
                         std::ostream& os) {
  os << "strategy,runs,threshold,fraction_reached,mean_sims_at_crossing\n";
  for (const auto& summary : summaries)
    for (const auto& ts : summary.thresholds) {
      os << summary.label << ',' << summary.n_runs << ','
         << format_double(ts.threshold) << ',' << format_double(ts.fraction_reached)
         << ',';
      if (std::isnan(ts.mean_sims_at_crossing))
        os << "never";
      else
        os << format_double(ts.mean_sims_at_crossing);
      os << '\n';
    }
}

std::map<std::string, std::string> read_key_value_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> keys;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config: malformed line: " + line);
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    keys[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return keys;
}

RunConfig config_from_keys(const std::map<std::string, std::string>& keys) {
  RunConfig config;
  auto unused = keys;
  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = unused.find(key);
    if (it == unused.end()) return std::nullopt;
    std::string value = it->second;
    unused.erase(it);
    return value;
  };

  if (auto v = take("problem")) config.problem.name = *v;
  if (auto v = take("dimension")) config.problem.dimension = std::stoi(*v);
  if (auto v = take("n_realizations")) {
    config.problem.n_realizations = std::stoi(*v);
    config.estimator.n_realizations = config.problem.n_realizations;
  }
  if (auto v = take("shift_scale")) config.problem.shift_scale = std::stod(*v);
  if (auto v = take("field_nx")) config.problem.field.nx = std::stoi(*v);
  if (auto v = take("field_ny")) config.problem.field.ny = std::stoi(*v);
  if (auto v = take("field_cell_size")) config.problem.field.cell_size = std::stod(*v);
  if (auto v = take("field_correlation_cells"))
    config.problem.field.correlation_cells = std::stod(*v);
  if (auto v = take("field_log_mean")) config.problem.field.log_mean = std::stod(*v);
  if (auto v = take("field_log_std")) config.problem.field.log_std = std::stod(*v);
  if (auto v = take("econ_scale")) config.problem.economics.scale = std::stod(*v);
  if (auto v = take("econ_optimal_spacing"))
    config.problem.economics.optimal_spacing = std::stod(*v);
  if (auto v = take("econ_well_cost"))
    config.problem.economics.well_cost = std::stod(*v);
  if (auto v = take("econ_bound_penalty"))
    config.problem.economics.bound_penalty = std::stod(*v);
  if (auto v = take("econ_path_samples"))
    config.problem.economics.path_samples = std::stoi(*v);
  if (auto v = take("strategy")) config.strategy = strategy_from_string(*v);
  if (auto v = take("lambda")) config.lambda = std::stoi(*v);
  if (auto v = take("m0")) config.m0 = parse_vector(*v);
  if (auto v = take("sigma0")) config.sigma0 = std::stod(*v);
  if (auto v = take("budget")) config.budget_simulations = std::stol(*v);
  if (auto v = take("runs")) config.n_runs = std::stoi(*v);
  if (auto v = take("master_seed")) config.master_seed = std::stoull(*v);
  if (auto v = take("verify")) config.verify = verify_policy_from_string(*v);
  if (auto v = take("nsim")) config.estimator.bootstrap_threshold = std::stoi(*v);
  if (auto v = take("ns1")) config.estimator.bootstrap_samples = std::stoi(*v);
  if (auto v = take("ns2")) config.estimator.main_samples = std::stoi(*v);
  if (auto v = take("nnmax")) config.estimator.max_neighbors = std::stoi(*v);
  if (auto v = take("dmax")) config.estimator.selection_distance = std::stod(*v);
  if (auto v = take("risk")) config.estimator.risk_factor = std::stod(*v);
  if (auto v = take("r10")) config.estimator.percentile_weights[0] = std::stod(*v);
  if (auto v = take("r50")) config.estimator.percentile_weights[1] = std::stod(*v);
  if (auto v = take("r90")) config.estimator.percentile_weights[2] = std::stod(*v);
  if (auto v = take("use_std_term")) config.estimator.use_std_term = *v == "1";
  if (auto v = take("intra_generation_visibility"))
    config.estimator.intra_generation_visibility = *v == "1";
  if (auto v = take("distance_scaling"))
    config.distance_scaling =
        *v == "sigma2C" ? DistanceScaling::SigmaSqC : DistanceScaling::C;
  unused.erase("run_id");  // present when re-reading a trace header

  if (!unused.empty())
    throw std::invalid_argument("config: unknown key: " + unused.begin()->first);
  return config;
}

std::map<std::string, std::string> config_to_keys(const RunConfig& config) {
  std::map<std::string, std::string> keys;
  keys["problem"] = config.problem.name;
  keys["dimension"] = std::to_string(config.problem.dimension);
  keys["n_realizations"] = std::to_string(config.problem.n_realizations);
  keys["shift_scale"] = format_double(config.problem.shift_scale);
  keys["field_nx"] = std::to_string(config.problem.field.nx);
  keys["field_ny"] = std::to_string(config.problem.field.ny);
  keys["field_cell_size"] = format_double(config.problem.field.cell_size);
  keys["field_correlation_cells"] =
      format_double(config.problem.field.correlation_cells);
  keys["field_log_mean"] = format_double(config.problem.field.log_mean);
  keys["field_log_std"] = format_double(config.problem.field.log_std);
  keys["econ_scale"] = format_double(config.problem.economics.scale);
  keys["econ_optimal_spacing"] =
      format_double(config.problem.economics.optimal_spacing);
  keys["econ_well_cost"] = format_double(config.problem.economics.well_cost);
  keys["econ_bound_penalty"] =
      format_double(config.problem.economics.bound_penalty);
  keys["econ_path_samples"] =
      std::to_string(config.problem.economics.path_samples);
  keys["strategy"] = to_string(config.strategy);
  keys["lambda"] = std::to_string(config.lambda);
  if (config.m0) keys["m0"] = format_vector(*config.m0);
  keys["sigma0"] = format_double(config.sigma0);
  keys["budget"] = std::to_string(config.budget_simulations);
  keys["runs"] = std::to_string(config.n_runs);
  keys["master_seed"] = std::to_string(config.master_seed);
  keys["verify"] = to_string(config.verify);
  keys["nsim"] = std::to_string(config.estimator.bootstrap_threshold);
  keys["ns1"] = std::to_string(config.estimator.bootstrap_samples);
  keys["ns2"] = std::to_string(config.estimator.main_samples);
  keys["nnmax"] = std::to_string(config.estimator.max_neighbors);
  keys["dmax"] = format_double(config.estimator.selection_distance);
  keys["risk"] = format_double(config.estimator.risk_factor);
  keys["r10"] = format_double(config.estimator.percentile_weights[0]);
  keys["r50"] = format_double(config.estimator.percentile_weights[1]);
  keys["r90"] = format_double(config.estimator.percentile_weights[2]);
  keys["use_std_term"] = config.estimator.use_std_term ? "1" : "0";
  keys["intra_generation_visibility"] =
      config.estimator.intra_generation_visibility ? "1" : "0";
  keys["distance_scaling"] =
      config.distance_scaling == DistanceScaling::C ? "C" : "sigma2C";
  return keys;
}

}  // namespace ensopt
