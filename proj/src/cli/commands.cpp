#include "mcuq/cli.hpp"

#include "manifest.hpp"
#include "mcuq/covmax.hpp"
#include "mcuq/csv.hpp"
#include "mcuq/error.hpp"
#include "mcuq/estimator.hpp"
#include "mcuq/synthgen.hpp"
#include "mcuq/uq.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <thread>

namespace mcuq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  long rank = 0;
  double p = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  int max_iters = 2000;
  double grad_tol = 1e-7;
  std::uint64_t seed = 0;
  long rows = 0;
  long cols = 0;
  CLI::Option* p_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* eta_opt = nullptr;
  CLI::Option* rows_opt = nullptr;
  CLI::Option* cols_opt = nullptr;
};

void add_fit_options(CLI::App* cmd, FitOptions& fo) {
  cmd->add_option("--rank", fo.rank, "Target rank r")->required();
  fo.p_opt = cmd->add_option("--p", fo.p, "Known sampling rate (default: |Ω|/(mn))");
  fo.lambda_opt = cmd->add_option("--lambda", fo.lambda, "Regularizer (default: 0.1 σ̂ log n sqrt(np))");
  fo.eta_opt = cmd->add_option("--eta", fo.eta, "Initial step size (default: 0.5/σ₁)");
  cmd->add_option("--max-iters", fo.max_iters, "Gradient iteration budget")->capture_default_str();
  cmd->add_option("--grad-tol", fo.grad_tol, "Relative gradient-norm tolerance")->capture_default_str();
  cmd->add_option("--seed", fo.seed, "Seed")->capture_default_str();
  fo.rows_opt = cmd->add_option("--rows", fo.rows, "Row count (default: max i + 1)");
  fo.cols_opt = cmd->add_option("--cols", fo.cols, "Column count (default: max j + 1)");
}

FitConfig to_fit_config(const FitOptions& fo) {
  FitConfig cfg;
  cfg.rank = fo.rank;
  if (fo.lambda_opt->count()) cfg.lambda = fo.lambda;
  if (fo.eta_opt->count()) cfg.eta = fo.eta;
  cfg.max_iters = fo.max_iters;
  cfg.grad_tol = fo.grad_tol;
  cfg.seed = fo.seed;
  cfg.validate();
  return cfg;
}

MaskedObservations load_observations(const fs::path& input, const FitOptions& fo) {
  std::vector<Observation> entries = csv::read_triplets(input);
  Index rows = 0;
  Index cols = 0;
  for (const Observation& e : entries) {
    rows = std::max(rows, e.row + 1);
    cols = std::max(cols, e.col + 1);
  }
  if (fo.rows_opt->count()) rows = fo.rows;
  if (fo.cols_opt->count()) cols = fo.cols;
  std::optional<double> p;
  if (fo.p_opt->count()) p = fo.p;
  return MaskedObservations::create(rows, cols, std::move(entries), p);
}

json fit_config_json(const FitConfig& cfg, const MaskedObservations& obs) {
  json j;
  j["rank"] = cfg.rank;
  j["lambda"] = cfg.lambda ? json(*cfg.lambda) : json("auto");
  j["eta"] = cfg.eta ? json(*cfg.eta) : json("auto");
  j["max_iters"] = cfg.max_iters;
  j["grad_tol"] = cfg.grad_tol;
  j["seed"] = cfg.seed;
  j["rows"] = obs.rows();
  j["cols"] = obs.cols();
  j["p"] = obs.p();
  j["p_estimated"] = obs.p_estimated();
  return j;
}

json fit_diagnostics(const DebiasedEstimate& est) {
  return {{"iters_used", est.iters_used},
          {"final_grad_norm", est.final_grad_norm},
          {"lambda_used", est.lambda_used},
          {"p_used", est.p_used}};
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

fs::path manifest_path(const std::string& explicit_path, const fs::path& output) {
  return explicit_path.empty() ? fs::path(output.string() + ".manifest.json") : fs::path(explicit_path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("MCUQ_THREADS"); env && *env) {
    try {
      requested = std::stoi(env);
    } catch (const std::exception&) {
      throw UsageError("MCUQ_THREADS must be an integer");
    }
  }
  if (requested <= 0) requested = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return requested;
}

// ---- simulation config -------------------------------------------------

template <typename T>
T field(const json& doc, const char* name) {
  try {
    return doc.at(name).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config field '") + name + "' is missing or has the wrong type");
  }
}

template <typename T>
T field_or(const json& doc, const char* name, T fallback) {
  return doc.contains(name) ? field<T>(doc, name) : fallback;
}

SimConfig parse_sim_config(const json& doc) {
  static const std::set<std::string> known = {"m", "n", "r", "p", "mean_target", "noise", "sigma",
                                              "trials", "seed", "variance_source", "level", "fit",
                                              "tracked_entry"};
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw std::invalid_argument("unknown config field '" + item.key() + "'");

  SimConfig cfg;
  cfg.m = field<long>(doc, "m");
  cfg.n = field<long>(doc, "n");
  cfg.r = field<long>(doc, "r");
  cfg.p = field<double>(doc, "p");
  cfg.mean_target = field<double>(doc, "mean_target");
  cfg.trials = field_or<int>(doc, "trials", 1);
  cfg.seed = field_or<std::uint64_t>(doc, "seed", 0);
  cfg.level = field_or<double>(doc, "level", 0.95);

  const std::string noise = field_or<std::string>(doc, "noise", "poisson");
  if (noise == "poisson") {
    cfg.noise = PoissonNoise{};
  } else if (noise == "binary") {
    cfg.noise = BinaryNoise{};
  } else if (noise == "gaussian") {
    cfg.noise = HomogeneousGaussian{field<double>(doc, "sigma")};
  } else {
    throw std::invalid_argument("config field 'noise' must be poisson, binary or gaussian");
  }

  const std::string source = field_or<std::string>(doc, "variance_source", "oracle");
  if (source == "oracle") {
    cfg.variance_source = VarianceSource::Oracle;
  } else if (source == "plugin") {
    cfg.variance_source = VarianceSource::Plugin;
  } else if (source == "residual") {
    cfg.variance_source = VarianceSource::Residual;
  } else {
    throw std::invalid_argument("config field 'variance_source' must be oracle, plugin or residual");
  }

  if (doc.contains("fit")) {
    const json& f = doc.at("fit");
    static const std::set<std::string> fit_known = {"lambda", "eta", "max_iters", "grad_tol", "seed"};
    if (!f.is_object()) throw std::invalid_argument("config field 'fit' must be an object");
    for (const auto& item : f.items())
      if (!fit_known.count(item.key()))
        throw std::invalid_argument("unknown config field 'fit." + item.key() + "'");
    if (f.contains("lambda")) cfg.fit.lambda = field<double>(f, "lambda");
    if (f.contains("eta")) cfg.fit.eta = field<double>(f, "eta");
    cfg.fit.max_iters = field_or<int>(f, "max_iters", cfg.fit.max_iters);
    cfg.fit.grad_tol = field_or<double>(f, "grad_tol", cfg.fit.grad_tol);
    cfg.fit.seed = field_or<std::uint64_t>(f, "seed", cfg.fit.seed);
  }
  cfg.validate();
  return cfg;
}

json sim_config_json(const SimConfig& cfg) {
  json j;
  j["m"] = cfg.m;
  j["n"] = cfg.n;
  j["r"] = cfg.r;
  j["p"] = cfg.p;
  j["mean_target"] = cfg.mean_target;
  j["noise"] = std::string(to_string(kind_of(cfg.noise)));
  if (kind_of(cfg.noise) == NoiseKind::HomogeneousGaussian)
    j["sigma"] = std::get<HomogeneousGaussian>(cfg.noise).sigma;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["variance_source"] = std::string(to_string(cfg.variance_source));
  j["level"] = cfg.level;
  j["fit"] = {{"lambda", cfg.fit.lambda ? json(*cfg.fit.lambda) : json("auto")},
              {"eta", cfg.fit.eta ? json(*cfg.fit.eta) : json("auto")},
              {"max_iters", cfg.fit.max_iters},
              {"grad_tol", cfg.fit.grad_tol},
              {"seed", cfg.fit.seed}};
  return j;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

EntryIndex parse_entry(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    std::size_t used_i = 0;
    std::size_t used_j = 0;
    const long i = std::stol(text.substr(0, comma), &used_i);
    const long j = std::stol(text.substr(comma + 1), &used_j);
    if (used_i != comma || used_j != text.size() - comma - 1 || i < 0 || j < 0)
      throw std::invalid_argument("");
    return {i, j};
  } catch (const std::exception&) {
    throw UsageError("--entry must look like i,j with 0-based indices");
  }
}

json report_json(const SimConfig& cfg, const CoverageReport& rep) {
  json j;
  j["config"] = sim_config_json(cfg);
  j["trials"] = rep.trial_coverage.size();
  j["skipped"] = rep.skipped_trials.size();
  j["skipped_trials"] = rep.skipped_trials;
  j["trial_coverage"] = rep.trial_coverage;
  j["mean_coverage"] = rep.mean_coverage;
  j["std_coverage"] = rep.std_coverage;
  j["std_flag"] = rep.single_trial ? json("single_trial") : json(nullptr);
  j["tracked_entry"] = {rep.tracked_entry.row, rep.tracked_entry.col};
  j["z_count"] = rep.z.size();
  j["z_excluded"] = rep.z_excluded;
  j["ks"] = rep.ks;
  j["fallback_entries"] = rep.fallback_entries;
  return j;
}

// ---- commands ------------------------------------------------------------

int cmd_complete(const fs::path& input, const FitOptions& fo, const fs::path& output,
                 const std::string& manifest_arg, const std::vector<std::string>& args,
                 std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const MaskedObservations obs = load_observations(input, fo);
  const FitConfig cfg = to_fit_config(fo);
  const DebiasedEstimate est = fit(obs, cfg);

  {
    auto file = open_output(output);
    csv::write_row(file, {"i", "j", "value"});
    for (Index i = 0; i < est.Md.rows(); ++i)
      for (Index j = 0; j < est.Md.cols(); ++j)
        csv::write_row(file, {std::to_string(i), std::to_string(j), csv::format_double(est.Md(i, j))});
  }

  Manifest man("complete", args);
  man.add_input(input);
  man.add_output(output);
  man.config() = fit_config_json(cfg, obs);
  man.set_seed(cfg.seed);
  man.diagnostics() = fit_diagnostics(est);
  man.set_wall_seconds(seconds_since(t0));
  man.write(manifest_path(manifest_arg, output));
  out << "completed " << est.Md.rows() << "x" << est.Md.cols() << " matrix in " << est.iters_used
      << " iterations\n";
  return kExitOk;
}

int cmd_intervals(const fs::path& input, const FitOptions& fo, const std::string& model,
                  double level, const std::string& entries_path, double threshold,
                  const fs::path& output, const std::string& manifest_arg,
                  const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const MaskedObservations obs = load_observations(input, fo);
  const FitConfig cfg = to_fit_config(fo);
  const DebiasedEstimate est = fit(obs, cfg);

  VarianceField field;
  std::size_t clamped = 0;
  if (model == "residual") {
    field = residual_variance_field(obs, est);
  } else {
    const Rank1Model kind = model == "gaussian" ? Rank1Model::Gaussian
                            : model == "poisson" ? Rank1Model::Poisson
                                                 : Rank1Model::Binary;
    PluginVariance pv = empirical_plugin_variance(obs, est, kind);
    clamped = pv.clamped;
    field = std::move(pv.field);
  }
  if (clamped > 0) {
    const double frac = static_cast<double>(clamped) / static_cast<double>(est.Md.size());
    err << (model == "binary" && frac > 0.1 ? "warning: " : "note: ") << clamped
        << " fitted entries clamped into the " << model << " mean domain\n";
  }

  const DegeneracyFallback fb = default_fallback(obs, est, threshold);
  const IntervalField iv = intervals(est.Md, field, level, fb);

  std::vector<EntryIndex> entries;
  if (!entries_path.empty()) {
    const csv::Table t = csv::read_table(fs::path(entries_path), {"i", "j"});
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
      const auto& row = t.rows[k];
      if (row[0] < 0 || row[1] < 0 || row[0] >= static_cast<double>(obs.rows()) ||
          row[1] >= static_cast<double>(obs.cols()) || row[0] != std::floor(row[0]) ||
          row[1] != std::floor(row[1]))
        throw csv::ParseError("entry index out of range", k + 2);
      entries.push_back({static_cast<Index>(row[0]), static_cast<Index>(row[1])});
    }
  } else {
    for (Index i = 0; i < obs.rows(); ++i)
      for (Index j = 0; j < obs.cols(); ++j) entries.push_back({i, j});
  }

  {
    auto file = open_output(output);
    csv::write_row(file, {"i", "j", "md", "s", "lo", "hi"});
    for (const EntryIndex& e : entries) {
      csv::write_row(file, {std::to_string(e.row), std::to_string(e.col),
                            csv::format_double(est.Md(e.row, e.col)),
                            csv::format_double(field.s(e.row, e.col)),
                            csv::format_double(iv.lo(e.row, e.col)),
                            csv::format_double(iv.hi(e.row, e.col))});
    }
  }

  Manifest man("intervals", args);
  man.add_input(input);
  if (!entries_path.empty()) man.add_input(entries_path);
  man.add_output(output);
  man.config() = fit_config_json(cfg, obs);
  man.config()["model"] = model;
  man.config()["level"] = level;
  man.config()["fallback_threshold"] = threshold;
  man.set_seed(cfg.seed);
  man.diagnostics() = fit_diagnostics(est);
  man.diagnostics()["clamped_entries"] = clamped;
  man.diagnostics()["fallback_entries"] = iv.fallback_count;
  man.set_wall_seconds(seconds_since(t0));
  man.write(manifest_path(manifest_arg, output));
  out << "wrote " << entries.size() << " intervals (" << model << ", level " << level << ")\n";
  return kExitOk;
}

int cmd_simulate(const fs::path& config_path, const fs::path& output, const std::string& z_out,
                 int threads, const std::string& manifest_arg, const std::vector<std::string>& args,
                 std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const json doc = load_json(config_path);
  const SimConfig cfg = parse_sim_config(doc);
  EntryIndex tracked{0, 0};
  if (doc.contains("tracked_entry")) {
    const auto te = field<std::vector<long>>(doc, "tracked_entry");
    if (te.size() != 2) throw std::invalid_argument("config field 'tracked_entry' must be [i, j]");
    tracked = {te[0], te[1]};
  }
  const CoverageReport rep = run_coverage_experiment(cfg, resolve_threads(threads), tracked);

  {
    auto file = open_output(output);
    file << report_json(cfg, rep).dump(2) << '\n';
  }
  if (!z_out.empty()) {
    auto file = open_output(z_out);
    csv::write_row(file, {"trial", "z"});
    for (std::size_t k = 0; k < rep.z.size(); ++k)
      csv::write_row(file, {std::to_string(rep.z_trials[k]), csv::format_double(rep.z[k])});
  }

  Manifest man("simulate", args);
  man.add_input(config_path);
  man.add_output(output);
  if (!z_out.empty()) man.add_output(z_out);
  man.config() = sim_config_json(cfg);
  man.set_seed(cfg.seed);
  man.diagnostics() = {{"experiment_seconds", rep.seconds}};
  man.set_wall_seconds(seconds_since(t0));
  man.write(manifest_path(manifest_arg, output));

  std::ostringstream line;
  line << std::fixed << std::setprecision(4) << "coverage " << rep.mean_coverage << " ± "
       << rep.std_coverage << " over " << rep.trial_coverage.size() - rep.skipped_trials.size()
       << " trials";
  if (rep.single_trial) line << " (single trial: std not estimable)";
  if (!rep.skipped_trials.empty()) line << ", " << rep.skipped_trials.size() << " skipped";
  out << line.str() << '\n';
  return kExitOk;
}

int cmd_distcheck(const fs::path& config_path, const std::string& entry_text, const fs::path& output,
                  const std::string& summary_arg, int threads, const std::string& manifest_arg,
                  const std::vector<std::string>& args, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const EntryIndex entry = parse_entry(entry_text);
  const json doc = load_json(config_path);
  const SimConfig cfg = parse_sim_config(doc);
  const CoverageReport rep = run_distribution_check(cfg, entry, resolve_threads(threads));

  {
    auto file = open_output(output);
    csv::write_row(file, {"bin_left", "bin_right", "count"});
    for (std::size_t b = 0; b < rep.hist.count.size(); ++b)
      csv::write_row(file, {csv::format_double(rep.hist.left[b]), csv::format_double(rep.hist.right[b]),
                            std::to_string(rep.hist.count[b])});
  }
  const fs::path summary = summary_arg.empty() ? fs::path(output.string() + ".summary.json")
                                               : fs::path(summary_arg);
  {
    json j = report_json(cfg, rep);
    j["z"] = rep.z;
    auto file = open_output(summary);
    file << j.dump(2) << '\n';
  }

  Manifest man("distcheck", args);
  man.add_input(config_path);
  man.add_output(output);
  man.add_output(summary);
  man.config() = sim_config_json(cfg);
  man.config()["entry"] = {entry.row, entry.col};
  man.set_seed(cfg.seed);
  man.diagnostics() = {{"experiment_seconds", rep.seconds}};
  man.set_wall_seconds(seconds_since(t0));
  man.write(manifest_path(manifest_arg, output));

  std::ostringstream line;
  line << std::fixed << std::setprecision(4) << "KS " << rep.ks << " over " << rep.z.size()
       << " samples, " << rep.z_excluded << " excluded";
  out << line.str() << '\n';
  return kExitOk;
}

int cmd_covmax(const fs::path& input, double budget, const std::string& truth_path,
               const std::string& method, const fs::path& output, const std::string& summary_arg,
               const std::string& manifest_arg, const std::vector<std::string>& args,
               std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (budget < 0.0) throw UsageError("--budget must be >= 0");
  const csv::Table t = csv::read_table(input, {"i", "j", "md", "s"});
  AllocationProblem prob;
  prob.budget = budget;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    if (row[0] < 0 || row[1] < 0 || row[0] != std::floor(row[0]) || row[1] != std::floor(row[1]))
      throw csv::ParseError("index must be a non-negative integer", k + 2);
    if (row[3] < 0) throw csv::ParseError("s must be >= 0", k + 2);
    prob.entries.push_back({static_cast<Index>(row[0]), static_cast<Index>(row[1])});
    prob.center.push_back(row[2]);
    prob.s.push_back(row[3]);
  }
  if (prob.entries.empty()) throw std::invalid_argument("no entries to allocate");

  const IntervalAllocation alloc = method == "greedy" ? allocate_greedy(prob) : allocate(prob);

  std::optional<double> realized;
  if (!truth_path.empty()) {
    std::map<std::pair<Index, Index>, double> truth;
    for (const Observation& o : csv::read_triplets(fs::path(truth_path))) truth[{o.row, o.col}] = o.value;
    std::vector<double> aligned;
    for (const EntryIndex& e : prob.entries) {
      const auto it = truth.find({e.row, e.col});
      if (it == truth.end())
        throw std::invalid_argument("truth file has no row for entry (" + std::to_string(e.row) + "," +
                                    std::to_string(e.col) + ")");
      aligned.push_back(it->second);
    }
    realized = realized_coverage(alloc, aligned);
  }

  {
    auto file = open_output(output);
    csv::write_row(file, {"i", "j", "a", "b"});
    for (std::size_t e = 0; e < alloc.entries.size(); ++e)
      csv::write_row(file, {std::to_string(alloc.entries[e].row), std::to_string(alloc.entries[e].col),
                            csv::format_double(alloc.intervals[e].lo),
                            csv::format_double(alloc.intervals[e].hi)});
  }
  const fs::path summary = summary_arg.empty() ? fs::path(output.string() + ".summary.json")
                                               : fs::path(summary_arg);
  {
    json j;
    j["expected_coverage"] = alloc.expected_coverage;
    if (realized) j["realized_coverage"] = *realized;
    j["multiplier"] = alloc.multiplier;
    j["total_length"] = alloc.total_length;
    j["budget"] = budget;
    j["entries"] = alloc.entries.size();
    j["degenerate_entries"] = alloc.degenerate;
    j["method"] = method;
    auto file = open_output(summary);
    file << j.dump(2) << '\n';
  }

  Manifest man("covmax", args);
  man.add_input(input);
  if (!truth_path.empty()) man.add_input(truth_path);
  man.add_output(output);
  man.add_output(summary);
  man.config() = {{"budget", budget}, {"method", method}};
  man.set_seed(0);
  man.set_wall_seconds(seconds_since(t0));
  man.write(manifest_path(manifest_arg, output));

  std::ostringstream line;
  line << std::setprecision(6) << "expected coverage " << alloc.expected_coverage;
  if (realized) line << ", realized coverage " << *realized;
  out << line.str() << '\n';
  return kExitOk;
}

int cmd_rerun(const fs::path& manifest, int threads, std::ostream& out, std::ostream& err) {
  const json doc = load_json(manifest);
  std::vector<std::string> args;
  std::string cwd;
  try {
    args = doc.at("args").get<std::vector<std::string>>();
    cwd = doc.at("cwd").get<std::string>();
  } catch (const json::exception&) {
    throw std::invalid_argument("manifest lacks args or cwd");
  }
  if (args.empty() || args.front() == "rerun") throw std::invalid_argument("manifest has no replayable command");
  if (threads > 0) {
    std::vector<std::string> replaced;
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--threads" && k + 1 < args.size()) {
        ++k;
        continue;
      }
      if (args[k].rfind("--threads=", 0) == 0) continue;
      replaced.push_back(args[k]);
    }
    if (args.front() == "simulate" || args.front() == "distcheck") {
      replaced.push_back("--threads");
      replaced.push_back(std::to_string(threads));
    }
    args = std::move(replaced);
  }
  const fs::path here = fs::current_path();
  fs::current_path(cwd);
  int code = kExitUsage;
  try {
    code = run(args, out, err);
  } catch (...) {
    fs::current_path(here);
    throw;
  }
  fs::current_path(here);
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"De-biased low-rank matrix completion with entrywise confidence intervals", "mcuq"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string input, output, manifest, model = "gaussian", entries_path, config, entry, summary,
                                      truth, method = "waterfill";
  double level = 0.95;
  double threshold = 1e-8;
  double budget = 0.0;
  int threads = 0;
  FitOptions complete_fit;
  FitOptions intervals_fit;

  auto* complete = app.add_subcommand("complete", "Fit the de-biased estimate and write M^d");
  complete->add_option("input", input, "Triplet CSV i,j,value")->required()->check(CLI::ExistingFile);
  add_fit_options(complete, complete_fit);
  complete->add_option("-o,--output", output, "Output CSV i,j,value")->required();
  complete->add_option("--manifest", manifest, "Manifest path (default: <output>.manifest.json)");

  auto* iv = app.add_subcommand("intervals", "Entrywise confidence intervals");
  iv->add_option("input", input, "Triplet CSV i,j,value")->required()->check(CLI::ExistingFile);
  add_fit_options(iv, intervals_fit);
  iv->add_option("--model", model, "Variance model")
      ->required()
      ->check(CLI::IsMember({"gaussian", "poisson", "binary", "residual"}));
  iv->add_option("--level", level, "Confidence level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  iv->add_option("--entries", entries_path, "CSV i,j of entries to report (default: all)");
  iv->add_option("--fallback-threshold", threshold,
                 "Relative s below which the entrywise bound replaces the Gaussian interval")
      ->capture_default_str();
  iv->add_option("-o,--output", output, "Output CSV i,j,md,s,lo,hi")->required();
  iv->add_option("--manifest", manifest, "Manifest path");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo coverage experiment");
  sim->add_option("--config", config, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--output", output, "Coverage report JSON")->required();
  sim->add_option("--z-out", summary, "CSV of z samples for the tracked entry");
  sim->add_option("--threads", threads, "Worker threads (0: all cores; MCUQ_THREADS overrides)");
  sim->add_option("--manifest", manifest, "Manifest path");

  auto* dist = app.add_subcommand("distcheck", "Normality check of one entry across trials");
  dist->add_option("--config", config, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  dist->add_option("--entry", entry, "Entry i,j (0-based)")->required();
  dist->add_option("-o,--output", output, "Histogram CSV bin_left,bin_right,count")->required();
  dist->add_option("--summary", summary, "Summary JSON (default: <output>.summary.json)");
  dist->add_option("--threads", threads, "Worker threads (0: all cores; MCUQ_THREADS overrides)");
  dist->add_option("--manifest", manifest, "Manifest path");

  auto* cov = app.add_subcommand("covmax", "Budget-constrained interval allocation");
  cov->add_option("input", input, "CSV i,j,md,s")->required()->check(CLI::ExistingFile);
  cov->add_option("--budget", budget, "Total interval length")->required();
  cov->add_option("--truth", truth, "Triplet CSV of true values")->check(CLI::ExistingFile);
  cov->add_option("--method", method, "Solver")->capture_default_str()->check(CLI::IsMember({"waterfill", "greedy"}));
  cov->add_option("-o,--output", output, "Allocation CSV i,j,a,b")->required();
  cov->add_option("--summary", summary, "Summary JSON (default: <output>.summary.json)");
  cov->add_option("--manifest", manifest, "Manifest path");

  auto* rerun = app.add_subcommand("rerun", "Replay a command from its manifest");
  rerun->add_option("manifest", input, "Manifest JSON")->required()->check(CLI::ExistingFile);
  rerun->add_option("--threads", threads, "Override the worker count");

  std::vector<std::string> argv_store{"mcuq"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*complete) return cmd_complete(input, complete_fit, output, manifest, args, out);
    if (*iv) return cmd_intervals(input, intervals_fit, model, level, entries_path, threshold, output, manifest, args, out, err);
    if (*sim) return cmd_simulate(config, output, summary, threads, manifest, args, out);
    if (*dist) return cmd_distcheck(config, entry, output, summary, threads, manifest, args, out);
    if (*cov) return cmd_covmax(input, budget, truth, method, output, summary, manifest, args, out);
    if (*rerun) return cmd_rerun(input, threads, out, err);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const csv::ParseError& e) {
    err << "malformed input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mcuq::cli
