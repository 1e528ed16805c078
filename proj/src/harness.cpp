#include "okp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace okp {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

AgentSummary summarize(const std::string& agent, bool baseline, const std::vector<TrialRecord>& records) {
  AgentSummary s;
  s.agent = agent;
  s.baseline = baseline;
  for (const auto& r : records) {
    if (r.agent != agent) continue;
    ++s.trials;
    if (!r.pass) {
      ++s.failures;
      ++s.modes[r.failure_mode];
    }
  }
  s.failure_rate = s.trials ? static_cast<double>(s.failures) / s.trials : 0.0;
  s.failure_ci = wilson_interval(s.failures, s.trials);
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

Json::json_pointer param_pointer(const std::string& dotted) {
  if (dotted.empty()) throw ConfigError("sweep: empty parameter name");
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("sweep: malformed parameter '" + dotted + "'");
    p += "/" + part;
  }
  return Json::json_pointer(p);
}

std::string value_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

Interval wilson_interval(int k, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {k == 0 ? 0.0 : std::max(0.0, center - half), k == n ? 1.0 : std::min(1.0, center + half)};
}

Json to_json(const RunSummary& s) {
  Json agents = Json::array();
  for (const auto& a : s.agents) {
    agents.push_back({{"agent", a.agent},
                      {"baseline", a.baseline},
                      {"trials", a.trials},
                      {"failures", a.failures},
                      {"failure_rate", a.failure_rate},
                      {"failure_ci95", {a.failure_ci.lo, a.failure_ci.hi}},
                      {"modes", a.modes}});
  }
  Json checks = Json::array();
  for (const auto& c : s.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return Json{{"scenario", s.scenario}, {"task", s.task},     {"seed", s.seed},     {"trials", s.trials},
              {"agents", agents},       {"acceptance", checks}, {"passed", s.passed}};
}

std::string render_table(const RunSummary& s) {
  std::ostringstream o;
  o << "scenario " << s.scenario << " (" << s.task << "), seed " << s.seed << ", " << s.trials << " trials\n\n";
  o << std::left << std::setw(28) << "agent" << std::setw(16) << "#fail/#trial" << std::setw(10) << "rate"
    << std::setw(20) << "95% CI" << "modes\n";
  for (const auto& a : s.agents) {
    std::string modes;
    for (const auto& [m, n] : a.modes) modes += (modes.empty() ? "" : ", ") + m + " " + std::to_string(n);
    o << std::left << std::setw(28) << (a.agent + (a.baseline ? " (baseline)" : ""))
      << std::setw(16) << (std::to_string(a.failures) + "/" + std::to_string(a.trials))
      << std::setw(10) << (fixed(100.0 * a.failure_rate, 1) + "%")
      << std::setw(20) << ("[" + fixed(a.failure_ci.lo, 3) + ", " + fixed(a.failure_ci.hi, 3) + "]")
      << (modes.empty() ? "-" : modes) << "\n";
  }
  if (!s.checks.empty()) {
    o << "\n";
    for (const auto& c : s.checks) o << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  return o.str();
}

RunResult run_scenario(const Scenario& input, const RunOptions& options) {
  Scenario sc = input;
  if (options.seed) sc.seed = *options.seed;
  if (options.trials) sc.trials = *options.trials;
  if (sc.trials < 1) throw ConfigError("trials must be >= 1");
  if (options.parallel < 1) throw ConfigError("--parallel must be >= 1");

  std::vector<const AgentSpec*> specs{&sc.agent};
  if (sc.baseline) specs.push_back(&*sc.baseline);
  if (sc.baseline && sc.baseline->name() == sc.agent.name()) throw ConfigError("baseline and agent need distinct names");

  const std::size_t per_trial = specs.size();
  const std::size_t total = static_cast<std::size_t>(sc.trials) * per_trial;
  std::vector<EpisodeResult> results(total);
  const bool traces = sc.log_traces && options.out_dir.has_value();

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const int trial = static_cast<int>(i / per_trial);
      const AgentSpec& spec = *specs[i % per_trial];
      results[i] = run_episode(sc, spec, trial, trial_seed(sc.seed, static_cast<std::uint64_t>(trial)), {traces});
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.parallel), total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  RunResult out;
  for (const auto& r : results) out.records.push_back(r.record);
  RunSummary& s = out.summary;
  s.scenario = sc.name;
  s.task = to_string(sc.task);
  s.seed = sc.seed;
  s.trials = sc.trials;
  s.agents.push_back(summarize(sc.agent.name(), false, out.records));
  if (sc.baseline) s.agents.push_back(summarize(sc.baseline->name(), true, out.records));

  if (sc.acceptance.max_failure_rate) {
    const double limit = *sc.acceptance.max_failure_rate;
    const AgentSummary& a = s.agents.front();
    s.checks.push_back({"max_failure_rate", a.failure_rate <= limit,
                        a.agent + " failure rate " + fixed(a.failure_rate, 3) + " <= " + fixed(limit, 3)});
  }
  if (sc.acceptance.baseline_min_failure_rate) {
    const double limit = *sc.acceptance.baseline_min_failure_rate;
    const AgentSummary& b = s.agents.back();
    s.checks.push_back({"baseline_min_failure_rate", b.failure_rate >= limit,
                        b.agent + " failure rate " + fixed(b.failure_rate, 3) + " >= " + fixed(limit, 3)});
  }
  s.passed = std::all_of(s.checks.begin(), s.checks.end(), [](const auto& c) { return c.pass; });

  if (options.out_dir) {
    const std::filesystem::path dir = *options.out_dir;
    std::filesystem::create_directories(dir);
    std::ostringstream lines;
    for (const auto& r : out.records) lines << to_json(r).dump() << "\n";
    write_text(dir / "trials.jsonl", lines.str());
    write_text(dir / "summary.json", to_json(s).dump(2) + "\n");
    write_text(dir / "summary.txt", render_table(s));
    if (traces) {
      std::filesystem::create_directories(dir / "traces");
      for (const auto& r : results) {
        std::ostringstream t;
        for (const auto& step : r.trace) t << to_json(step).dump() << "\n";
        std::ostringstream name;
        name << r.record.agent << "_" << std::setw(4) << std::setfill('0') << r.record.trial << ".jsonl";
        write_text(dir / "traces" / name.str(), t.str());
      }
    }
  }
  return out;
}

std::filesystem::path resolve_output_dir(const Scenario& sc, const std::optional<std::string>& cli_out) {
  if (cli_out && !cli_out->empty()) return *cli_out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  const std::filesystem::path p = sc.output_dir;
  return p.is_absolute() ? p : std::filesystem::current_path() / p;
}

std::vector<Json> parse_value_list(const std::string& text) {
  std::vector<Json> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    Json v = Json::parse(item, nullptr, false);
    values.push_back(v.is_discarded() ? Json(item) : v);
  }
  return values;
}

std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& param, const std::vector<Json>& values,
                                  const RunOptions& options) {
  const Json::json_pointer ptr = param_pointer(param);
  std::vector<SweepPoint> points;
  std::ostringstream lines;
  std::ostringstream table;
  const int col = static_cast<int>(std::max<std::size_t>(16, param.size() + 2));
  table << std::left << std::setw(col) << param << std::setw(28) << "agent" << std::setw(16) << "#fail/#trial"
        << "rate\n";
  for (const Json& v : values) {
    Json doc = base.raw;
    try {
      if (!doc.contains(ptr.parent_pointer()) || !doc.at(ptr.parent_pointer()).is_object()) {
        doc[ptr.parent_pointer()] = Json::object();
      }
      doc[ptr] = v;
    } catch (const Json::exception& e) {
      throw ConfigError("sweep: cannot set '" + param + "': " + e.what());
    }
    const Scenario sc = scenario_from_json(doc, base.base_dir);
    RunOptions opt = options;
    if (options.out_dir) opt.out_dir = *options.out_dir / (param + "=" + value_text(v));
    SweepPoint point{v, run_scenario(sc, opt).summary};
    for (const auto& a : point.summary.agents) {
      lines << Json{{"param", param},
                    {"value", v},
                    {"agent", a.agent},
                    {"baseline", a.baseline},
                    {"trials", a.trials},
                    {"failures", a.failures},
                    {"failure_rate", a.failure_rate},
                    {"failure_ci95", {a.failure_ci.lo, a.failure_ci.hi}}}
                   .dump()
            << "\n";
      table << std::left << std::setw(col) << value_text(v) << std::setw(28) << a.agent << std::setw(16)
            << (std::to_string(a.failures) + "/" + std::to_string(a.trials)) << fixed(100.0 * a.failure_rate, 1)
            << "%\n";
    }
    points.push_back(std::move(point));
  }
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    write_text(*options.out_dir / "sweep.jsonl", lines.str());
    if (!values.empty()) write_text(*options.out_dir / "sweep.txt", table.str());
  }
  return points;
}

}  // namespace okp
