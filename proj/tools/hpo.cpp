#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "hpo/bench.hpp"
#include "hpo/pipeline/data.hpp"
#include "json.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;

int cmd_optimize(const hpo::ExperimentConfig& cfg) {
  const auto snap = hpo::run_experiment(cfg);
  std::size_t ok = 0;
  for (const auto& t : snap) ok += t.status == hpo::TrialStatus::ok;
  std::cout << "trials: " << snap.size() << " (ok " << ok << ", fail " << snap.size() - ok << ")\n";
  if (auto best = hpo::best_trial(snap))
    std::cout << "best loss: " << *best->loss << " (trial " << best->trial_id << ")\n";
  return 0;
}

int cmd_report(const std::filesystem::path& db, const std::string& csv) {
  if (!std::filesystem::exists(db)) throw hpo::StoreError("no trial store at '" + db.string() + "'");
  const hpo::TrialStore store(db);
  const std::string table = hpo::report_csv(store.snapshot());
  if (csv.empty()) {
    std::cout << table;
    return 0;
  }
  std::ofstream out(csv);
  if (!(out << table)) throw hpo::StoreError("cannot write '" + csv + "'");
  std::cout << "wrote " << store.size() << " rows to " << csv << '\n';
  return 0;
}

int cmd_sample(const std::string& space, int n, std::uint64_t seed) {
  const hpo::ExprGraph g = hpo::load_space(space);
  for (int i = 0; i < n; ++i) {
    const hpo::Assignment a = hpo::sample_prior(g, hpo::trial_seed(seed, i));
    nlohmann::ordered_json line = nlohmann::ordered_json::object();
    for (const auto& [label, v] : a.values) std::visit([&](auto x) { line[label] = x; }, v);
    std::cout << line.dump() << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& space) {
  const hpo::ExprGraph g = hpo::load_space(space);
  std::cout << space << ": ok, " << g.statements().size() << " statements, " << g.labels().size()
            << " hyperparameters\n";
  return 0;
}

int cmd_losses() {
  const auto& reg = hpo::builtin_losses();
  for (const auto& name : reg.names()) std::cout << name << "  " << reg.find(name)->description << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter search over declarative spaces: random search and TPE"};
  app.require_subcommand(1);

  hpo::ExperimentConfig cfg;
  std::string space, algo = "tpe", db, csv, loss;
  int n = 1;
  std::uint64_t seed = 0;

  auto* opt = app.add_subcommand("optimize", "Run or resume an experiment");
  opt->add_option("--space", space, "Search space file")->required();
  opt->add_option("--loss", loss, "Registered loss name (see `losses`)")->required();
  opt->add_option("--algo", algo, "random or tpe")->check(CLI::IsMember({"random", "tpe"}))->capture_default_str();
  opt->add_option("--max-trials", cfg.max_trials, "Finished trials to reach")->check(CLI::PositiveNumber)->capture_default_str();
  opt->add_option("--workers", cfg.workers, "Evaluation threads")->check(CLI::PositiveNumber)->capture_default_str();
  opt->add_option("--seed", cfg.seed, "Experiment seed")->capture_default_str();
  opt->add_option("--db", db, "Trial store (JSON lines)")->required();
  opt->add_option("--n-startup", cfg.tpe.n_startup, "TPE: prior draws before modelling")->check(CLI::NonNegativeNumber)->capture_default_str();
  opt->add_option("--ramp-flat", cfg.tpe.ramp_flat, "TPE: newest trials at full weight")->check(CLI::PositiveNumber)->capture_default_str();
  opt->add_option("--n-candidates", cfg.tpe.n_candidates, "TPE: candidates per hyperparameter")->check(CLI::PositiveNumber)->capture_default_str();

  auto* rep = app.add_subcommand("report", "Best-so-far table and best assignment as CSV");
  rep->add_option("--db", db, "Trial store")->required();
  rep->add_option("--csv", csv, "Write the table here instead of stdout");

  auto* smp = app.add_subcommand("sample", "Draw assignments from the prior, one JSON object per line");
  smp->add_option("--space", space, "Search space file")->required();
  smp->add_option("--n", n, "Number of samples")->check(CLI::NonNegativeNumber)->capture_default_str();
  smp->add_option("--seed", seed, "Seed")->capture_default_str();

  auto* val = app.add_subcommand("validate", "Parse and check a space file");
  val->add_option("--space", space, "Search space file")->required();

  auto* los = app.add_subcommand("losses", "List registered losses");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*opt) {
      cfg.space = space;
      cfg.loss = loss;
      cfg.algorithm = algo == "random" ? hpo::Algorithm::random : hpo::Algorithm::tpe;
      cfg.store = db;
      return cmd_optimize(cfg);
    }
    if (*rep) return cmd_report(db, csv);
    if (*smp) return cmd_sample(space, n, seed);
    if (*val) return cmd_validate(space);
    if (*los) return cmd_losses();
  } catch (const hpo::ParseError& e) {
    std::cerr << space << ": " << e.what() << '\n';
    return kData;
  } catch (const hpo::SpaceError& e) {
    std::cerr << space << ": " << e.what() << '\n';
    return kData;
  } catch (const hpo::StoreError& e) {
    std::cerr << "store error: " << e.what() << '\n';
    return kData;
  } catch (const hpo::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
