// mreal: prepare, synth, train, generate, evaluate.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mreal/checkpoint.hpp"
#include "mreal/config.hpp"
#include "mreal/data.hpp"
#include "mreal/error.hpp"
#include "mreal/generate.hpp"
#include "mreal/log.hpp"
#include "mreal/metrics.hpp"
#include "mreal/synthgen.hpp"
#include "mreal/training.hpp"

namespace fs = std::filesystem;
using namespace mreal;

namespace {

NormScheme parse_scheme(const std::string& s) {
  if (s == "six_sigma") return NormScheme::six_sigma;
  if (s == "minmax_tanh") return NormScheme::minmax_tanh;
  throw Error("unknown normalization scheme '" + s + "'");
}

struct PrepareArgs {
  std::string data, out, scheme = "six_sigma";
};

void run_prepare(const PrepareArgs& a) {
  const auto raw = ingest_csv(a.data);
  const auto stats = compute_stats(raw, parse_scheme(a.scheme));
  fs::create_directories(a.out);
  write_stats(stats, fs::path(a.out) / "stats.txt");
  write_csv(raw, fs::path(a.out) / "data.csv");
  write_csv(normalize(raw, stats), fs::path(a.out) / "normalized.csv");
  spdlog::info("prepared {} samples of {} appliances", raw.size(), raw.n_app());
}

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
};

void run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  if (!a.config.empty()) cfg.apply(read_kv_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.n) cfg.n_samples = *a.n;
  write_csv(generate_synthetic(cfg), a.out);
}

struct TrainArgs {
  std::string config, data, out, resume, stats;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
};

void run_train(const TrainArgs& a) {
  TrainConfig cfg;
  ArchConfig arch;
  if (!a.config.empty()) {
    const auto rest = apply_arch(arch, cfg.apply(read_kv_file(a.config)));
    if (!rest.empty()) throw Error("unknown config key '" + rest.begin()->first + "'");
  }
  if (a.steps) cfg.total_steps = *a.steps;
  if (a.seed) cfg.seed = *a.seed;
  const auto raw = ingest_csv(a.data);
  const auto stats = a.stats.empty() ? compute_stats(raw) : read_stats(a.stats);
  TrainOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume = fs::path(a.resume);
  const auto final_dir = train(cfg, arch, normalize(raw, stats), opts);
  std::cout << final_dir.string() << '\n';
}

struct GenerateArgs {
  std::string checkpoint, out, plot_dir;
  GenerateRequest req;
};

void run_generate(const GenerateArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const auto ds = generate_samples(ckpt, a.req);
  write_csv(ds, a.out);
  if (!a.plot_dir.empty()) write_plot_files(ds, a.plot_dir);
}

struct EvaluateArgs {
  std::string real, generated, out;
  EvalOptions opts;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto report = evaluate(ingest_csv(a.real), ingest_csv(a.generated), a.opts);
  if (a.out.empty() || a.out == "-") {
    write_report(report, std::cout);
  } else {
    write_report(report, fs::path(a.out));
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Multi-appliance load profile GAN"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "Validate a dataset, compute statistics, write normalized copy");
  c_prep->add_option("--data", prep.data, "Raw dataset CSV")->required()->check(CLI::ExistingFile);
  c_prep->add_option("--out", prep.out, "Output directory")->required();
  c_prep->add_option("--scheme", prep.scheme, "six_sigma or minmax_tanh")
      ->check(CLI::IsMember({"six_sigma", "minmax_tanh"}));

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Write a synthetic washer/dryer dataset");
  c_syn->add_option("--config", syn.config, "key = value file")->check(CLI::ExistingFile);
  c_syn->add_option("--out", syn.out, "Output CSV")->required();
  c_syn->add_option("--seed", syn.seed);
  c_syn->add_option("--n", syn.n, "Number of samples");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train the GAN");
  c_tr->add_option("--config", tr.config, "key = value file")->check(CLI::ExistingFile);
  c_tr->add_option("--data", tr.data, "Raw dataset CSV")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--out", tr.out, "Output directory")->required();
  c_tr->add_option("--resume", tr.resume, "Checkpoint directory")->check(CLI::ExistingDirectory);
  c_tr->add_option("--stats", tr.stats, "Statistics file from prepare")->check(CLI::ExistingFile);
  c_tr->add_option("--steps", tr.steps, "Override total_steps");
  c_tr->add_option("--seed", tr.seed, "Override seed");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample the EMA generator of a checkpoint");
  c_gen->add_option("--checkpoint", gen.checkpoint)->required()->check(CLI::ExistingDirectory);
  c_gen->add_option("--n", gen.req.n_samples)->required()->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.req.seed);
  c_gen->add_option("--out", gen.out, "Output CSV")->required();
  c_gen->add_flag("--require-operation", gen.req.require_operation);
  c_gen->add_option("--threshold", gen.req.operation_threshold, "Watts")->check(CLI::NonNegativeNumber);
  c_gen->add_option("--max-resamples", gen.req.max_resamples)->check(CLI::NonNegativeNumber);
  c_gen->add_option("--plot-dir", gen.plot_dir, "Also write one CSV per sample here");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Compare a generated dataset with a real one");
  c_ev->add_option("--real", ev.real)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--generated", ev.generated)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--seed", ev.opts.seed);
  c_ev->add_option("--out", ev.out, "Report CSV (default stdout)");
  c_ev->add_flag("--self-test", ev.opts.shared_streams, "Share noise and window streams between both sides");
  c_ev->add_option("--noise-var", ev.opts.noise_var)->check(CLI::NonNegativeNumber);
  c_ev->add_option("--interdependency-pool", ev.opts.interdependency_pool)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*c_prep) run_prepare(prep);
    else if (*c_syn) run_synth(syn);
    else if (*c_tr) run_train(tr);
    else if (*c_gen) run_generate(gen);
    else if (*c_ev) run_evaluate(ev);
  } catch (const IngestError& e) {
    std::fprintf(stderr, "error: input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
