// sempa: experiment driver for semantic packet aggregation.
//
//   sempa run      --corpus FILE --seed S [options]   results.csv/jsonl, summary.csv, timing.csv
//   sempa sweep-p  --corpus FILE [options]            as run, plus plot_p_sweep.csv
//   sempa sweep-k  [--k-min 4 --k-max 20 -M 2]        complexity_K.csv, plot_complexity_K.csv
//   sempa sweep-m  [--K 12 --m-list 2,3,4,6]          complexity_M.csv, plot_complexity_M.csv
//   sempa inspect  (--text "..." | --corpus FILE --id ID) [options]

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sempa/channel.hpp"
#include "sempa/harness.hpp"

namespace {

using namespace sempa;

struct ExperimentFlags {
  std::string config_path;
  std::string corpus;
  std::string mode;
  std::size_t M = 0;
  std::vector<double> p;
  std::vector<std::string> methods;
  std::size_t population = 0, beam_width = 0, generations = 0, swap_count = 0;
  bool no_elitism = false;
  std::string provider;
  std::string out;
  std::uint64_t seed = 0;
  std::uint64_t random_draws = 0;
  std::uint64_t max_partitions = 0;
  std::size_t jobs = 0;
};

void add_experiment_flags(CLI::App& cmd, ExperimentFlags& f, bool seed_required) {
  cmd.add_option("--config", f.config_path, "JSON file with experiment settings (flags override it)");
  cmd.add_option("--corpus", f.corpus, "Corpus file (text lines or JSON lines)");
  cmd.add_option("--mode", f.mode, "Tokenization: word | subword")->check(CLI::IsMember({"word", "subword"}));
  cmd.add_option("-M,--packet-length", f.M, "Tokens per packet");
  cmd.add_option("-p,--p", f.p, "Packet loss probabilities")->delimiter(',');
  cmd.add_option("--methods", f.methods, "gbeam,full,random,single_packet")->delimiter(',');
  cmd.add_option("-L,--population", f.population, "Population size L");
  cmd.add_option("-B,--beam-width", f.beam_width, "Beam width B");
  cmd.add_option("-G,--generations", f.generations, "Generations G");
  cmd.add_option("--swap-count", f.swap_count, "Token swaps per mutation");
  cmd.add_flag("--no-elitism", f.no_elitism, "Select the next beams from the children only");
  cmd.add_option("--provider", f.provider, "hash[:..] | additive[:..] | file-cache:PATH[,lenient] | remote:URL");
  cmd.add_option("--out", f.out, "Output directory");
  auto* seed = cmd.add_option("--seed", f.seed, "Global seed");
  if (seed_required) seed->required();
  cmd.add_option("--random-draws", f.random_draws, "Random partitions averaged by the random method");
  cmd.add_option("--max-partitions", f.max_partitions, "Guard on full search");
  cmd.add_option("--jobs", f.jobs, "Sentences processed in parallel");
}

ExperimentConfig resolve(const CLI::App& cmd, const ExperimentFlags& f) {
  ExperimentConfig cfg = f.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(f.config_path);
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--corpus")) cfg.corpus_path = f.corpus;
  if (given("--mode")) cfg.mode = parse_tokenization_mode(f.mode);
  if (given("--packet-length")) cfg.packet_length = f.M;
  if (given("--p")) cfg.p_grid = f.p;
  if (given("--methods")) {
    cfg.methods.clear();
    for (const auto& m : f.methods) cfg.methods.push_back(parse_method(m));
  }
  if (given("--population")) cfg.gbeam.population = f.population;
  if (given("--beam-width")) cfg.gbeam.beam_width = f.beam_width;
  if (given("--generations")) cfg.gbeam.generations = f.generations;
  if (given("--swap-count")) cfg.gbeam.swap_count = f.swap_count;
  if (f.no_elitism) cfg.gbeam.elitism = false;
  if (given("--provider")) cfg.provider = f.provider;
  if (given("--out")) cfg.output_dir = f.out;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--random-draws")) cfg.random_draws = f.random_draws;
  if (given("--max-partitions")) cfg.max_partitions = f.max_partitions;
  if (given("--jobs")) cfg.jobs = f.jobs;
  if (cfg.output_dir.empty()) cfg.output_dir = "results";
  return cfg;
}

void print_summary(const ResultTable& table) {
  std::cout << "sentences: " << table.corpus_size << " (" << table.skipped << " skipped)\n";
  std::cout << std::left << std::setw(15) << "method" << std::setw(8) << "p" << "mean_ats\n";
  for (const auto& s : table.summary()) {
    std::cout << std::left << std::setw(15) << to_string(s.method) << std::setw(8) << format_double(s.p)
              << std::fixed << std::setprecision(6) << s.mean_ats << std::defaultfloat << '\n';
  }
  for (const auto& check : check_method_ordering(table)) {
    if (!check.holds) std::cout << "ordering full >= gbeam >= random violated at p=" << check.p << ": " << check.detail << '\n';
  }
}

std::string describe_group(const TokenizedMessage& msg, const PacketGroup& g) {
  std::string out;
  for (std::size_t i = 0; i < g.packet_count(); ++i) {
    out += "  packet " + std::to_string(i) + ":";
    for (auto pos : g.packet(i).positions()) out += " " + msg[pos].surface;
    out += '\n';
  }
  return out;
}

int run_inspect(const ExperimentConfig& cfg, const std::string& text, const std::string& id, std::size_t samples) {
  std::vector<CorpusSentence> picked;
  if (!text.empty()) {
    picked.push_back({"text", TokenizedMessage::from_words(text)});
  } else {
    if (cfg.corpus_path.empty()) throw ConfigError("inspect needs --text or --corpus");
    for (auto& s : load_corpus(cfg.corpus_path, cfg.mode)) {
      if (id.empty() || s.id == id) picked.push_back(std::move(s));
      if (!id.empty() && !picked.empty()) break;
    }
    if (picked.empty()) throw ConfigError("no sentence with id " + id);
    if (id.empty()) picked.erase(picked.begin() + 1, picked.end());
  }
  const auto provider = make_provider(cfg.provider);
  const double p = cfg.p_grid.size() == 1 ? cfg.p_grid.front() : 0.3;
  const ErasureModel model(p);
  for (const auto& sentence : picked) {
    const auto& msg = sentence.message;
    std::cout << "sentence " << sentence.id << ": " << msg.text() << "\n";
    std::cout << "K=" << msg.size() << " M=" << cfg.packet_length << " p=" << format_double(p) << "\n";
    SubsetSimilarityCache cache(msg, *provider);
    GBeamConfig g = cfg.gbeam;
    g.seed = derive_seed(derive_seed(cfg.seed, fnv1a64(sentence.id)), 1);
    const auto beam = gbeam_search(cache, cfg.packet_length, model, g);
    std::cout << "gbeam best ATS " << std::fixed << std::setprecision(6) << beam.best_ats << std::defaultfloat
              << "  " << beam.best_group.to_string() << "\n"
              << describe_group(msg, beam.best_group);
    if (partition_count(msg.size(), cfg.packet_length) <= cfg.max_partitions) {
      const auto full = full_search(cache, cfg.packet_length, model, {cfg.max_partitions});
      std::cout << "full search best ATS " << std::fixed << std::setprecision(6) << full.best_ats
                << std::defaultfloat << "  " << full.best_group.to_string() << "\n";
    }
    const auto random = random_pa(msg, cfg.packet_length, derive_seed(cfg.seed, 2));
    std::cout << "random grouping ATS " << std::fixed << std::setprecision(6)
              << exact_ats_value(random, model, cache) << std::defaultfloat << "  " << random.to_string() << "\n";
    std::cout << "counters: raw_requests=" << cache.counters().raw_requests
              << " cache_misses=" << cache.counters().cache_misses << "\n";
    std::cout << "sample receptions (gbeam | random):\n";
    for (std::size_t s = 0; s < samples; ++s) {
      const auto seed = derive_seed(cfg.seed, 100 + s);
      std::cout << "  [" << sample_received_text(msg, beam.best_group, model, seed) << "] | ["
                << sample_received_text(msg, random, model, seed) << "]\n";
    }
  }
  return 0;
}

std::vector<double> default_p_sweep() {
  std::vector<double> p;
  for (int i = 0; i <= 10; ++i) p.push_back(i / 10.0);
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic packet aggregation experiments"};
  app.require_subcommand(1);

  ExperimentFlags run_flags, sweep_flags, inspect_flags;
  auto* run = app.add_subcommand("run", "Run methods over a corpus and p grid");
  add_experiment_flags(*run, run_flags, true);

  auto* sweep_p = app.add_subcommand("sweep-p", "p sweep with plot data");
  add_experiment_flags(*sweep_p, sweep_flags, false);

  std::size_t k_min = 4, k_max = 20, k_step = 2, k_M = 2;
  std::size_t m_K = 12;
  std::vector<std::size_t> m_list{2, 3, 4, 6};
  GBeamConfig complexity_gbeam;
  bool no_measure = false;
  std::string complexity_out = "results";
  std::string complexity_provider = "hash:seed=0";
  auto add_complexity_flags = [&](CLI::App& cmd) {
    cmd.add_option("-G,--generations", complexity_gbeam.generations, "Generations G");
    cmd.add_option("-L,--population", complexity_gbeam.population, "Population size L");
    cmd.add_option("-B,--beam-width", complexity_gbeam.beam_width, "Beam width B");
    cmd.add_option("--seed", complexity_gbeam.seed, "Seed for measured runs");
    cmd.add_option("--provider", complexity_provider, "Provider for measured runs");
    cmd.add_flag("--no-measure", no_measure, "Formula columns only");
    cmd.add_option("--out", complexity_out, "Output directory");
  };
  auto* sweep_k = app.add_subcommand("sweep-k", "Encoding cost as K grows");
  sweep_k->add_option("--k-min", k_min, "Smallest K");
  sweep_k->add_option("--k-max", k_max, "Largest K");
  sweep_k->add_option("--k-step", k_step, "K increment");
  sweep_k->add_option("-M,--packet-length", k_M, "Tokens per packet");
  add_complexity_flags(*sweep_k);

  auto* sweep_m = app.add_subcommand("sweep-m", "Encoding cost as M grows");
  sweep_m->add_option("--K", m_K, "Tokens per sentence");
  sweep_m->add_option("--m-list", m_list, "Packet lengths")->delimiter(',');
  add_complexity_flags(*sweep_m);

  auto* inspect = app.add_subcommand("inspect", "Show the best grouping and sample receptions");
  add_experiment_flags(*inspect, inspect_flags, false);
  std::string inspect_text, inspect_id;
  std::size_t inspect_samples = 5;
  inspect->add_option("--text", inspect_text, "Sentence to inspect (word tokenization)");
  inspect->add_option("--id", inspect_id, "Sentence id within --corpus");
  inspect->add_option("--samples", inspect_samples, "Sample receptions to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = resolve(*run, run_flags);
      const auto table = run_experiment(cfg);
      print_summary(table);
      std::cout << "wrote " << cfg.output_dir << "/results.csv\n";
    } else if (sweep_p->parsed()) {
      auto cfg = resolve(*sweep_p, sweep_flags);
      if (!sweep_p->count("--p") && cfg.p_grid.size() < 2) cfg.p_grid = default_p_sweep();
      const auto table = run_experiment(cfg);
      emit_plot_data(table, PlotKind::p_sweep, std::filesystem::path(cfg.output_dir) / "plot_p_sweep.csv");
      print_summary(table);
      std::cout << "wrote " << cfg.output_dir << "/plot_p_sweep.csv\n";
    } else if (sweep_k->parsed() || sweep_m->parsed()) {
      const bool over_k = sweep_k->parsed();
      ComplexitySweepConfig cfg;
      cfg.gbeam = complexity_gbeam;
      cfg.measure = !no_measure;
      cfg.provider = complexity_provider;
      if (over_k) {
        if (k_step == 0) throw ConfigError("--k-step must be positive");
        for (std::size_t K = k_min; K <= k_max; K += k_step) {
          if (K % k_M == 0) cfg.points.emplace_back(K, k_M);
        }
      } else {
        for (auto M : m_list) cfg.points.emplace_back(m_K, M);
      }
      const auto kind = over_k ? PlotKind::complexity_K : PlotKind::complexity_M;
      const auto table = complexity_sweep(cfg, kind);
      const std::string suffix = over_k ? "K" : "M";
      const auto dir = std::filesystem::path(complexity_out);
      write_complexity_table(table, dir / ("complexity_" + suffix + ".csv"));
      emit_plot_data(table, kind, dir / ("plot_complexity_" + suffix + ".csv"));
      std::cout << "K   M   N   full_search  gbeam     ratio   measured_raw\n";
      for (const auto& r : table.rows) {
        std::cout << std::left << std::setw(4) << r.K << std::setw(4) << r.M << std::setw(4) << r.N << std::setw(13)
                  << r.full_search << std::setw(10) << r.gbeam << std::setw(8)
                  << format_double(static_cast<double>(r.full_search) / static_cast<double>(r.gbeam))
                  << r.measured_raw << '\n';
      }
      std::cout << "wrote " << (dir / ("complexity_" + suffix + ".csv")).string() << "\n";
    } else if (inspect->parsed()) {
      auto cfg = resolve(*inspect, inspect_flags);
      return run_inspect(cfg, inspect_text, inspect_id, inspect_samples);
    }
  } catch (const sempa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
