#pragma once

// Experiment driver: corpus x method x loss-probability sweeps, complexity
// sweeps, and the CSV / JSON-lines files they produce.
//
// Output files written by write_results():
//   results.csv     sentence_id,K,method,p,ats,raw_requests,cache_misses,evaluated_groups,best_group
//   results.jsonl   the same rows as JSON objects
//   summary.csv     method,p,mean_ats,sentences
//   timing.csv      sentence_id,method,p,wall_ms
// Everything except timing.csv is a pure function of the configuration.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sempa/ats.hpp"
#include "sempa/core.hpp"
#include "sempa/corpus.hpp"
#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"
#include "sempa/file_cache.hpp"
#include "sempa/remote_provider.hpp"
#include "sempa/rng.hpp"
#include "sempa/search.hpp"

namespace sempa {

enum class Method { gbeam, full, random, single_packet };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::gbeam: return "gbeam";
    case Method::full: return "full";
    case Method::random: return "random";
    case Method::single_packet: return "single_packet";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  if (name == "gbeam") return Method::gbeam;
  if (name == "full") return Method::full;
  if (name == "random") return Method::random;
  if (name == "single_packet" || name == "single") return Method::single_packet;
  throw ConfigError("unknown method '" + name + "' (expected gbeam, full, random or single_packet)");
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Provider specs
// ---------------------------------------------------------------------------

//   hash[:seed=S,dim=D]
//   additive[:seed=S,dim=D,wmin=A,wmax=B]
//   file-cache:PATH[,strict|,lenient]        lenient falls back to hash:seed=0
//   remote:URL
inline std::shared_ptr<EmbeddingProvider> make_provider(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);

  auto key_values = [&](const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("provider option '" + item + "' is not key=value");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
  };
  auto number = [&](const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("provider option " + key + "=" + it->second + " is not a number");
    }
  };

  if (kind == "hash") {
    const auto kv = key_values(args);
    return std::make_shared<HashProvider>(static_cast<std::uint64_t>(number(kv, "seed", 0)),
                                          static_cast<std::size_t>(number(kv, "dim", kDefaultEmbeddingDim)));
  }
  if (kind == "additive") {
    const auto kv = key_values(args);
    return std::make_shared<AdditiveProvider>(static_cast<std::uint64_t>(number(kv, "seed", 0)),
                                              static_cast<std::size_t>(number(kv, "dim", kDefaultEmbeddingDim)),
                                              number(kv, "wmin", 0.1), number(kv, "wmax", 10.0));
  }
  if (kind == "file-cache") {
    std::string path = args;
    bool strict = true;
    if (auto comma = args.rfind(','); comma != std::string::npos) {
      const auto flag = args.substr(comma + 1);
      if (flag == "strict" || flag == "lenient") {
        strict = flag == "strict";
        path = args.substr(0, comma);
      }
    }
    if (path.empty()) throw ConfigError("file-cache provider needs a path");
    std::shared_ptr<const EmbeddingProvider> fallback;
    if (!strict) {
      // Read the dimension from the header so the fallback matches it.
      std::ifstream in(path);
      std::string header;
      if (!in || !std::getline(in, header)) throw IoError("cannot read embedding cache " + path);
      std::size_t dim = 0;
      try {
        dim = nlohmann::json::parse(header).at("dim").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        throw IoError("bad embedding cache header in " + path + ": " + e.what());
      }
      fallback = std::make_shared<HashProvider>(0, dim);
    }
    return std::shared_ptr<EmbeddingProvider>(FileCacheProvider::load(path, strict, fallback));
  }
  if (kind == "remote") {
    if (args.empty()) throw ConfigError("remote provider needs a URL");
    return std::make_shared<RemoteProvider>(args);
  }
  throw ConfigError("unknown provider '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string corpus_path;
  TokenizationMode mode = TokenizationMode::word;
  std::size_t packet_length = 4;
  std::vector<double> p_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<Method> methods{Method::gbeam, Method::full, Method::random, Method::single_packet};
  GBeamConfig gbeam;
  std::string provider = "additive:seed=0";
  std::string output_dir;
  std::uint64_t seed = 0;
  std::uint64_t random_draws = 100;
  std::uint64_t max_partitions = kDefaultMaxPartitions;
  std::size_t jobs = 1;

  void validate() const {
    if (methods.empty()) throw ConfigError("at least one method must be selected");
    if (p_grid.empty()) throw ConfigError("the p grid is empty");
    for (double p : p_grid) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p grid value " + format_double(p) + " is outside [0, 1]");
    }
    if (packet_length == 0) throw ConfigError("packet length M must be positive");
    if (random_draws == 0) throw ConfigError("random_draws must be positive");
    if (jobs == 0) throw ConfigError("jobs must be positive");
    gbeam.validate();
  }

  /// Reads the keys corpus, mode, M, p, methods, population, beam_width,
  /// generations, elitism, swap_count, provider, out, seed, random_draws,
  /// max_partitions and jobs. Missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
      if (j.contains("corpus")) c.corpus_path = j.at("corpus").get<std::string>();
      if (j.contains("mode")) c.mode = parse_tokenization_mode(j.at("mode").get<std::string>());
      if (j.contains("M")) c.packet_length = j.at("M").get<std::size_t>();
      if (j.contains("p")) c.p_grid = j.at("p").get<std::vector<double>>();
      if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
      }
      if (j.contains("population")) c.gbeam.population = j.at("population").get<std::size_t>();
      if (j.contains("beam_width")) c.gbeam.beam_width = j.at("beam_width").get<std::size_t>();
      if (j.contains("generations")) c.gbeam.generations = j.at("generations").get<std::size_t>();
      if (j.contains("elitism")) c.gbeam.elitism = j.at("elitism").get<bool>();
      if (j.contains("swap_count")) c.gbeam.swap_count = j.at("swap_count").get<std::size_t>();
      if (j.contains("provider")) c.provider = j.at("provider").get<std::string>();
      if (j.contains("out")) c.output_dir = j.at("out").get<std::string>();
      if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("random_draws")) c.random_draws = j.at("random_draws").get<std::uint64_t>();
      if (j.contains("max_partitions")) c.max_partitions = j.at("max_partitions").get<std::uint64_t>();
      if (j.contains("jobs")) c.jobs = j.at("jobs").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad experiment config: ") + e.what());
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct ResultRow {
  std::string sentence_id;
  std::size_t K = 0;
  Method method = Method::gbeam;
  double p = 0.0;
  double ats = 0.0;
  std::uint64_t raw_requests = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t evaluated_groups = 0;
  std::string best_group;
  double wall_ms = 0.0;
};

struct SummaryRow {
  Method method = Method::gbeam;
  double p = 0.0;
  double mean_ats = 0.0;
  std::size_t sentences = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::size_t corpus_size = 0;
  std::size_t skipped = 0;

  /// Mean ATS per (method, p), in method order of first appearance then p order.
  std::vector<SummaryRow> summary() const {
    std::vector<SummaryRow> out;
    for (const auto& r : rows) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const SummaryRow& s) { return s.method == r.method && s.p == r.p; });
      if (it == out.end()) {
        out.push_back({r.method, r.p, 0.0, 0});
        it = out.end() - 1;
      }
      it->mean_ats += r.ats;
      ++it->sentences;
    }
    for (auto& s : out) s.mean_ats /= static_cast<double>(s.sentences);
    return out;
  }

  std::optional<double> mean_ats(Method m, double p) const {
    for (const auto& s : summary()) {
      if (s.method == m && s.p == p) return s.mean_ats;
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

struct SentenceOutcome {
  std::vector<ResultRow> rows;
  bool skipped = false;
  std::string warning;
};

inline SentenceOutcome run_sentence(const CorpusSentence& sentence, const ExperimentConfig& cfg,
                                    const EmbeddingProvider& provider) {
  SentenceOutcome outcome;
  const auto& msg = sentence.message;
  const std::size_t K = msg.size();
  if (K % cfg.packet_length != 0) {
    outcome.skipped = true;
    outcome.warning = "skipping sentence " + sentence.id + ": K=" + std::to_string(K) +
                      " is not divisible by M=" + std::to_string(cfg.packet_length);
    return outcome;
  }
  const std::uint64_t sentence_seed = derive_seed(cfg.seed, fnv1a64(sentence.id));

  for (Method method : cfg.methods) {
    if (method == Method::full && partition_count(K, cfg.packet_length) > cfg.max_partitions) {
      outcome.warning = "sentence " + sentence.id + ": full search skipped, partition count exceeds the guard";
      continue;
    }
    SubsetSimilarityCache cache(msg, provider);
    for (double p : cfg.p_grid) {
      const ErasureModel model(p);
      const auto before = cache.counters();
      const auto start = std::chrono::steady_clock::now();
      ResultRow row{sentence.id, K, method, p};
      switch (method) {
        case Method::gbeam: {
          GBeamConfig g = cfg.gbeam;
          g.seed = derive_seed(sentence_seed, 1);
          const auto r = gbeam_search(cache, cfg.packet_length, model, g);
          row.ats = r.best_ats;
          row.evaluated_groups = r.evaluated_groups;
          row.best_group = r.best_group.to_string();
          break;
        }
        case Method::full: {
          const auto r = full_search(cache, cfg.packet_length, model, {cfg.max_partitions});
          row.ats = r.best_ats;
          row.evaluated_groups = r.evaluated_groups;
          row.best_group = r.best_group.to_string();
          break;
        }
        case Method::random:
          row.ats = random_pa_mean_ats(cache, cfg.packet_length, model, cfg.random_draws,
                                       derive_seed(sentence_seed, 2));
          row.evaluated_groups = cfg.random_draws;
          break;
        case Method::single_packet:
          row.ats = single_packet_ats(msg, model);
          row.evaluated_groups = 0;
          row.best_group = "{all}";
          break;
      }
      const auto delta = cache.counters() - before;
      row.raw_requests = delta.raw_requests;
      row.cache_misses = delta.cache_misses;
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      outcome.rows.push_back(std::move(row));
    }
  }
  return outcome;
}

}  // namespace detail

/// Runs every method on every usable sentence and every p, in that nesting
/// order. Sentences whose length is not a multiple of M are skipped with a
/// warning on `log`. Sentences may be processed on cfg.jobs threads; rows are
/// always emitted in corpus order. Writes the output files when
/// cfg.output_dir is set.
inline ResultTable run_experiment(const ExperimentConfig& cfg, const std::vector<CorpusSentence>& corpus,
                                  const EmbeddingProvider& provider, std::ostream& log = std::cerr) {
  cfg.validate();
  std::vector<detail::SentenceOutcome> outcomes(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      try {
        outcomes[i] = detail::run_sentence(corpus[i], cfg, provider);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.jobs, std::max<std::size_t>(corpus.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  ResultTable table;
  table.corpus_size = corpus.size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    auto& o = outcomes[i];
    if (!o.warning.empty()) log << "warning: " << o.warning << '\n';
    if (o.skipped) {
      ++table.skipped;
      continue;
    }
    std::move(o.rows.begin(), o.rows.end(), std::back_inserter(table.rows));
  }
  return table;
}

inline void write_results(const ResultTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "results.csv");
    out << "sentence_id,K,method,p,ats,raw_requests,cache_misses,evaluated_groups,best_group\n";
    for (const auto& r : table.rows) {
      out << detail::csv_quote(r.sentence_id) << ',' << r.K << ',' << to_string(r.method) << ','
          << format_double(r.p) << ',' << format_double(r.ats) << ',' << r.raw_requests << ','
          << r.cache_misses << ',' << r.evaluated_groups << ',' << detail::csv_quote(r.best_group) << '\n';
    }
  }
  {
    auto out = detail::open_output(dir / "results.jsonl");
    for (const auto& r : table.rows) {
      nlohmann::ordered_json j;
      j["sentence_id"] = r.sentence_id;
      j["K"] = r.K;
      j["method"] = to_string(r.method);
      j["p"] = r.p;
      j["ats"] = r.ats;
      j["raw_requests"] = r.raw_requests;
      j["cache_misses"] = r.cache_misses;
      j["evaluated_groups"] = r.evaluated_groups;
      j["best_group"] = r.best_group;
      out << j.dump() << '\n';
    }
  }
  {
    auto out = detail::open_output(dir / "summary.csv");
    out << "method,p,mean_ats,sentences\n";
    for (const auto& s : table.summary()) {
      out << to_string(s.method) << ',' << format_double(s.p) << ',' << format_double(s.mean_ats) << ','
          << s.sentences << '\n';
    }
  }
  {
    auto out = detail::open_output(dir / "timing.csv");
    out << "sentence_id,method,p,wall_ms\n";
    for (const auto& r : table.rows) {
      out << detail::csv_quote(r.sentence_id) << ',' << to_string(r.method) << ',' << format_double(r.p) << ','
          << format_double(r.wall_ms) << '\n';
    }
  }
}

/// Loads the corpus and provider named in cfg, runs, and writes results when
/// cfg.output_dir is set.
inline ResultTable run_experiment(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  if (cfg.corpus_path.empty()) throw ConfigError("no corpus given");
  const auto corpus = load_corpus(cfg.corpus_path, cfg.mode);
  const auto provider = make_provider(cfg.provider);
  auto table = run_experiment(cfg, corpus, *provider, log);
  if (!cfg.output_dir.empty()) write_results(table, cfg.output_dir);
  return table;
}

/// Per p: whether mean(full) >= mean(gbeam) >= mean(random), for the methods present.
struct OrderingCheck {
  double p = 0.0;
  bool holds = true;
  std::string detail;
};

inline std::vector<OrderingCheck> check_method_ordering(const ResultTable& table, double tolerance = 1e-12) {
  std::vector<OrderingCheck> out;
  std::vector<double> ps;
  for (const auto& r : table.rows) {
    if (std::find(ps.begin(), ps.end(), r.p) == ps.end()) ps.push_back(r.p);
  }
  for (double p : ps) {
    OrderingCheck c{p, true, ""};
    const auto full = table.mean_ats(Method::full, p);
    const auto gbeam = table.mean_ats(Method::gbeam, p);
    const auto random = table.mean_ats(Method::random, p);
    if (full && gbeam && *full + tolerance < *gbeam) {
      c.holds = false;
      c.detail += "full < gbeam; ";
    }
    if (gbeam && random && *gbeam + tolerance < *random) {
      c.holds = false;
      c.detail += "gbeam < random; ";
    }
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Complexity sweeps
// ---------------------------------------------------------------------------

struct ComplexityRow {
  std::size_t K = 0;
  std::size_t M = 0;
  std::size_t N = 0;
  std::uint64_t full_search = 0;        // 2^K
  std::uint64_t gbeam = 0;              // G L 2^N
  std::uint64_t gbeam_with_init = 0;    // (G+1) L 2^N
  std::uint64_t measured_raw = 0;       // 0 when not measured
  std::uint64_t measured_misses = 0;
};

enum class PlotKind { p_sweep, complexity_K, complexity_M };

struct ComplexityTable {
  PlotKind kind = PlotKind::complexity_K;
  std::vector<ComplexityRow> rows;
};

struct ComplexitySweepConfig {
  std::vector<std::pair<std::size_t, std::size_t>> points;  // (K, M)
  GBeamConfig gbeam;
  bool measure = true;
  double p = 0.5;
  std::string provider = "hash:seed=0";
};

/// Formula columns for every (K, M) point, and optionally the counters of one
/// measured gbeam run on a synthetic K-token sentence.
inline ComplexityTable complexity_sweep(const ComplexitySweepConfig& cfg, PlotKind kind) {
  if (kind == PlotKind::p_sweep) throw ConfigError("complexity sweep needs a complexity plot kind");
  cfg.gbeam.validate();
  ComplexityTable table{kind, {}};
  std::shared_ptr<EmbeddingProvider> provider;
  if (cfg.measure) provider = make_provider(cfg.provider);
  for (auto [K, M] : cfg.points) {
    const auto pc = PartitionConfig::make(K, M);
    if (K > 62) throw ConfigError("complexity sweep supports K <= 62");
    ComplexityRow row{K, M, pc.N, full_search_encodings(K),
                      gbeam_encodings(cfg.gbeam.generations, cfg.gbeam.population, pc.N),
                      gbeam_encodings_with_init(cfg.gbeam.generations, cfg.gbeam.population, pc.N)};
    if (cfg.measure) {
      std::string text;
      for (std::size_t k = 0; k < K; ++k) text += (k ? " t" : "t") + std::to_string(k);
      const auto msg = TokenizedMessage::from_words(text);
      SubsetSimilarityCache cache(msg, *provider);
      GBeamConfig g = cfg.gbeam;
      g.seed = derive_seed(cfg.gbeam.seed, K * 1000 + M);
      gbeam_search(cache, M, ErasureModel(cfg.p), g);
      row.measured_raw = cache.counters().raw_requests;
      row.measured_misses = cache.counters().cache_misses;
    }
    table.rows.push_back(row);
  }
  return table;
}

inline void write_complexity_table(const ComplexityTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = detail::open_output(path);
  out << "K,M,N,full_search,gbeam,gbeam_with_init,ratio,measured_raw,measured_misses\n";
  for (const auto& r : table.rows) {
    out << r.K << ',' << r.M << ',' << r.N << ',' << r.full_search << ',' << r.gbeam << ',' << r.gbeam_with_init
        << ',' << format_double(static_cast<double>(r.full_search) / static_cast<double>(r.gbeam)) << ','
        << r.measured_raw << ',' << r.measured_misses << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plot data (tidy CSV)
// ---------------------------------------------------------------------------

/// p_sweep:  p,series,mean_ats,sentences    one row per (p, method)
inline void emit_plot_data(const ResultTable& table, PlotKind kind, const std::filesystem::path& path) {
  if (kind != PlotKind::p_sweep) throw ConfigError("a result table only supports p_sweep plot data");
  if (table.rows.empty()) throw ConfigError("cannot emit plot data for an empty table");
  auto summary = table.summary();
  std::stable_sort(summary.begin(), summary.end(), [](const SummaryRow& a, const SummaryRow& b) { return a.p < b.p; });
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = detail::open_output(path);
  out << "p,series,mean_ats,sentences\n";
  for (const auto& s : summary) {
    out << format_double(s.p) << ',' << to_string(s.method) << ',' << format_double(s.mean_ats) << ','
        << s.sentences << '\n';
  }
}

/// complexity_K / complexity_M:  x,series,value    x is K or M; series are
/// full_search, gbeam, gbeam_with_init and, when measured, measured_raw and
/// measured_misses.
inline void emit_plot_data(const ComplexityTable& table, PlotKind kind, const std::filesystem::path& path) {
  if (kind == PlotKind::p_sweep) throw ConfigError("a complexity table does not support p_sweep plot data");
  if (table.rows.empty()) throw ConfigError("cannot emit plot data for an empty table");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto out = detail::open_output(path);
  out << "x,series,value\n";
  for (const auto& r : table.rows) {
    const std::size_t x = kind == PlotKind::complexity_K ? r.K : r.M;
    out << x << ",full_search," << r.full_search << '\n';
    out << x << ",gbeam," << r.gbeam << '\n';
    out << x << ",gbeam_with_init," << r.gbeam_with_init << '\n';
    if (r.measured_raw) {
      out << x << ",measured_raw," << r.measured_raw << '\n';
      out << x << ",measured_misses," << r.measured_misses << '\n';
    }
  }
}

}  // namespace sempa
