// legend: command-line driver for preprocessing, training and checking.
//
// Exit codes: 0 success, 1 partial (some inputs skipped, or no verdict),
// 2 failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "legend/certify.hpp"
#include "legend/pipeline.hpp"

namespace fs = std::filesystem;
using namespace legend;

namespace {

constexpr int kOk = 0, kPartial = 1, kFail = 2;

struct Common {
  std::uint64_t seed = 0;
  double timeout = 60.0;
  std::string mode = "legend";
  std::string weights;  // scorer weights (embed: encoder weights)
  std::string encoder;
  std::string out;
  double theta = 0.5;
  double decay = 0.9;
  double floor = 0.05;
  std::size_t ctis = 1024;
  std::size_t cycles = 10000;
};

std::ofstream open_out(const std::string& path) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

// Writes to --out when given, stdout otherwise.
template <class F>
void emit(const std::string& out, F&& f) {
  if (out.empty()) {
    f(std::cout);
  } else {
    auto os = open_out(out);
    f(os);
  }
}

PipelineConfig make_config(const Common& c, bool need_scorer) {
  PipelineConfig cfg;
  cfg.seed = c.seed;
  cfg.ctis = c.ctis;
  cfg.flip_cycles = c.cycles;
  cfg.assembly = {c.theta, c.decay, std::min(c.floor, c.theta)};
  if (!c.encoder.empty()) cfg.encoder = load_encoder_weights(read_file_bytes(c.encoder));
  if (!c.weights.empty()) cfg.scorer = load_scorer_weights(read_file_bytes(c.weights));
  else if (need_scorer) throw std::invalid_argument("scoring needs --weights <scorer weights>");
  return cfg;
}

void write_weights(const std::string& path, const TensorFile& f) {
  if (fs::path(path).extension() == ".json") write_file_bytes(path, tensors_to_json(f));
  else write_file_bytes(path, encode_tensors(f));
}

void add_common(CLI::App* sc, Common& c, bool with_weights = true) {
  sc->add_option("--seed", c.seed, "random seed");
  sc->add_option("--out", c.out, "output file or directory");
  if (with_weights) {
    sc->add_option("--weights", c.weights, "scorer weights file (binary or JSON)");
    sc->add_option("--encoder", c.encoder, "encoder weights; structural fallback when absent");
  }
}

void add_sampling(CLI::App* sc, Common& c) {
  sc->add_option("--ctis", c.ctis, "CTIs to sample per circuit")->check(CLI::PositiveNumber);
  sc->add_option("--cycles", c.cycles, "flip-rate simulation cycles")->check(CLI::PositiveNumber);
}

void add_assembly(CLI::App* sc, Common& c) {
  sc->add_option("--theta", c.theta, "literal keep threshold")->check(CLI::Range(0.0, 1.0));
  sc->add_option("--decay", c.decay, "threshold decay factor")->check(CLI::Range(0.0, 1.0));
  sc->add_option("--floor", c.floor, "threshold floor")->check(CLI::Range(0.0, 1.0));
}

// ---------------------------------------------------------------------------

int cmd_preprocess(const std::string& dir, const Common& c) {
  const fs::path cache = c.out.empty() ? fs::path("legend-cache") : fs::path(c.out);
  auto s = preprocess_directory(dir, cache, make_config(c, false), &std::cout);
  std::cout << s.entries.size() << " preprocessed (" << s.cache_hits << " cached), " << s.skipped.size()
            << " skipped\n";
  if (s.entries.empty()) return kFail;
  return s.skipped.empty() ? kOk : kPartial;
}

int cmd_sample_ctis(const std::string& file, const Common& c) {
  auto ts = to_transition_system(read_aiger_file(file));
  auto ctis = sample_ctis(ts, c.ctis, CtiOptions{c.seed, 64, 8});
  emit(c.out, [&](std::ostream& os) { write_cti_pool(os, ctis, ts.num_latches()); });
  std::cerr << ctis.size() << " CTIs\n";
  return kOk;
}

int cmd_embed(const std::string& file, const std::string& graph_out, const Common& c) {
  Aig aig = read_aiger_file(file);
  auto cfg = make_config(c, false);
  if (!graph_out.empty()) {
    auto os = open_out(graph_out);
    write_graph(os, build_graph(aig));
  }
  auto table = embed_circuit(aig, cfg);
  if (c.out.empty()) {
    for (std::size_t i = 0; i < table.rows; ++i) {
      auto r = table.row(i);
      for (std::size_t k = 0; k < r.size(); ++k) std::cout << (k ? " " : "") << r[k];
      std::cout << '\n';
    }
  } else {
    write_file_bytes(c.out, export_table(table));
  }
  std::cerr << table.rows << " x " << table.width << " ("
            << (table.source == EmbeddingSource::pretrained ? "pretrained" : "fallback") << ")\n";
  return kOk;
}

int cmd_score(const std::string& file, const Common& c) {
  Aig aig = read_aiger_file(file);
  auto cfg = make_config(c, true);
  auto art = preprocess(aig, cfg);
  auto clauses = scored_candidates(art.ctis, art.table, *cfg.scorer, cfg.assembly);
  emit(c.out, [&](std::ostream& os) { write_clause_file(os, clauses, aig.latches.size()); });
  std::cerr << art.ctis.size() << " CTIs, " << clauses.size() << " candidate clauses\n";
  return kOk;
}

int cmd_sanity(const std::string& file, const std::string& clauses, const Common& c) {
  auto ts = to_transition_system(read_aiger_file(file));
  std::ifstream in(clauses);
  if (!in) throw std::runtime_error("cannot open " + clauses);
  auto cf = read_clause_file(in);
  if (cf.latches != ts.num_latches())
    throw std::runtime_error("clause file is for " + std::to_string(cf.latches) + " latches, circuit has " +
                             std::to_string(ts.num_latches()));
  auto f = filter_candidates(ts, cf.clauses);
  emit(c.out, [&](std::ostream& os) { write_clause_file(os, f.accepted, ts.num_latches()); });
  std::size_t init_fail = 0, step_fail = 0;
  for (const auto& v : f.verdicts) {
    init_fail += !v.initiation;
    step_fail += v.initiation && !v.one_step;
  }
  std::cerr << cf.clauses.size() << " candidates (+" << cf.tautologies << " tautologies), " << init_fail
            << " fail initiation, " << step_fail << " fail one step, " << f.accepted.size() << " kept\n";
  return kOk;
}

int cmd_oracle_labels(const std::string& dir, const std::string& cache_dir, const Common& c) {
  const fs::path out = c.out.empty() ? fs::path("legend-labels") : fs::path(c.out);
  const fs::path cache = cache_dir.empty() ? out / "cache" : fs::path(cache_dir);
  fs::create_directories(out);
  auto cfg = make_config(c, false);
  std::size_t labeled = 0, excluded = 0, failed = 0;
  for (const auto& p : list_circuits(dir)) {
    const auto stem = p.stem().string();
    try {
      Aig aig = read_aiger_file(p.string());
      auto entry = preprocess_cached(p, cache, cfg);
      auto art = load_artifacts(entry.dir);
      auto r = oracle_labels(aig, art.ctis, c.timeout);
      static const char* names[] = {"labeled", "unsafe", "unknown", "trivially-safe"};
      std::cout << stem << ": " << names[static_cast<int>(r.status)];
      if (r.status != OracleOutcome::Status::labeled) {
        std::cout << " (excluded)\n";
        ++excluded;
        continue;
      }
      std::cout << ", " << r.stats.labeled << " labeled, " << r.stats.skipped << " uncovered\n";
      auto lab = open_out((out / (stem + ".labels")).string());
      write_labeled_pool(lab, r.labels, aig.latches.size());
      write_file_bytes((out / (stem + ".table.lgw")).string(), export_table(art.table));
      auto os = open_out((out / (stem + ".inv")).string());
      os << "c-format v1 latches=" << aig.latches.size() << '\n';
      for (const auto& l : r.invariant) {
        for (auto lit : l.clause) os << lit.signed_ordinal() << ' ';
        os << "# frame " << l.frame << '\n';
      }
      ++labeled;
    } catch (const std::exception& e) {
      std::cout << stem << ": skipped: " << e.what() << '\n';
      ++failed;
    }
  }
  std::cout << labeled << " labeled, " << excluded << " excluded, " << failed << " skipped\n";
  if (labeled + excluded == 0) return kFail;
  return failed ? kPartial : kOk;
}

int cmd_train(const std::string& dir, const TrainConfig& tc, const Common& c) {
  std::vector<EmbeddingTable> tables;
  std::vector<TrainingExample> data;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".labels") continue;
    auto table_path = e.path().parent_path() / (e.path().stem().string() + ".table.lgw");
    tables.push_back(load_table(read_file_bytes(table_path.string())));
    std::ifstream in(e.path());
    for (auto& l : read_labeled_pool(in)) data.push_back({tables.size() - 1, std::move(l.cube), std::move(l.keep)});
  }
  if (data.empty()) throw std::runtime_error("no labeled CTIs under " + dir);
  auto r = train_scorer(data, tables, tc);
  const std::string out = c.out.empty() ? "scorer.lgw" : c.out;
  write_weights(out, to_tensors(r.weights));
  for (std::size_t e = 0; e < r.loss.size(); ++e)
    if (e + 1 == r.loss.size() || e % std::max<std::size_t>(1, r.loss.size() / 10) == 0)
      std::cout << "epoch " << e + 1 << " loss " << r.loss[e] << '\n';
  std::cout << data.size() << " clauses from " << tables.size() << " circuits, accuracy "
            << scorer_accuracy(r.weights, data, tables, tc.assembly.theta) << ", weights -> " << out << '\n';
  return kOk;
}

int cmd_check(const std::string& file, const std::string& sideload, const std::string& external, const Common& c) {
  Aig aig = read_aiger_file(file);
  const Mode mode = parse_mode(c.mode);
  auto cfg = make_config(c, mode == Mode::legend);
  std::vector<Clause> extra;
  if (!sideload.empty()) {
    std::ifstream in(sideload);
    if (!in) throw std::runtime_error("cannot open " + sideload);
    extra = read_clause_file(in).clauses;
  }
  PdrOptions opts;
  opts.budget.time_limit_s = c.timeout;
  opts.backend.external_command = external;
  auto r = run_check(aig, mode, cfg, opts, nullptr, extra);

  std::cout << to_string(r.result.verdict) << '\n';
  std::cerr << "mode " << to_string(mode) << ": " << r.sat_queries() << " SAT queries (" << r.sanity_queries
            << " sanity), " << r.injected << "/" << r.candidates << " clauses side-loaded, " << r.total_seconds
            << " s\n";
  if (!c.out.empty()) {
    fs::path out(c.out);
    fs::create_directories(out);
    if (r.result.verdict == Verdict::safe) {
      auto os = open_out((out / "invariant.cls").string());
      write_clause_file(os, r.result.invariant_clauses(), aig.latches.size());
    } else if (r.result.verdict == Verdict::unsafe) {
      write_file_bytes((out / "witness.txt").string(), format_witness(r.result.trace));
    }
    nlohmann::json j{{"verdict", to_string(r.result.verdict)},
                     {"mode", to_string(mode)},
                     {"seed", c.seed},
                     {"sat_queries", r.sat_queries()},
                     {"engine_queries", r.stats.sat_queries},
                     {"sanity_queries", r.sanity_queries},
                     {"obligations", r.stats.obligations},
                     {"clauses_learned", r.stats.clauses_learned},
                     {"frames", r.stats.frames},
                     {"candidates", r.candidates},
                     {"sideload_offered", r.stats.sideload_offered},
                     {"sideload_accepted", r.stats.sideload_accepted},
                     {"prepare_seconds", r.prepare_seconds},
                     {"total_seconds", r.total_seconds},
                     {"note", r.result.note}};
    write_file_bytes((out / "stats.json").string(), j.dump(2) + "\n");
  }
  return r.result.verdict == Verdict::unknown ? kPartial : kOk;
}

int cmd_bench(const std::string& suite, const std::vector<std::string>& mode_names, std::size_t jobs,
              const Common& c) {
  std::vector<Mode> modes;
  for (const auto& m : mode_names) modes.push_back(parse_mode(m));
  const bool need_scorer = std::find(modes.begin(), modes.end(), Mode::legend) != modes.end();
  auto cfg = make_config(c, need_scorer);
  std::vector<BenchJob> work;
  for (const auto& p : list_circuits(suite))
    for (auto m : modes) work.push_back({p, m});
  if (work.empty()) throw std::runtime_error("no AIGER files in " + suite);
  auto rep = run_bench(work, modes, cfg, c.timeout, jobs);
  write_bench_table(std::cout, rep);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    auto csv = open_out((fs::path(c.out) / "bench.csv").string());
    write_bench_csv(csv, rep);
    auto txt = open_out((fs::path(c.out) / "summary.txt").string());
    write_bench_table(txt, rep);
  }
  std::size_t errors = 0;
  for (const auto& r : rep.rows) errors += !r.error.empty() && r.error != "timeout";
  if (errors == rep.rows.size()) return kFail;
  return errors ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-free learned lemma side-loading for IC3/PDR"};
  app.require_subcommand(1);
  Common c;
  std::string input, second, graph_out, cache_dir, sideload, external;
  std::vector<std::string> modes{"vanilla", "legend"};
  std::size_t jobs = 1;
  TrainConfig tc;
  std::string optimizer = "adam";

  auto* pre = app.add_subcommand("preprocess", "embed, simulate and sample CTIs for every circuit in a directory");
  pre->add_option("circuits", input, "directory of AIGER files")->required();
  add_common(pre, c);
  add_sampling(pre, c);

  auto* sc = app.add_subcommand("sample-ctis", "sample minimized CTIs of one circuit");
  sc->add_option("circuit", input)->required();
  sc->add_option("-n,--ctis", c.ctis, "number of CTIs")->check(CLI::PositiveNumber);
  add_common(sc, c, false);

  auto* em = app.add_subcommand("embed", "per-latch embedding table with flip rate");
  em->add_option("circuit", input)->required();
  em->add_option("--graph", graph_out, "also write the graph export here");
  em->add_option("--cycles", c.cycles, "flip-rate simulation cycles")->check(CLI::PositiveNumber);
  add_common(em, c, false);
  em->add_option("--weights,--encoder", c.encoder, "encoder weights; structural fallback when absent");

  auto* sco = app.add_subcommand("score", "score CTIs and assemble candidate clauses");
  sco->add_option("circuit", input)->required();
  add_common(sco, c);
  add_sampling(sco, c);
  add_assembly(sco, c);

  auto* san = app.add_subcommand("sanity", "keep candidate clauses that hold initially and after one step");
  san->add_option("circuit", input)->required();
  san->add_option("clauses", second, "clause file")->required();
  add_common(san, c, false);

  auto* ol = app.add_subcommand("oracle-labels", "label CTIs with the clauses of an oracle invariant");
  ol->add_option("circuits", input)->required();
  ol->add_option("--timeout", c.timeout, "oracle PDR budget per circuit, seconds")->check(CLI::PositiveNumber);
  ol->add_option("--cache", cache_dir, "preprocessing cache");
  add_common(ol, c);
  add_sampling(ol, c);

  auto* tr = app.add_subcommand("train-scorer", "train the literal scorer on oracle labels");
  tr->add_option("labels", input, "output directory of oracle-labels")->required();
  tr->add_option("--epochs", tc.epochs, "passes over the training set");
  tr->add_option("--lr", tc.learning_rate, "learning rate");
  tr->add_option("--batch", tc.batch_size, "clauses per step, 0 = full batch");
  tr->add_option("--hidden", tc.hidden, "hidden width of both MLPs");
  tr->add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  tr->add_option("--theta", tc.assembly.theta, "decision threshold for the accuracy report");
  add_common(tr, c, false);

  auto* ch = app.add_subcommand("check", "model check one circuit");
  ch->add_option("circuit", input)->required();
  ch->add_option("--mode", c.mode, "vanilla, legend or random-ablation")->check(CLI::IsMember({"vanilla", "legend", "random-ablation"}));
  ch->add_option("--timeout", c.timeout, "seconds")->check(CLI::PositiveNumber);
  ch->add_option("--sideload", sideload, "extra clause file, sanity-checked and side-loaded");
  ch->add_option("--sat-command", external, "external DIMACS solver command for the main engine");
  add_common(ch, c);
  add_sampling(ch, c);
  add_assembly(ch, c);

  auto* be = app.add_subcommand("bench", "PAR2 comparison over a suite");
  be->add_option("suite", input)->required();
  be->add_option("--modes", modes, "comma-separated; the first is the speedup baseline")->delimiter(',');
  be->add_option("--timeout", c.timeout, "seconds per run")->check(CLI::PositiveNumber);
  be->add_option("-j,--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
  add_common(be, c);
  add_sampling(be, c);
  add_assembly(be, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kFail;
  }

  try {
    if (*pre) return cmd_preprocess(input, c);
    if (*sc) return cmd_sample_ctis(input, c);
    if (*em) return cmd_embed(input, graph_out, c);
    if (*sco) return cmd_score(input, c);
    if (*san) return cmd_sanity(input, second, c);
    if (*ol) return cmd_oracle_labels(input, cache_dir, c);
    if (*tr) {
      tc.seed = c.seed;
      tc.optimizer = optimizer == "sgd" ? Optimizer::sgd : Optimizer::adam;
      return cmd_train(input, tc, c);
    }
    if (*ch) return cmd_check(input, sideload, external, c);
    if (*be) return cmd_bench(input, modes, jobs, c);
  } catch (const std::exception& e) {
    std::cerr << "legend: " << e.what() << '\n';
    return kFail;
  }
  return kFail;
}
