#pragma once

// End-to-end flows: clause files, per-circuit artifact cache, the three check
// modes (vanilla, legend, random ablation), and the PAR2 benchmark harness.

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cinttypes>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "legend/aiger.hpp"
#include "legend/cti.hpp"
#include "legend/embedder.hpp"
#include "legend/flip_sim.hpp"
#include "legend/graph.hpp"
#include "legend/pdr.hpp"
#include "legend/sanity.hpp"
#include "legend/scorer.hpp"

namespace legend {

// ---------------------------------------------------------------------------
// Clause files: header "c-format v1 latches=<n>", then one clause per line as
// signed 1-based latch ordinals; '#' starts a comment.

struct ClauseFile {
  std::size_t latches = 0;
  std::vector<Clause> clauses;
  std::size_t tautologies = 0;  // lines with both polarities of a latch; dropped
};

inline void write_clause_file(std::ostream& os, std::span<const Clause> clauses, std::size_t latches) {
  os << "c-format v1 latches=" << latches << '\n';
  for (const auto& c : clauses) {
    bool first = true;
    for (auto l : c) {
      os << (first ? "" : " ") << l.signed_ordinal();
      first = false;
    }
    os << '\n';
  }
}

inline ClauseFile read_clause_file(std::istream& in) {
  ClauseFile f;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("clause file line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!header) {
      std::istringstream hs(line);
      std::string tag, version, lat;
      if (!(hs >> tag >> version >> lat) || tag != "c-format" || version != "v1" || lat.rfind("latches=", 0) != 0)
        fail("expected header 'c-format v1 latches=<n>'");
      try {
        f.latches = std::stoul(lat.substr(8));
      } catch (const std::exception&) {
        fail("bad latch count");
      }
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::vector<Literal> lits;
    long long v;
    while (ls >> v) {
      if (v == 0 || static_cast<std::size_t>(v < 0 ? -v : v) > f.latches) fail("literal out of range");
      lits.push_back(Literal::from_signed_ordinal(v));
    }
    if (!ls.eof()) fail("not an integer");
    bool taut = false;
    for (auto a : lits)
      for (auto b : lits) taut |= a.latch == b.latch && a.value != b.value;
    if (taut) {
      ++f.tautologies;
      continue;
    }
    f.clauses.emplace_back(std::move(lits));
  }
  if (!header) throw std::runtime_error("clause file: missing header");
  return f;
}

// ---------------------------------------------------------------------------
// Hashing for the artifact cache.

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration shared by the flows.

enum class Mode { vanilla, legend, random_ablation };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::vanilla: return "vanilla";
    case Mode::legend: return "legend";
    case Mode::random_ablation: return "random-ablation";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "vanilla") return Mode::vanilla;
  if (s == "legend") return Mode::legend;
  if (s == "random-ablation") return Mode::random_ablation;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t ctis = 1024;
  std::size_t flip_cycles = 10000;
  AssemblyConfig assembly;
  std::optional<EncoderWeights> encoder;  // absent: structural fallback
  std::optional<ScorerWeights<float>> scorer;
  std::size_t max_sideload = 0;  // 0: no limit
  double ablation_keep = 0.5;

  // Everything that changes preprocessing output.
  std::uint64_t preprocess_hash() const {
    std::ostringstream os;
    os << "seed=" << seed << " ctis=" << ctis << " cycles=" << flip_cycles << " encoder=";
    if (encoder) os << hex64(fnv1a64(export_encoder_weights(*encoder)));
    return fnv1a64(os.str());
  }
};

// ---------------------------------------------------------------------------
// One-time per-circuit preprocessing.

struct CircuitArtifacts {
  EmbeddingTable table;  // augmented with flip rates
  FlipRates flips;
  std::vector<CtiSample> ctis;
};

inline EmbeddingTable embed_circuit(const Aig& aig, const PipelineConfig& cfg, FlipRates* flips_out = nullptr) {
  auto graph = build_graph(aig);
  EmbeddingTable raw = cfg.encoder ? gin_forward(graph, *cfg.encoder) : structural_fallback_embed(graph, cfg.seed);
  auto flips = compute_flip_rates(aig, cfg.flip_cycles, cfg.seed);
  auto t = augment_with_flip_rate(raw, flips);
  if (flips_out) *flips_out = std::move(flips);
  return t;
}

inline CircuitArtifacts preprocess(const Aig& aig, const PipelineConfig& cfg) {
  CircuitArtifacts a;
  a.table = embed_circuit(aig, cfg, &a.flips);
  auto ts = to_transition_system(aig);
  a.ctis = sample_ctis(ts, cfg.ctis, CtiOptions{cfg.seed, 64, 8});
  return a;
}

struct CacheEntry {
  std::filesystem::path dir;
  bool hit = false;
};

// Artifacts of one circuit under <cache>/<key>/, key = hash of the file
// content and the preprocessing configuration. A "complete" marker is written
// last; its presence makes later calls no-ops.
inline CacheEntry preprocess_cached(const std::filesystem::path& circuit, const std::filesystem::path& cache,
                                    const PipelineConfig& cfg) {
  const std::string bytes = read_file_bytes(circuit.string());
  const auto key = hex64(fnv1a64(bytes, cfg.preprocess_hash()));
  CacheEntry e{cache / key, false};
  if (std::filesystem::exists(e.dir / "complete")) {
    e.hit = true;
    return e;
  }
  Aig aig = parse_aiger(bytes);
  std::filesystem::create_directories(e.dir);
  auto graph = build_graph(aig);
  {
    std::ofstream g(e.dir / "graph.txt");
    write_graph(g, graph);
  }
  auto art = preprocess(aig, cfg);
  write_file_bytes((e.dir / "embedding.lgw").string(), export_table(art.table));
  {
    std::ofstream f(e.dir / "flip.csv");
    write_flip_csv(f, art.flips);
    std::ofstream c(e.dir / "ctis.pool");
    write_cti_pool(c, art.ctis, aig.latches.size());
    std::ofstream s(e.dir / "source");
    s << std::filesystem::absolute(circuit).string() << '\n';
  }
  std::ofstream(e.dir / "complete") << key << '\n';
  return e;
}

inline bool is_aiger_path(const std::filesystem::path& p) {
  auto e = p.extension();
  return e == ".aag" || e == ".aig";
}

// AIGER files of a directory (or the file itself), sorted by name.
inline std::vector<std::filesystem::path> list_circuits(const std::filesystem::path& where) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::is_regular_file(where)) return {where};
  for (const auto& e : std::filesystem::directory_iterator(where))
    if (e.is_regular_file() && is_aiger_path(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct PreprocessSummary {
  std::vector<CacheEntry> entries;
  std::size_t cache_hits = 0;
  std::vector<std::pair<std::filesystem::path, std::string>> skipped;
};

inline PreprocessSummary preprocess_directory(const std::filesystem::path& circuits,
                                              const std::filesystem::path& cache, const PipelineConfig& cfg,
                                              std::ostream* log = nullptr) {
  PreprocessSummary s;
  for (const auto& p : list_circuits(circuits)) {
    try {
      auto e = preprocess_cached(p, cache, cfg);
      s.cache_hits += e.hit;
      if (log) *log << (e.hit ? "cached  " : "built   ") << p.filename().string() << " -> " << e.dir.string() << '\n';
      s.entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      if (log) *log << "skipped " << p.filename().string() << ": " << ex.what() << '\n';
      s.skipped.emplace_back(p, ex.what());
    }
  }
  return s;
}

// Reads back what preprocess_cached wrote.
inline CircuitArtifacts load_artifacts(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "complete")) throw std::runtime_error("incomplete artifact set in " + dir.string());
  CircuitArtifacts a;
  a.table = load_table(read_file_bytes((dir / "embedding.lgw").string()));
  std::ifstream pool(dir / "ctis.pool");
  for (auto& e : read_cti_pool(pool)) a.ctis.push_back({std::move(e.cube), Cube(), std::move(e.inputs)});
  std::ifstream flips(dir / "flip.csv");
  std::string line;
  std::getline(flips, line);
  while (std::getline(flips, line)) a.flips.rate.push_back(std::stod(line.substr(line.find(',') + 1)));
  return a;
}

// ---------------------------------------------------------------------------
// Candidate clauses.

inline std::vector<Clause> scored_candidates(std::span<const CtiSample> ctis, const EmbeddingTable& table,
                                             const ScorerWeights<float>& w, const AssemblyConfig& cfg) {
  std::vector<Clause> out;
  for (const auto& s : ctis) {
    auto scores = score_clause_literals(s.cube, table, w);
    if (auto c = assemble_clause(s.cube, std::span<const float>(scores), cfg)) out.push_back(std::move(*c));
  }
  return out;
}

// Keep/drop decided by a seeded coin per literal; cubes left empty are dropped.
inline std::vector<Clause> random_candidates(std::span<const CtiSample> ctis, std::uint64_t seed, double keep = 0.5) {
  Xorshift64 rng(mix_seed(seed, 0xAB1A7E));
  std::vector<Clause> out;
  for (const auto& s : ctis) {
    std::vector<Literal> kept;
    for (auto l : s.cube)
      if (rng.uniform() < keep) kept.push_back(l);
    if (!kept.empty()) out.push_back(negate(Cube(std::move(kept))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checking in one of the three modes.

struct CheckReport {
  Mode mode = Mode::vanilla;
  VerificationResult result;
  PdrStats stats;
  std::size_t candidates = 0;
  std::size_t filtered = 0;  // |C*|
  std::size_t injected = 0;
  std::uint64_t sanity_queries = 0;
  double prepare_seconds = 0.0;  // sampling, scoring and filtering
  double total_seconds = 0.0;

  // Engine queries plus the sanity filter's.
  std::uint64_t sat_queries() const noexcept { return stats.sat_queries + sanity_queries; }
};

// `artifacts` may carry precomputed embeddings and CTIs; missing pieces are
// computed here and their time is charged to the run.
inline CheckReport run_check(const Aig& aig, Mode mode, const PipelineConfig& cfg, const PdrOptions& opts = {},
                             const CircuitArtifacts* artifacts = nullptr, std::span<const Clause> extra = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  CheckReport rep;
  rep.mode = mode;
  auto ts = to_transition_system(aig);

  std::vector<Clause> candidates(extra.begin(), extra.end());
  if (mode != Mode::vanilla) {
    std::vector<CtiSample> own_ctis;
    std::span<const CtiSample> ctis;
    if (artifacts) {
      ctis = artifacts->ctis;
    } else {
      own_ctis = sample_ctis(ts, cfg.ctis, CtiOptions{cfg.seed, 64, 8});
      ctis = own_ctis;
    }
    if (mode == Mode::legend) {
      if (!cfg.scorer) throw std::invalid_argument("legend mode needs scorer weights");
      EmbeddingTable own;
      const EmbeddingTable* table = artifacts ? &artifacts->table : nullptr;
      if (!table) {
        own = embed_circuit(aig, cfg);
        table = &own;
      }
      auto c = scored_candidates(ctis, *table, *cfg.scorer, cfg.assembly);
      candidates.insert(candidates.end(), c.begin(), c.end());
    } else {
      auto c = random_candidates(ctis, cfg.seed, cfg.ablation_keep);
      candidates.insert(candidates.end(), c.begin(), c.end());
    }
  }
  std::vector<Clause> sideload;
  if (!candidates.empty()) {
    auto f = filter_candidates(ts, candidates);
    rep.sanity_queries = f.queries;
    sideload = std::move(f.accepted);
    if (cfg.max_sideload && sideload.size() > cfg.max_sideload) sideload.resize(cfg.max_sideload);
  }
  rep.candidates = candidates.size();
  rep.filtered = sideload.size();
  rep.prepare_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  PdrOptions o = opts;
  if (o.budget.time_limit_s > 0) o.budget.time_limit_s = std::max(1e-3, o.budget.time_limit_s - rep.prepare_seconds);
  PdrEngine engine(ts, o);
  rep.injected = engine.inject_sideload(sideload);
  rep.result = engine.check();
  rep.stats = engine.stats();
  rep.total_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Oracle labels.

struct OracleOutcome {
  enum class Status { labeled, unsafe, unknown, trivially_safe } status = Status::unknown;
  std::vector<LabeledCti> labels;
  LabelStats stats;
  std::vector<Lemma> invariant;
};

inline OracleOutcome oracle_labels(const Aig& aig, std::span<const CtiSample> ctis, double timeout_s) {
  OracleOutcome out;
  auto ts = to_transition_system(aig);
  PdrOptions o;
  o.budget.time_limit_s = timeout_s;
  auto r = check(ts, {}, o);
  if (r.verdict == Verdict::unsafe) {
    out.status = OracleOutcome::Status::unsafe;
    return out;
  }
  if (r.verdict == Verdict::unknown) return out;
  if (ctis.empty()) {
    out.status = OracleOutcome::Status::trivially_safe;
    return out;
  }
  out.status = OracleOutcome::Status::labeled;
  out.invariant = r.invariant;
  out.labels = generate_labels(ctis, r.invariant, &out.stats);
  return out;
}

// ---------------------------------------------------------------------------
// PAR2 benchmark.

inline double par2_time(bool solved, double wall, double timeout) {
  return solved && wall <= timeout ? wall : 2.0 * timeout;
}

struct BenchRow {
  std::string instance;
  Mode mode = Mode::vanilla;
  Verdict verdict = Verdict::unknown;
  double wall = 0.0;
  double par2 = 0.0;
  std::uint64_t sat_queries = 0;
  std::size_t sideload_offered = 0;
  std::size_t sideload_accepted = 0;
  std::string error;
};

struct ModeSummary {
  Mode mode = Mode::vanilla;
  std::size_t safe = 0, unsafe = 0, unsolved = 0;
  double total_par2 = 0.0;
  double average_par2 = 0.0;
  double speedup = 0.0;  // baseline total PAR2 / this mode's total PAR2
};

struct BenchReport {
  double timeout = 0.0;
  std::vector<BenchRow> rows;
  std::vector<ModeSummary> summaries;
};

// Aggregates per mode; the first mode listed is the speedup baseline.
inline std::vector<ModeSummary> summarize(std::span<const BenchRow> rows, std::span<const Mode> modes) {
  std::vector<ModeSummary> out;
  for (auto m : modes) {
    ModeSummary s;
    s.mode = m;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.mode != m) continue;
      ++n;
      s.total_par2 += r.par2;
      if (r.verdict == Verdict::safe) ++s.safe;
      else if (r.verdict == Verdict::unsafe) ++s.unsafe;
      else ++s.unsolved;
    }
    s.average_par2 = n ? s.total_par2 / static_cast<double>(n) : 0.0;
    out.push_back(s);
  }
  for (auto& s : out) s.speedup = s.total_par2 > 0 ? out.front().total_par2 / s.total_par2 : 0.0;
  return out;
}

inline void write_bench_csv(std::ostream& os, const BenchReport& rep) {
  os << "instance,mode,verdict,wall_s,par2_s,sat_queries,sideload_offered,sideload_accepted,error\n";
  for (const auto& r : rep.rows)
    os << r.instance << ',' << to_string(r.mode) << ',' << to_string(r.verdict) << ',' << std::fixed
       << std::setprecision(6) << r.wall << ',' << r.par2 << std::defaultfloat << ',' << r.sat_queries << ','
       << r.sideload_offered << ',' << r.sideload_accepted << ',' << r.error << '\n';
}

inline void write_bench_table(std::ostream& os, const BenchReport& rep) {
  os << std::left << std::setw(16) << "mode" << std::right << std::setw(6) << "safe" << std::setw(8) << "unsafe"
     << std::setw(10) << "unsolved" << std::setw(14) << "PAR2 total" << std::setw(12) << "PAR2 avg" << std::setw(10)
     << "speedup" << '\n';
  for (const auto& s : rep.summaries)
    os << std::left << std::setw(16) << to_string(s.mode) << std::right << std::setw(6) << s.safe << std::setw(8)
       << s.unsafe << std::setw(10) << s.unsolved << std::fixed << std::setprecision(2) << std::setw(14)
       << s.total_par2 << std::setw(12) << s.average_par2 << std::setw(9) << s.speedup << 'x' << std::defaultfloat
       << '\n';
}

struct BenchJob {
  std::filesystem::path instance;
  Mode mode = Mode::vanilla;
};

namespace detail {

inline std::string encode_row(const CheckReport& r) {
  std::ostringstream os;
  os << static_cast<int>(r.result.verdict) << ' ' << std::setprecision(17) << r.total_seconds << ' '
     << r.sat_queries() << ' ' << r.stats.sideload_offered << ' ' << r.stats.sideload_accepted << '\n';
  return os.str();
}

inline void write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    auto n = ::write(fd, s.data() + off, s.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return;
    off += static_cast<std::size_t>(n);
  }
}

inline std::string read_all(int fd) {
  std::string out;
  char buf[4096];
  for (;;) {
    auto n = ::read(fd, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace detail

// Runs every job in its own child process, at most `jobs` at a time, killing
// children that exceed the timeout.
inline BenchReport run_bench(std::span<const BenchJob> work, std::span<const Mode> modes, const PipelineConfig& cfg,
                             double timeout, std::size_t jobs = 1) {
  using clock = std::chrono::steady_clock;
  struct Child {
    pid_t pid;
    int fd;
    std::size_t job;
    clock::time_point start;
    bool killed = false;
    std::string data;
  };
  BenchReport rep;
  rep.timeout = timeout;
  rep.rows.resize(work.size());
  std::vector<Child> running;
  std::size_t next = 0;
  jobs = std::max<std::size_t>(jobs, 1);

  auto finish = [&](Child& c, int status) {
    BenchRow& row = rep.rows[c.job];
    row.instance = work[c.job].instance.filename().string();
    row.mode = work[c.job].mode;
    row.wall = std::chrono::duration<double>(clock::now() - c.start).count();
    c.data += detail::read_all(c.fd);
    ::close(c.fd);
    std::istringstream is(c.data);
    int v = -1;
    if (!c.killed && WIFEXITED(status) && WEXITSTATUS(status) == 0 && (is >> v)) {
      is >> row.wall >> row.sat_queries >> row.sideload_offered >> row.sideload_accepted;
      row.verdict = static_cast<Verdict>(v);
    } else {
      row.verdict = Verdict::unknown;
      row.error = c.killed ? "timeout" : (c.data.empty() ? "crashed" : c.data.substr(0, c.data.find('\n')));
      if (c.killed) row.wall = timeout;
    }
    row.par2 = par2_time(row.verdict != Verdict::unknown, row.wall, timeout);
  };

  while (next < work.size() || !running.empty()) {
    while (next < work.size() && running.size() < jobs) {
      int p[2];
      if (::pipe(p) != 0) throw std::runtime_error("pipe failed");
      std::fflush(nullptr);
      pid_t pid = ::fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        ::close(p[0]);
        int code = 0;
        std::string out;
        try {
          Aig aig = read_aiger_file(work[next].instance.string());
          PdrOptions o;
          o.budget.time_limit_s = timeout;
          out = detail::encode_row(run_check(aig, work[next].mode, cfg, o));
        } catch (const std::exception& e) {
          out = std::string("error: ") + e.what() + '\n';
          code = 3;
        }
        detail::write_all(p[1], out);
        ::close(p[1]);
        ::_exit(code);
      }
      ::close(p[1]);
      running.push_back({pid, p[0], next, clock::now(), false, {}});
      ++next;
    }
    bool progressed = false;
    for (std::size_t i = 0; i < running.size();) {
      auto& c = running[i];
      int status = 0;
      pid_t r = ::waitpid(c.pid, &status, WNOHANG);
      if (r == c.pid) {
        finish(c, status);
        running.erase(running.begin() + static_cast<std::ptrdiff_t>(i));
        progressed = true;
        continue;
      }
      if (!c.killed && std::chrono::duration<double>(clock::now() - c.start).count() > timeout) {
        ::kill(c.pid, SIGKILL);
        c.killed = true;
      }
      ++i;
    }
    if (!progressed) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  rep.summaries = summarize(rep.rows, modes);
  return rep;
}

}  // namespace legend
