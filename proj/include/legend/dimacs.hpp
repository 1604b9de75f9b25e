#pragma once

// DIMACS emission and the external-solver backend. The external backend pipes
// the whole database (assumptions as unit clauses) into a competition-style
// solver process and reads back "s ..." / "v ..." lines.

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "legend/sat.hpp"

namespace legend::sat {

inline void write_dimacs(std::ostream& os, std::size_t num_vars,
                         std::span<const std::vector<Lit>> clauses,
                         std::span<const Lit> assumptions = {}) {
  os << "p cnf " << num_vars << " " << clauses.size() + assumptions.size() << "\n";
  for (const auto& c : clauses) {
    for (Lit l : c) os << l.dimacs() << " ";
    os << "0\n";
  }
  for (Lit a : assumptions) os << a.dimacs() << " 0\n";
}

struct DimacsProblem {
  std::size_t num_vars = 0;
  std::vector<std::vector<Lit>> clauses;
};

inline DimacsProblem read_dimacs(std::istream& in) {
  DimacsProblem p;
  std::string tok;
  std::vector<Lit> cur;
  bool header = false;
  while (in >> tok) {
    if (tok == "c") {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (tok == "p") {
      std::string fmt;
      std::size_t nc = 0;
      in >> fmt >> p.num_vars >> nc;
      if (fmt != "cnf") throw std::runtime_error("DIMACS: expected 'p cnf'");
      header = true;
      continue;
    }
    if (!header) throw std::runtime_error("DIMACS: clause before header");
    long long v = std::stoll(tok);
    if (v == 0) {
      p.clauses.push_back(cur);
      cur.clear();
    } else {
      auto var = static_cast<Var>((v < 0 ? -v : v) - 1);
      if (var >= p.num_vars) throw std::runtime_error("DIMACS: variable out of range");
      cur.push_back(Lit(var, v < 0));
    }
  }
  if (!cur.empty()) p.clauses.push_back(cur);
  return p;
}

// Runs `command` through /bin/sh, feeding it DIMACS on stdin.
class PipeSolver final : public Backend {
 public:
  explicit PipeSolver(std::string command) : command_(std::move(command)) {}

  Var new_var() override { return static_cast<Var>(num_vars_++); }
  std::size_t num_vars() const override { return num_vars_; }

  void add_clause(std::span<const Lit> lits) override {
    for (Lit l : lits)
      if (l.var() >= num_vars_)
        throw std::out_of_range("literal references unallocated variable " + std::to_string(l.var()));
    if (lits.empty()) ok_ = false;
    clauses_.emplace_back(lits.begin(), lits.end());
  }
  using Backend::add_clause;

  Result solve(std::span<const Lit> assumptions) override {
    ++stats_.solves;
    model_.clear();
    core_.clear();
    if (!ok_) return Result::Unsat;
    std::ostringstream dimacs;
    write_dimacs(dimacs, num_vars_, clauses_, assumptions);
    std::string output = run(dimacs.str());

    std::istringstream in(output);
    std::string line;
    Result r = Result::Unknown;
    std::vector<Value> model(num_vars_, Value::False);
    while (std::getline(in, line)) {
      if (line.rfind("s ", 0) == 0) {
        if (line.find("UNSATISFIABLE") != std::string::npos) r = Result::Unsat;
        else if (line.find("SATISFIABLE") != std::string::npos) r = Result::Sat;
      } else if (line.rfind("v ", 0) == 0) {
        std::istringstream vs(line.substr(2));
        long long v;
        while (vs >> v) {
          if (v == 0) continue;
          auto var = static_cast<std::size_t>((v < 0 ? -v : v) - 1);
          if (var < num_vars_) model[var] = v > 0 ? Value::True : Value::False;
        }
      }
    }
    if (r == Result::Sat) model_ = std::move(model);
    if (r == Result::Unsat) {
      // The external process reports no core; the full assumption set is a
      // valid (non-minimal) one.
      core_.assign(assumptions.begin(), assumptions.end());
      std::sort(core_.begin(), core_.end());
      core_.erase(std::unique(core_.begin(), core_.end()), core_.end());
    }
    return r;
  }
  using Backend::solve;

  Value model_value(Lit l) const override {
    if (l.var() >= model_.size()) return Value::Undef;
    return model_[l.var()] ^ l.negated();
  }
  std::span<const Lit> core() const override { return core_; }
  bool okay() const override { return ok_; }
  void set_deadline(std::optional<std::chrono::steady_clock::time_point>) override {}
  const SolverStats& stats() const override { return stats_; }

 private:
  std::string run(const std::string& input) const {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw std::runtime_error("pipe() failed");
    pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    auto old = std::signal(SIGPIPE, SIG_IGN);
    std::size_t written = 0;
    while (written < input.size()) {
      ssize_t n = write(to_child[1], input.data() + written, input.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        break;
      }
      written += static_cast<std::size_t>(n);
    }
    close(to_child[1]);
    std::string out;
    char buf[4096];
    for (;;) {
      ssize_t n = read(from_child[0], buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      out.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    std::signal(SIGPIPE, old);
    return out;
  }

  std::string command_;
  std::size_t num_vars_ = 0;
  std::vector<std::vector<Lit>> clauses_;
  std::vector<Value> model_;
  std::vector<Lit> core_;
  bool ok_ = true;
  SolverStats stats_;
};

struct BackendConfig {
  // Empty: built-in CDCL solver. Otherwise a shell command for PipeSolver.
  std::string external_command;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg = {}) {
  if (cfg.external_command.empty()) return std::make_unique<Solver>();
  return std::make_unique<PipeSolver>(cfg.external_command);
}

}  // namespace legend::sat
