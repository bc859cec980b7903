/*
Copyright 2026 The hiercoll Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hiercoll/engine.hpp"
#include "hiercoll/factorize.hpp"
#include "hiercoll/machine.hpp"
#include "hiercoll/perf.hpp"
#include "hiercoll/pipeline.hpp"
#include "hiercoll/presets.hpp"

namespace {

using namespace hiercoll;

int log_level() {
  const char* env = std::getenv("HIERCOLL_LOG");
  if (!env || !*env) return 0;
  if (std::string(env) == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[hiercoll] " << msg << "\n";
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << text;
  log_info("wrote " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonArgs {
  std::string collective = "broadcast";
  std::string formulation = "single";
  int p = 0;
  int64_t count = 1;
  int root = 0;
  std::string op = "sum";
  std::string machine_path;
  int stripe = 1;
  int ring = 1;
  int pipeline_depth = 1;
  std::string program_path;
  std::string plan_path;
  std::string out;
};

void add_collective_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--collective", a.collective,
                  "scatter|broadcast|gather|reduce|all_to_all|all_gather|"
                  "reduce_scatter|all_reduce");
  cmd->add_option("--formulation", a.formulation, "single|multi|multi_alt");
  cmd->add_option("--p", a.p, "number of GPU endpoints");
  cmd->add_option("--count", a.count, "per-rank chunk length, elements");
  cmd->add_option("--root", a.root, "root rank for rooted collectives");
  cmd->add_option("--op", a.op, "sum|max");
}

void add_config_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--machine", a.machine_path, "machine description file");
  cmd->add_option("--stripe", a.stripe, "striping factor s");
  cmd->add_option("--ring", a.ring, "conceptual ring node count n");
  cmd->add_option("--pipeline", a.pipeline_depth, "pipeline depth m");
}

CollectiveSpec spec_of(const CommonArgs& a) {
  CollectiveSpec spec;
  spec.kind = collective_from_string(a.collective);
  spec.formulation = formulation_from_string(a.formulation);
  spec.root = a.root;
  spec.count = a.count;
  spec.op = reduce_op_from_string(a.op);
  return spec;
}

MachineDescriptor load_machine(const CommonArgs& a, int p) {
  if (a.machine_path.empty())
    throw Error(ErrorCode::ParseError, "--machine is required");
  MachineDescriptor m = MachineDescriptor::load(a.machine_path);
  require_valid_machine(m, p);
  return m;
}

CollectiveProgram obtain_program(const CommonArgs& a) {
  if (!a.program_path.empty())
    return CollectiveProgram::deserialize(read_file(a.program_path));
  if (a.p <= 0)
    throw Error(ErrorCode::ParseError, "--p (or --program) is required");
  return build(spec_of(a), a.p);
}

StagedPlan obtain_plan(const CommonArgs& a) {
  if (!a.plan_path.empty())
    return StagedPlan::deserialize(read_file(a.plan_path));
  CollectiveProgram prog = obtain_program(a);
  MachineDescriptor m = load_machine(a, prog.world_size());
  return lower(prog, m, {a.stripe, a.ring, a.pipeline_depth});
}

std::string simulate_csv_header() {
  return "collective,formulation,p,count,machine,stripe,ring,pipeline,"
         "t_seconds,throughput_Bps,bound_Bps,utilization,analytic_t_seconds,"
         "analytic_model\n";
}

std::string simulate_csv_row(const CommonArgs& a, int p,
                             const OptimizationConfig& cfg,
                             const ThroughputReport& rep) {
  std::string row = a.collective + "," + a.formulation + "," +
                    std::to_string(p) + "," + std::to_string(a.count) + "," +
                    a.machine_path + "," + std::to_string(cfg.stripe) + "," +
                    std::to_string(cfg.ring) + "," +
                    std::to_string(cfg.pipeline) + "," + fmt(rep.t) + "," +
                    fmt(rep.throughput) + ",";
  row += rep.bound ? fmt(*rep.bound) : "";
  row += ",";
  row += rep.utilization ? fmt(*rep.utilization) : "";
  row += ",";
  row += rep.analytic_t ? fmt(*rep.analytic_t) : "";
  row += "," + rep.analytic_model + "\n";
  return row;
}

std::vector<int64_t> parse_list(const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  if (out.empty())
    throw Error(ErrorCode::ParseError, "empty sweep list '" + text + "'");
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "hiercoll: compose collectives from multicast/reduction/fence "
      "primitives, lower them onto hierarchical machine models, and check "
      "and simulate the resulting schedules"};
  app.require_subcommand(1);
  CommonArgs a;

  auto* plan_cmd = app.add_subcommand("plan", "emit a collective program");
  add_collective_flags(plan_cmd, a);
  plan_cmd->add_option("--out", a.out, "output file (default stdout)");

  auto* lower_cmd =
      app.add_subcommand("lower", "lower a program to a staged plan");
  add_collective_flags(lower_cmd, a);
  add_config_flags(lower_cmd, a);
  lower_cmd->add_option("--program", a.program_path,
                        "serialized program (instead of --collective)");
  lower_cmd->add_option("--out", a.out, "output file");

  auto* pipe_cmd =
      app.add_subcommand("pipeline", "pipeline a staged plan into slots");
  add_collective_flags(pipe_cmd, a);
  add_config_flags(pipe_cmd, a);
  pipe_cmd->add_option("--program", a.program_path, "serialized program");
  pipe_cmd->add_option("--plan", a.plan_path, "serialized staged plan");
  pipe_cmd->add_option("--out", a.out, "output file");

  int slot_arg = -1;
  auto* matrix_cmd = app.add_subcommand(
      "matrix", "communication matrix of one schedule slot as CSV");
  add_collective_flags(matrix_cmd, a);
  add_config_flags(matrix_cmd, a);
  matrix_cmd->add_option("--program", a.program_path, "serialized program");
  matrix_cmd->add_option("--plan", a.plan_path, "serialized staged plan");
  matrix_cmd->add_option("--stage", slot_arg, "slot index")->required();
  matrix_cmd->add_option("--out", a.out, "output file");

  auto* check_cmd = app.add_subcommand(
      "check", "verify plan semantics against the reference oracle");
  add_collective_flags(check_cmd, a);
  add_config_flags(check_cmd, a);

  auto* sim_cmd =
      app.add_subcommand("simulate", "simulate a schedule and report timing");
  add_collective_flags(sim_cmd, a);
  add_config_flags(sim_cmd, a);
  sim_cmd->add_option("--out", a.out, "output CSV file");

  std::string sweep_stripe = "1", sweep_ring = "1", sweep_pipeline = "1";
  std::string sweep_count;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "simulate a grid of configurations");
  add_collective_flags(sweep_cmd, a);
  sweep_cmd->add_option("--machine", a.machine_path, "machine file");
  sweep_cmd->add_option("--stripe", sweep_stripe, "comma list of s values");
  sweep_cmd->add_option("--ring", sweep_ring, "comma list of n values");
  sweep_cmd->add_option("--pipeline", sweep_pipeline, "comma list of m values");
  sweep_cmd->add_option("--count", sweep_count, "comma list of d values");
  sweep_cmd->add_option("--out", a.out, "output CSV file");

  auto* bounds_cmd = app.add_subcommand(
      "bounds", "asymptotic per-collective throughput limits");
  bounds_cmd->add_option("--machine", a.machine_path, "machine file");
  bounds_cmd->add_option("--p", a.p, "number of GPU endpoints")->required();
  bounds_cmd->add_option("--out", a.out, "output CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (plan_cmd->parsed()) {
      CollectiveProgram prog = obtain_program(a);
      write_out(a.out, prog.serialize());
      return 0;
    }
    if (lower_cmd->parsed()) {
      write_out(a.out, obtain_plan(a).serialize());
      return 0;
    }
    if (pipe_cmd->parsed()) {
      StagedPlan plan = obtain_plan(a);
      write_out(a.out, pipeline(plan, a.pipeline_depth).serialize());
      return 0;
    }
    if (matrix_cmd->parsed()) {
      StagedPlan plan = obtain_plan(a);
      PipelinedPlan pp = pipeline(plan, a.pipeline_depth);
      if (slot_arg < 0 || slot_arg >= pp.slots)
        throw Error(ErrorCode::InvalidConfig,
                    "--stage " + std::to_string(slot_arg) +
                        " outside schedule of " + std::to_string(pp.slots) +
                        " slots");
      auto matrix = comm_matrix(pp, slot_arg);
      std::string csv;
      for (const auto& row : matrix) {
        for (size_t j = 0; j < row.size(); ++j) {
          if (j) csv += ",";
          csv += std::to_string(row[j]);
        }
        csv += "\n";
      }
      write_out(a.out, csv);
      return 0;
    }
    if (check_cmd->parsed()) {
      CollectiveProgram prog = obtain_program(a);
      MachineDescriptor m = load_machine(a, prog.world_size());
      OptimizationConfig cfg{a.stripe, a.ring, a.pipeline_depth};
      StagedPlan plan = lower(prog, m, cfg);
      PipelinedPlan pp = pipeline(plan, a.pipeline_depth);
      SymbolicState actual = execute_plan(pp);
      SymbolicState expected =
          reference_semantics(spec_of(a), prog.world_size());
      if (auto div = states_equal(expected, actual)) {
        std::cout << "FAIL: " << div->to_string() << "\n";
        return 1;
      }
      std::cout << "PASS\n";
      return 0;
    }
    if (sim_cmd->parsed()) {
      CollectiveProgram prog = obtain_program(a);
      MachineDescriptor m = load_machine(a, prog.world_size());
      OptimizationConfig cfg{a.stripe, a.ring, a.pipeline_depth};
      PipelinedPlan pp = pipeline(lower(prog, m, cfg), cfg.pipeline);
      Timeline tl = simulate(pp, m);
      ThroughputReport rep =
          make_report(collective_from_string(a.collective), prog.world_size(),
                      a.count, m, cfg, tl);
      write_out(a.out, simulate_csv_header() +
                           simulate_csv_row(a, prog.world_size(), cfg, rep));
      return 0;
    }
    if (sweep_cmd->parsed()) {
      if (a.p <= 0) throw Error(ErrorCode::ParseError, "--p is required");
      if (sweep_count.empty()) sweep_count = std::to_string(a.count);
      MachineDescriptor m = load_machine(a, a.p);
      std::string csv = simulate_csv_header();
      CollectiveSpec spec = spec_of(a);
      for (int64_t d : parse_list(sweep_count))
        for (int64_t s : parse_list(sweep_stripe))
          for (int64_t n : parse_list(sweep_ring))
            for (int64_t mm : parse_list(sweep_pipeline)) {
              CommonArgs row = a;
              row.count = d;
              spec.count = d;
              CollectiveProgram prog = build(spec, a.p);
              OptimizationConfig cfg{(int)s, (int)n, (int)mm};
              PipelinedPlan pp = pipeline(lower(prog, m, cfg), cfg.pipeline);
              Timeline tl = simulate(pp, m);
              ThroughputReport rep = make_report(spec.kind, a.p, d, m, cfg, tl);
              csv += simulate_csv_row(row, a.p, cfg, rep);
              log_info("sweep d=" + std::to_string(d) + " s=" +
                       std::to_string(s) + " n=" + std::to_string(n) + " m=" +
                       std::to_string(mm) + " done");
            }
      write_out(a.out, csv);
      return 0;
    }
    if (bounds_cmd->parsed()) {
      MachineDescriptor m = load_machine(a, a.p);
      std::string csv = "collective,p,g,k,f_Bps,bound_Bps,bound_GBps\n";
      for (int k = 0; k <= (int)CollectiveKind::all_reduce; ++k) {
        const auto kind = (CollectiveKind)k;
        const double b = bound(kind, a.p, m.gpus_per_node, m.nics_per_node,
                               m.nic_bandwidth);
        csv += to_string(kind) + "," + std::to_string(a.p) + "," +
               std::to_string(m.gpus_per_node) + "," +
               std::to_string(m.nics_per_node) + "," + fmt(m.nic_bandwidth) +
               "," + fmt(b) + "," + fmt(b / 1e9) + "\n";
      }
      write_out(a.out, csv);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
