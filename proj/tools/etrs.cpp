#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "etrs/harness.hpp"
#include "etrs/opf.hpp"
#include "etrs/slabs.hpp"

using namespace etrs;

namespace {

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_line(const io::json& j) {
  std::string s = io::dump(j, 0);
  std::erase(s, '\n');
  return s;
}

void print_row(const char* label, const LinearRow& r) {
  std::cout << label << ": " << one_line(io::json{{"A", io::detail::to_json(r.A)}, {"a", io::detail::to_json(r.a)}, {"a0", r.a0}})
            << " >= 0\n";
}

void print_hull_row(const char* label, const opf::HullRow& r) {
  std::cout << label << ": " << g17(r.constant) << " + " << g17(r.coef(0)) << " W11 + "
            << g17(r.coef(1)) << " W22 + " << g17(r.coef(2)) << " W12 + " << g17(r.coef(3))
            << " T12 >= 0\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cuts for the extended trust-region subproblem with an SOC constraint"};
  app.require_subcommand(1);

  LoopSettings loop;
  auto add_loop_flags = [&](CLI::App* sub) {
    sub->add_option("--tau-sep", loop.tau_sep, "separation threshold")->capture_default_str();
    sub->add_option("--tau-rank", loop.tau_rank, "eigenvalue ratio treated as rank one")
        ->capture_default_str();
    sub->add_option("--max-cuts", loop.max_cuts, "cut limit per instance")->capture_default_str();
  };

  // gen
  auto* gen = app.add_subcommand("gen", "write a random instance as JSON");
  int gen_n = 2;
  std::string gen_variant = "general";
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--n", gen_n, "dimension")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--variant", gen_variant, "general|wedge|ttrs")->capture_default_str();
  gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "output file (default stdout)");

  // solve
  auto* solve = app.add_subcommand("solve", "solve one relaxation of an instance");
  std::string solve_in;
  std::string solve_relax = "ksoc";
  solve->add_option("instance", solve_in, "instance JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--relax", solve_relax, "shor|ksoc")->capture_default_str();
  solve->add_option("--tau-rank", loop.tau_rank, "eigenvalue ratio treated as rank one")
      ->capture_default_str();

  // cuts
  auto* cuts = app.add_subcommand("cuts", "run the cutting loop and print its trajectory as JSON");
  std::string cuts_in;
  std::string cuts_relax = "ksoc";
  std::string cuts_out;
  cuts->add_option("instance", cuts_in, "instance JSON")->required()->check(CLI::ExistingFile);
  cuts->add_option("--relax", cuts_relax, "bootstrap relaxation, shor|ksoc")->capture_default_str();
  cuts->add_option("-o,--out", cuts_out, "output file (default stdout)");
  add_loop_flags(cuts);

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a randomized batch and print the summary CSV");
  ExperimentConfig cfg;
  std::string exp_variant = "general";
  std::string exp_bootstrap = "ksoc";
  std::string exp_out;
  std::string exp_records;
  exp->add_option("--variant", exp_variant, "general|wedge|ttrs")->capture_default_str();
  exp->add_option("--bootstrap", exp_bootstrap, "shor|ksoc")->capture_default_str();
  exp->add_option("--n", cfg.n_list, "dimensions")->capture_default_str();
  exp->add_option("--count", cfg.count, "instances per dimension")->capture_default_str();
  exp->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  exp->add_option("--threads", cfg.threads, "worker threads (0 = all cores)")->capture_default_str();
  exp->add_option("-o,--out", exp_out, "CSV file (default stdout)");
  exp->add_option("--records", exp_records, "also write per-instance records as JSON");
  add_loop_flags(exp);

  // opf-verify
  auto* opfv = app.add_subcommand("opf-verify", "compare the OPF hull rows with the special-case rows");
  opf::OpfBusPair bus;
  std::string opf_json;
  auto* l11 = opfv->add_option("--L11", bus.L11);
  auto* l22 = opfv->add_option("--L22", bus.L22);
  auto* l12 = opfv->add_option("--L12", bus.L12);
  auto* u11 = opfv->add_option("--U11", bus.U11);
  auto* u22 = opfv->add_option("--U22", bus.U22);
  auto* u12 = opfv->add_option("--U12", bus.U12);
  auto* jopt = opfv->add_option("--json", opf_json, "file with keys L11 L22 L12 U11 U22 U12")
                   ->check(CLI::ExistingFile);
  for (auto* o : {l11, l22, l12, u11, u22, u12}) {
    o->excludes(jopt);
    o->needs(l11)->needs(l22)->needs(l12)->needs(u11)->needs(u22)->needs(u12);
  }
  double opf_tol = 1e-8;
  opfv->add_option("--tol", opf_tol, "coefficient tolerance")->capture_default_str();

  // orthant
  auto* orth = app.add_subcommand("orthant", "run the orthant separation loop");
  int orth_n = 2;
  int orth_rounds = 50;
  orth->add_option("--n", orth_n, "dimension")->check(CLI::Range(1, 50))->capture_default_str();
  orth->add_option("--max-rounds", orth_rounds, "row limit")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const EtrsInstance inst = random_instance(gen_n, parse_variant(gen_variant), gen_seed);
      emit(io::dump(io::instance_to_json(inst)), gen_out);
    } else if (*solve) {
      const EtrsInstance inst = io::instance_from_json(io::read_file(solve_in));
      const auto r = solve_relaxation(inst, bootstrap_spec(parse_bootstrap(solve_relax)));
      const bool rank1 = rank1_check(r.Y, loop.tau_rank);
      std::cout << "value " << g17(r.value) << "\n"
                << "status " << conic::to_string(r.solution.status) << "\n"
                << "rank1 " << (rank1 ? "yes" : "no") << "\n";
      if (rank1) std::cout << "x " << one_line(io::detail::to_json(r.point.x)) << "\n";
    } else if (*cuts) {
      const EtrsInstance inst = io::instance_from_json(io::read_file(cuts_in));
      const LoopResult r = cutting_loop(inst, bootstrap_spec(parse_bootstrap(cuts_relax)), loop);
      io::json j;
      j["rho"] = r.rho;
      j["bounds"] = r.bounds;
      j["violations"] = r.violations;
      j["initial_rank1"] = r.initial_rank1;
      j["final_rank1"] = r.final_rank1;
      j["stop"] = to_string(r.stop);
      j["category"] = to_string(classify(r));
      j["cuts"] = io::json::array();
      for (const Cut& c : r.cuts) j["cuts"].push_back(io::cut_to_json(c));
      j["final_x"] = io::detail::to_json(r.final_point.x);
      j["final_X"] = io::detail::to_json(r.final_point.X);
      if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
      emit(io::dump(j), cuts_out);
    } else if (*exp) {
      cfg.variant = parse_variant(exp_variant);
      cfg.bootstrap = parse_bootstrap(exp_bootstrap);
      cfg.loop = loop;
      const auto records = run_experiment(cfg);
      int failed = 0;
      for (const auto& r : records) {
        if (r.failed()) {
          ++failed;
          std::cerr << "instance " << r.id << " (n=" << r.n << ") failed: " << r.failure << "\n";
        } else if (r.flagged) {
          std::cerr << "instance " << r.id << " (n=" << r.n << ") flagged: bounds out of order\n";
        }
      }
      if (failed > 0) std::cerr << failed << " instances left out of the table\n";
      std::ostringstream csv;
      write_csv(csv, aggregate(records));
      emit(csv.str(), exp_out);
      if (!exp_records.empty()) io::write_file(exp_records, io::records_to_json(records));
    } else if (*opfv) {
      if (!opf_json.empty()) {
        const io::json j = io::read_file(opf_json);
        bus.L11 = io::detail::number(io::detail::field(j, "L11"), "L11");
        bus.L22 = io::detail::number(io::detail::field(j, "L22"), "L22");
        bus.L12 = io::detail::number(io::detail::field(j, "L12"), "L12");
        bus.U11 = io::detail::number(io::detail::field(j, "U11"), "U11");
        bus.U22 = io::detail::number(io::detail::field(j, "U22"), "U22");
        bus.U12 = io::detail::number(io::detail::field(j, "U12"), "U12");
      } else if (l11->count() == 0) {
        throw std::invalid_argument("give the six bounds or --json");
      }
      const auto [upper, lower] = opf::chen_inequalities(bus);
      print_hull_row("hull upper", upper);
      print_hull_row("hull lower", lower);
      const auto [a, b] = opf::special_case_opf_rows(bus);
      print_row("special 1", a);
      print_row("special 2", b);
      const bool ok = opf::verify_equivalence(bus, opf_tol);
      std::cout << "equivalent " << (ok ? "true" : "false") << "\n";
      return ok ? 0 : 2;
    } else if (*orth) {
      const OrthantLoopResult r = orthant_loop(orth_n, orthant_objective(orth_n), orth_rounds);
      for (std::size_t k = 0; k < r.bounds.size(); ++k) {
        std::cout << "round " << k << " value " << g17(r.bounds[k]);
        if (k < r.cuts.size()) std::cout << " violation " << g17(r.cuts[k].violation);
        std::cout << "\n";
      }
      std::cout << (r.separated_out ? "no violated row remains" : "stopped at the row limit") << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
