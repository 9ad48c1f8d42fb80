// Copyright (c) 2026 The swx Authors.
// SPDX-License-Identifier: Apache-2.0
//
// swx: grammar-based architecture alignment, crossover, search and analysis.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "swx/analysis.hpp"
#include "swx/bench.hpp"
#include "swx/crossover.hpp"
#include "swx/oracle.hpp"
#include "swx/search.hpp"

namespace {

using nlohmann::json;

constexpr const char* kVersion = "swx 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;
constexpr int kExitInternal = 3;

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

swx::DerivationTree load_single_tree(const std::string& path) {
  auto trees = swx::read_trees_file(path);
  if (trees.empty()) throw swx::DomainError("no tree found in " + path);
  trees.front().tree_id = path;
  return trees.front();
}

swx::ScoringMatrix scoring_from_flag(const std::string& flag) {
  if (flag == "sm0" || flag == "sm1" || flag == "sm2" || flag == "sm3")
    return swx::ScoringMatrix::preset_by_name(flag);
  return swx::ScoringMatrix::from_file(flag);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw swx::DomainError("cannot open output file: " + path);
  return f;
}

json path_to_json(const swx::EditPath& path) {
  json j;
  j["total_cost"] = path.total_cost;
  j["variant_mask"] = path.variant_mask;
  j["steps"] = json::array();
  for (const auto& st : path.steps)
    j["steps"].push_back({{"dir", swx::to_string(st.dir)}, {"i1", st.i1}, {"i2", st.i2}});
  j["step_op"] = path.step_op;
  j["ops"] = json::array();
  for (const auto& op : path.ops) {
    json g = json::array();
    for (const auto& grp : op.groups)
      g.push_back({{"disablers", grp.disablers}, {"enablers", grp.enablers}});
    j["ops"].push_back({{"id", op.id},
                        {"type", swx::to_string(op.op_type)},
                        {"value", op.value},
                        {"i", op.i},
                        {"j", op.j},
                        {"ii", op.ii},
                        {"jj", op.jj},
                        {"disablers", op.disablers},
                        {"enablers", op.enablers},
                        {"groups", g},
                        {"variant_mask", op.variant_mask},
                        {"step", op.step}});
  }
  return j;
}

swx::Dir dir_from_string(const std::string& s) {
  if (s == "sub") return swx::Dir::Sub;
  if (s == "add") return swx::Dir::Add;
  if (s == "rem") return swx::Dir::Rem;
  throw swx::DomainError("bad step direction in ops file: " + s);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommonAlignArgs {
  std::string file_a, file_b;
  std::string scoring = "sm0";
  std::string method = "cswx";
  std::string dump_matrix, dump_ops, dump_tokens;
};

int cmd_align(const CommonAlignArgs& args, const std::string& invocation) {
  swx::DerivationTree t1 = load_single_tree(args.file_a);
  swx::DerivationTree t2 = load_single_tree(args.file_b);
  swx::ScoringMatrix m = scoring_from_flag(args.scoring);
  swx::SerialisedSequence a = swx::serialise(t1);
  swx::SerialisedSequence b = swx::serialise(t2);

  if (!args.dump_tokens.empty()) {
    auto f = open_out(args.dump_tokens);
    f << "# " << invocation << "\n# sequence 1: " << args.file_a << "\n";
    swx::dump_tokens(f, a);
    f << "# sequence 2: " << args.file_b << "\n";
    swx::dump_tokens(f, b);
  }

  double distance = 0;
  swx::EditPath path;
  if (args.method == "rcswx") {
    swx::RecursiveAlignment rec = swx::align_recursive(a, b, m);
    distance = rec.final_distance();
    if (!std::isfinite(distance))
      throw swx::UnalignableError("inputs are unalignable under this scoring matrix");
    if (!args.dump_matrix.empty()) {
      auto f = open_out(args.dump_matrix);
      f << "# " << invocation << "\n";
      swx::write_matrix_csv(f, rec.collapsed());
    }
    path = swx::rcswx_trace_back(a, b, rec, m);
  } else {
    swx::AlignmentMatrix mat = swx::align(a, b, m);
    distance = mat.final_distance();
    if (!std::isfinite(distance))
      throw swx::UnalignableError("inputs are unalignable under this scoring matrix");
    if (!args.dump_matrix.empty()) {
      auto f = open_out(args.dump_matrix);
      f << "# " << invocation << "\n";
      swx::write_matrix_csv(f, mat);
    }
    path = swx::trace_back(a, b, mat, m);
  }

  if (!args.dump_ops.empty()) {
    json j = path_to_json(path);
    j["invocation"] = invocation;
    j["method"] = args.method;
    j["scoring"] = args.scoring;
    j["tree1"] = swx::render_tree(t1);
    j["tree2"] = swx::render_tree(t2);
    auto f = open_out(args.dump_ops);
    f << j.dump(2) << "\n";
  }

  std::cout << distance << "\n";
  return kExitOk;
}

int cmd_distance(const CommonAlignArgs& args, const std::string& invocation) {
  if (!args.dump_ops.empty()) {
    CommonAlignArgs forwarded = args;
    return cmd_align(forwarded, invocation);
  }
  swx::DerivationTree t1 = load_single_tree(args.file_a);
  swx::DerivationTree t2 = load_single_tree(args.file_b);
  swx::ScoringMatrix m = scoring_from_flag(args.scoring);
  double d = args.method == "rcswx" ? swx::rcswx_distance(t1, t2, m)
                                    : swx::cswx_distance(t1, t2, m);
  std::cout << d << "\n";
  return kExitOk;
}

int cmd_crossover(const std::string& file_a, const std::string& file_b,
                  const std::string& method, const std::string& scoring, double skewness,
                  std::uint64_t seed, const std::string& out_path,
                  const std::string& invocation) {
  swx::DerivationTree t1 = load_single_tree(file_a);
  swx::DerivationTree t2 = load_single_tree(file_b);
  swx::Rng rng(seed);
  swx::DerivationTree child;
  if (method == "stx") {
    auto r = swx::stx_crossover(t1, t2, rng);
    if (!r) throw swx::DomainError("no common non-terminals");
    child = *r;
  } else {
    swx::ScoringMatrix m = scoring_from_flag(scoring);
    child = method == "rcswx" ? swx::rcswx_crossover(t1, t2, m, skewness, rng)
                              : swx::cswx_crossover(t1, t2, m, skewness, rng);
  }
  if (out_path.empty()) {
    std::cout << swx::render_tree(child) << "\n";
  } else {
    auto f = open_out(out_path);
    f << "# " << invocation << "\n" << swx::render_tree(child) << "\n";
  }
  return kExitOk;
}

swx::SearchConfig parse_search_config(const std::string& path, std::uint64_t seed_override,
                                      bool have_seed_override) {
  std::ifstream f(path);
  if (!f) throw swx::DomainError("cannot open search config: " + path);
  swx::SearchConfig cfg;
  std::string fitness_spec = "motif:comp:relu";
  std::string line;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw swx::DomainError("search config: expected key = value, got: " + line);
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key == "population") cfg.population_size = std::stoi(val);
    else if (key == "evaluations") cfg.total_evaluations = std::stoi(val);
    else if (key == "tournament") cfg.tournament_size = std::stoi(val);
    else if (key == "crossover") cfg.crossover_method = swx::crossover_method_by_name(val);
    else if (key == "crossover_prob") cfg.crossover_prob = std::stod(val);
    else if (key == "mutation_prob") cfg.mutation_prob = std::stod(val);
    else if (key == "skewness") cfg.skewness = std::stod(val);
    else if (key == "scoring") cfg.scoring = scoring_from_flag(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "max_depth") cfg.grammar.max_depth = std::stoi(val);
    else if (key == "diversity_stride") cfg.diversity_stride = std::stoi(val);
    else if (key == "diversity_sample") cfg.diversity_sample = std::stoi(val);
    else if (key == "fitness") fitness_spec = val;
    else throw swx::DomainError("search config: unknown key '" + key + "'");
  }
  if (have_seed_override) cfg.seed = seed_override;

  if (fitness_spec.rfind("target:", 0) == 0) {
    swx::DerivationTree target = load_single_tree(fitness_spec.substr(7));
    cfg.fitness = swx::target_distance_fitness(std::move(target), cfg.scoring);
  } else if (fitness_spec.rfind("motif:", 0) == 0) {
    std::vector<std::string> labels;
    std::string rest = fitness_spec.substr(6);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      std::size_t bar = rest.find('|', pos);
      if (bar == std::string::npos) {
        labels.push_back(rest.substr(pos));
        break;
      }
      labels.push_back(rest.substr(pos, bar - pos));
      pos = bar + 1;
    }
    cfg.fitness = swx::motif_count_fitness(std::move(labels));
  } else {
    throw swx::DomainError("fitness spec must be target:<tree-file> or motif:<label|label|...>");
  }
  return cfg;
}

int cmd_search(const std::string& config_path, const std::string& out_csv,
               const std::string& trees_out, std::uint64_t seed, bool have_seed,
               const std::string& invocation) {
  swx::SearchConfig cfg = parse_search_config(config_path, seed, have_seed);
  swx::SearchHistory hist = swx::evolve(cfg);
  if (out_csv.empty()) {
    hist.write_csv(std::cout, invocation + " seed=" + std::to_string(cfg.seed));
  } else {
    auto f = open_out(out_csv);
    hist.write_csv(f, invocation + " seed=" + std::to_string(cfg.seed));
  }
  if (!trees_out.empty()) {
    auto f = open_out(trees_out);
    f << "# " << invocation << "\n# best fitness " << hist.best_fitness << "\n"
      << swx::render_tree(hist.best_tree) << "\n";
  }
  std::cerr << "best fitness " << hist.best_fitness << " after " << hist.evaluations
            << " evaluations\n";
  return kExitOk;
}

std::vector<swx::DerivationTree> load_population(const std::string& path) {
  auto trees = swx::read_trees_file(path);
  if (trees.empty()) throw swx::DomainError("no trees found in " + path);
  return trees;
}

int cmd_analyze_distances(const std::string& trees_path, const std::string& out_path,
                          const std::string& method, const std::string& scoring,
                          int threads, const std::string& invocation) {
  auto trees = load_population(trees_path);
  swx::DistanceMatrix dm = swx::pairwise_distance_matrix(
      trees, swx::distance_method_by_name(method), scoring_from_flag(scoring), threads);
  if (out_path.empty()) {
    dm.write_csv(std::cout, invocation);
  } else {
    auto f = open_out(out_path);
    dm.write_csv(f, invocation);
  }
  return kExitOk;
}

int cmd_analyze_diversity(const std::string& path, const std::string& method,
                          const std::string& scoring) {
  swx::DistanceMethod dmethod = swx::distance_method_by_name(method);
  swx::ScoringMatrix m = scoring_from_flag(scoring);
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw swx::DomainError("no files in directory: " + path);
    for (const auto& file : files) {
      auto trees = load_population(file.string());
      std::cout << file.filename().string() << ","
                << swx::population_diversity(trees, dmethod, m) << "\n";
    }
  } else {
    auto trees = load_population(path);
    std::cout << swx::population_diversity(trees, dmethod, m) << "\n";
  }
  return kExitOk;
}

swx::DistanceMatrix read_distance_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw swx::DomainError("cannot open distance matrix: " + path);
  swx::DistanceMatrix dm;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool have_labels = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    if (!have_labels) {
      while (std::getline(ss, cell, ',')) dm.labels.push_back(cell);
      have_labels = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != dm.labels.size())
      throw swx::DomainError("distance matrix row width mismatch");
    rows.push_back(std::move(row));
  }
  if (rows.size() != dm.labels.size())
    throw swx::DomainError("distance matrix is not square");
  dm.values.reserve(rows.size() * rows.size());
  for (const auto& r : rows) dm.values.insert(dm.values.end(), r.begin(), r.end());
  return dm;
}

std::vector<double> read_fitness_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw swx::DomainError("cannot open fitness file: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(f, line)) {
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    out.push_back(std::stod(line));
  }
  return out;
}

int cmd_analyze_variogram(const std::string& dist_path, const std::string& fitness_path,
                          int bins, const std::string& out_path,
                          const std::string& invocation) {
  swx::DistanceMatrix dm = read_distance_csv(dist_path);
  std::vector<double> fitness = read_fitness_csv(fitness_path);
  auto points = swx::empirical_semivariogram(dm, fitness, bins);
  swx::SemivariogramModel model = swx::fit_spherical(points);
  json j;
  j["invocation"] = invocation;
  j["nugget"] = model.nugget;
  j["sill"] = model.sill;
  j["range"] = model.range;
  j["residual"] = model.residual;
  j["degenerate"] = model.degenerate;
  j["bins"] = json::array();
  for (const auto& p : points)
    j["bins"].push_back({{"h", p.h}, {"gamma", p.gamma}, {"count", p.count}});
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    auto f = open_out(out_path);
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_analyze_metric_check(int n, const std::string& method, const std::string& scoring,
                             std::uint64_t seed, int max_depth) {
  swx::GrammarConfig gcfg;
  gcfg.max_depth = max_depth;
  auto sampler = [&gcfg](swx::Rng& r) { return swx::sample_tree(gcfg, r); };
  swx::Rng rng(seed);
  auto report = swx::metric_axiom_check(sampler, n, swx::distance_method_by_name(method),
                                        scoring_from_flag(scoring), rng, n / 2);
  std::cout << "pairs " << report.pairs_checked << "\n"
            << "triples " << report.triples_checked << "\n"
            << "violations " << report.violations << "\n"
            << "worst_symmetry_gap " << report.worst_symmetry_gap << "\n"
            << "worst_triangle_slack " << report.worst_triangle_slack << "\n"
            << "worst_identity_residual " << report.worst_identity_residual << "\n"
            << "worst_permutation_residual " << report.worst_permutation_residual << "\n"
            << (report.passed() ? "PASS" : "FAIL") << "\n";
  return report.passed() ? kExitOk : kExitDomain;
}

int cmd_bench(const std::string& sizes_flag, int samples, const std::string& methods_flag,
              std::uint64_t seed, bool branch_free, const std::string& out_path,
              const std::string& invocation) {
  swx::BenchOptions opt;
  std::stringstream ss(sizes_flag);
  std::string item;
  while (std::getline(ss, item, ',')) opt.sizes.push_back(std::stoi(item));
  if (opt.sizes.empty()) throw swx::DomainError("bench needs at least one size");
  opt.samples_per_size = samples;
  opt.methods.clear();
  std::stringstream ms(methods_flag);
  while (std::getline(ms, item, ',')) opt.methods.push_back(item);
  opt.seed = seed;
  opt.branch_free = branch_free;
  auto records = swx::scaling_benchmark(opt);
  if (out_path.empty()) {
    swx::write_bench_csv(std::cout, records, invocation);
  } else {
    auto f = open_out(out_path);
    swx::write_bench_csv(f, records, invocation);
  }
  return kExitOk;
}

int cmd_oracle_check(const std::string& suite, int pairs, std::uint64_t seed) {
  swx::Rng rng(seed);
  swx::GrammarConfig gcfg;
  swx::ScoringMatrix m = swx::ScoringMatrix::sm0();
  int pass = 0, fail = 0;
  double max_dev = 0;

  if (suite == "dp") {
    gcfg.max_depth = 3;
    for (int k = 0; k < pairs; ++k) {
      swx::DerivationTree a = swx::sample_tree(gcfg, rng);
      swx::DerivationTree b = swx::sample_tree(gcfg, rng);
      swx::SerialisedSequence sa = swx::serialise(a), sb = swx::serialise(b);
      if ((sa.size() - 1) + (sb.size() - 1) > 14) {
        --k;
        continue;
      }
      double dp = swx::align(sa, sb, m).final_distance();
      double ref = swx::exhaustive_edit_distance(sa, sb, m);
      double dev = std::abs(dp - ref);
      max_dev = std::max(max_dev, dev);
      (dev == 0 ? pass : fail)++;
    }
  } else if (suite == "perm") {
    gcfg.max_depth = 4;
    for (int k = 0; k < pairs; ++k) {
      swx::DerivationTree a = swx::sample_tree(gcfg, rng);
      swx::DerivationTree b = swx::sample_tree(gcfg, rng);
      if (swx::branch2_count(a) + swx::branch2_count(b) > 4) {
        --k;
        continue;
      }
      double fast = swx::rcswx_distance(a, b, m);
      double ref = swx::brute_force_permutation_distance(a, b, m);
      double dev = std::abs(fast - ref);
      max_dev = std::max(max_dev, dev);
      (dev == 0 ? pass : fail)++;
    }
  } else if (suite == "ged") {
    for (int k = 0; k < pairs; ++k) {
      swx::Rng pair_rng = rng.split(static_cast<std::uint64_t>(k));
      swx::DerivationTree a = swx::sample_tree_with_graph_nodes(8, gcfg, pair_rng);
      swx::DerivationTree b = swx::sample_tree_with_graph_nodes(8, gcfg, pair_rng);
      double fast = swx::rcswx_distance(a, b, m);
      double ref =
          swx::ged_sepx_path(swx::graph_from_tree(a), swx::graph_from_tree(b), m).total_cost;
      double dev = std::abs(fast - ref);
      max_dev = std::max(max_dev, dev);
      (dev == 0 ? pass : fail)++;
    }
  } else {
    throw swx::DomainError("unknown oracle suite: " + suite);
  }
  std::cout << "suite " << suite << " pass " << pass << " fail " << fail
            << " max_deviation " << max_dev << "\n";
  return fail == 0 ? kExitOk : kExitDomain;
}

int cmd_sensitivity(int pairs, std::uint64_t seed, const std::string& out_path,
                    const std::string& invocation) {
  swx::GrammarConfig gcfg;
  swx::Rng rng(seed);
  std::vector<std::pair<swx::DerivationTree, swx::DerivationTree>> sample_pairs;
  for (int k = 0; k < pairs; ++k) {
    int len = 4 + static_cast<int>(std::llround(100.0 * k / std::max(1, pairs - 1)));
    sample_pairs.push_back({swx::sample_tree_with_token_budget(len, gcfg, rng),
                            swx::sample_tree_with_token_budget(len, gcfg, rng)});
  }
  auto report = swx::scoring_sensitivity(
      sample_pairs,
      {swx::ScoringMatrix::sm1(), swx::ScoringMatrix::sm2(), swx::ScoringMatrix::sm3()});
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file = open_out(out_path);
    out = &file;
  }
  *out << "# " << invocation << "\npreset,pearson_r,r_squared\n";
  for (const auto& e : report.entries)
    *out << swx::to_string(e.preset) << ',' << e.pearson_r << ',' << e.r_squared << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& file_a, const std::string& file_b,
               const std::string& ops_path) {
  swx::DerivationTree t1 = load_single_tree(file_a);
  swx::DerivationTree t2 = load_single_tree(file_b);
  std::ifstream f(ops_path);
  if (!f) throw swx::DomainError("cannot open ops file: " + ops_path);
  json j;
  f >> j;

  swx::EditPath path;
  path.seq1 = swx::serialise(t1);
  path.seq2 = swx::serialise(t2);
  path.total_cost = j.at("total_cost").get<double>();
  for (const auto& js : j.at("steps"))
    path.steps.push_back({dir_from_string(js.at("dir").get<std::string>()),
                          js.at("i1").get<int>(), js.at("i2").get<int>()});
  path.step_op = j.at("step_op").get<std::vector<int>>();
  if (path.step_op.size() != path.steps.size())
    throw swx::DomainError("ops file: step_op length does not match the steps");
  for (const auto& st : path.steps) {
    if (st.i1 >= static_cast<int>(path.seq1.size()) ||
        st.i2 >= static_cast<int>(path.seq2.size()) || st.i1 < -1 || st.i2 < -1)
      throw swx::DomainError("ops file does not match the given trees");
  }
  std::set<int> all_ops;
  for (const auto& jo : j.at("ops")) all_ops.insert(jo.at("id").get<int>());

  swx::SerialisedSequence replayed = swx::replay_selection(path, all_ops);
  swx::DerivationTree rebuilt = swx::deserialise(replayed);
  if (!swx::functionally_equal(rebuilt, t2))
    throw swx::DomainError("replaying all operations does not reconstruct the second tree");
  std::cout << "ok: full replay reconstructs " << file_b << " (cost " << path.total_cost
            << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string invocation = join_args(argc, argv);
  CLI::App app{"grammar-based architecture alignment, crossover and analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // align
  CommonAlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align", "align two trees and trace the edit path");
  align_cmd->add_option("tree1", align_args.file_a)->required();
  align_cmd->add_option("tree2", align_args.file_b)->required();
  align_cmd->add_option("--scoring", align_args.scoring, "sm0|sm1|sm2|sm3 or a config file");
  align_cmd->add_option("--method", align_args.method)
      ->check(CLI::IsMember({"cswx", "rcswx"}));
  align_cmd->add_option("--dump-matrix", align_args.dump_matrix, "write the DP matrix CSV");
  align_cmd->add_option("--dump-ops", align_args.dump_ops, "write the edit operations JSON");
  align_cmd->add_option("--dump-tokens", align_args.dump_tokens,
                        "write the serialised token dump");

  // distance
  CommonAlignArgs dist_args;
  dist_args.method = "rcswx";
  auto* dist_cmd = app.add_subcommand("distance", "print the edit distance");
  dist_cmd->add_option("tree1", dist_args.file_a)->required();
  dist_cmd->add_option("tree2", dist_args.file_b)->required();
  dist_cmd->add_option("--scoring", dist_args.scoring);
  dist_cmd->add_option("--method", dist_args.method)
      ->check(CLI::IsMember({"cswx", "rcswx"}));
  dist_cmd->add_option("--dump-ops", dist_args.dump_ops, "write the edit operations JSON");

  // crossover
  std::string x_a, x_b, x_method = "rcswx", x_scoring = "sm0", x_out;
  double x_skewness = 0.0;
  std::uint64_t x_seed = 0;
  auto* x_cmd = app.add_subcommand("crossover", "generate a hybrid offspring");
  x_cmd->add_option("tree1", x_a)->required();
  x_cmd->add_option("tree2", x_b)->required();
  x_cmd->add_option("--method", x_method)->check(CLI::IsMember({"cswx", "rcswx", "stx"}));
  x_cmd->add_option("--scoring", x_scoring);
  x_cmd->add_option("--skewness", x_skewness);
  x_cmd->add_option("--seed", x_seed);
  x_cmd->add_option("-o,--out", x_out, "offspring tree file (stdout otherwise)");

  // search
  std::string s_config, s_out, s_trees_out;
  std::uint64_t s_seed = 0;
  auto* s_cmd = app.add_subcommand("search", "steady-state evolutionary search");
  s_cmd->add_option("--config", s_config)->required();
  auto* s_seed_opt = s_cmd->add_option("--seed", s_seed, "overrides the config seed");
  s_cmd->add_option("--out", s_out, "history CSV (stdout otherwise)");
  s_cmd->add_option("--trees-out", s_trees_out, "best tree output file");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "population and landscape analytics");
  an_cmd->require_subcommand(1);

  std::string ad_trees, ad_out, ad_method = "rcswx", ad_scoring = "sm0";
  int ad_threads = 1;
  auto* ad_cmd = an_cmd->add_subcommand("distances", "pairwise distance matrix");
  ad_cmd->add_option("trees", ad_trees)->required();
  ad_cmd->add_option("-o,--out", ad_out);
  ad_cmd->add_option("--method", ad_method)->check(CLI::IsMember({"cswx", "rcswx"}));
  ad_cmd->add_option("--scoring", ad_scoring);
  ad_cmd->add_option("--threads", ad_threads);

  std::string av_path, av_method = "rcswx", av_scoring = "sm0";
  auto* av_cmd = an_cmd->add_subcommand("diversity", "mean pairwise distance");
  av_cmd->add_option("path", av_path, "tree file or directory of tree files")->required();
  av_cmd->add_option("--method", av_method)->check(CLI::IsMember({"cswx", "rcswx"}));
  av_cmd->add_option("--scoring", av_scoring);

  std::string ag_dist, ag_fit, ag_out;
  int ag_bins = 30;
  auto* ag_cmd = an_cmd->add_subcommand("variogram", "empirical semivariogram + spherical fit");
  ag_cmd->add_option("distances", ag_dist)->required();
  ag_cmd->add_option("fitness", ag_fit)->required();
  ag_cmd->add_option("--bins", ag_bins);
  ag_cmd->add_option("-o,--out", ag_out);

  int mc_n = 500, mc_depth = 4;
  std::string mc_method = "rcswx", mc_scoring = "sm0";
  std::uint64_t mc_seed = 0;
  auto* mc_cmd = an_cmd->add_subcommand("metric-check", "verify the metric axioms");
  mc_cmd->add_option("--n", mc_n);
  mc_cmd->add_option("--method", mc_method)->check(CLI::IsMember({"cswx", "rcswx"}));
  mc_cmd->add_option("--scoring", mc_scoring);
  mc_cmd->add_option("--seed", mc_seed);
  mc_cmd->add_option("--max-depth", mc_depth);

  // bench
  std::string b_sizes = "8,16,32,64,128", b_methods = "cswx,rcswx", b_out;
  int b_samples = 5;
  std::uint64_t b_seed = 0;
  bool b_branch_free = false;
  auto* b_cmd = app.add_subcommand("bench", "runtime scaling measurements");
  b_cmd->add_option("--sizes", b_sizes, "comma-separated token counts");
  b_cmd->add_option("--samples", b_samples);
  b_cmd->add_option("--methods", b_methods, "subset of cswx,rcswx,sepx");
  b_cmd->add_option("--seed", b_seed);
  b_cmd->add_flag("--branch-free", b_branch_free);
  b_cmd->add_option("-o,--out", b_out);

  // oracle
  auto* o_cmd = app.add_subcommand("oracle", "slow exact reference checks");
  o_cmd->require_subcommand(1);
  std::string oc_suite = "dp";
  int oc_pairs = 50;
  std::uint64_t oc_seed = 0;
  auto* oc_cmd = o_cmd->add_subcommand("check", "compare fast paths against oracles");
  oc_cmd->add_option("--suite", oc_suite)->check(CLI::IsMember({"dp", "perm", "ged"}));
  oc_cmd->add_option("--pairs", oc_pairs);
  oc_cmd->add_option("--seed", oc_seed);

  // sensitivity
  int sn_pairs = 50;
  std::uint64_t sn_seed = 0;
  std::string sn_out;
  auto* sn_cmd = app.add_subcommand("sensitivity", "scoring-matrix sensitivity study");
  sn_cmd->add_option("--pairs", sn_pairs);
  sn_cmd->add_option("--seed", sn_seed);
  sn_cmd->add_option("-o,--out", sn_out);

  // verify
  std::string v_a, v_b, v_ops;
  auto* v_cmd = app.add_subcommand("verify", "replay a dumped edit path");
  v_cmd->add_option("tree1", v_a)->required();
  v_cmd->add_option("tree2", v_b)->required();
  v_cmd->add_option("ops", v_ops)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*align_cmd) return cmd_align(align_args, invocation);
    if (*dist_cmd) return cmd_distance(dist_args, invocation);
    if (*x_cmd)
      return cmd_crossover(x_a, x_b, x_method, x_scoring, x_skewness, x_seed, x_out,
                           invocation);
    if (*s_cmd) return cmd_search(s_config, s_out, s_trees_out, s_seed,
                                  s_seed_opt->count() > 0, invocation);
    if (*ad_cmd) return cmd_analyze_distances(ad_trees, ad_out, ad_method, ad_scoring,
                                              ad_threads, invocation);
    if (*av_cmd) return cmd_analyze_diversity(av_path, av_method, av_scoring);
    if (*ag_cmd) return cmd_analyze_variogram(ag_dist, ag_fit, ag_bins, ag_out, invocation);
    if (*mc_cmd) return cmd_analyze_metric_check(mc_n, mc_method, mc_scoring, mc_seed, mc_depth);
    if (*b_cmd)
      return cmd_bench(b_sizes, b_samples, b_methods, b_seed, b_branch_free, b_out, invocation);
    if (*oc_cmd) return cmd_oracle_check(oc_suite, oc_pairs, oc_seed);
    if (*sn_cmd) return cmd_sensitivity(sn_pairs, sn_seed, sn_out, invocation);
    if (*v_cmd) return cmd_verify(v_a, v_b, v_ops);
    std::cerr << "no subcommand selected\n";
    return kExitUsage;
  } catch (const swx::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
