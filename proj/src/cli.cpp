#include "uos/cli.hpp"

#include "uos/core.hpp"
#include "uos/dictionary_learning.hpp"
#include "uos/evalkit.hpp"
#include "uos/io.hpp"
#include "uos/projection.hpp"
#include "uos/rank_analysis.hpp"
#include "uos/rpca.hpp"
#include "uos/sparse_coding.hpp"
#include "uos/synth.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <sstream>

namespace uos {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Files produced by one command, written only once everything succeeded.
class Outputs {
 public:
  void add(fs::path path, std::string content) { staged_.emplace_back(std::move(path), std::move(content)); }

  void commit() {
    std::vector<fs::path> done;
    try {
      for (const auto& [path, content] : staged_) {
        write_file_atomic(path, content);
        done.push_back(path);
      }
    } catch (...) {
      std::error_code ignore;
      for (const auto& p : done) fs::remove(p, ignore);
      throw;
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> staged_;
};

unsigned resolve_thread_flag(const CLI::Option* opt, int value) {
  if (opt->count() > 0) return static_cast<unsigned>(value);
  if (const char* env = std::getenv("UOS_THREADS"); env && *env) {
    int v = 0;
    const std::string s(env);
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || v < 0)
      throw Error(ErrorCode::InvalidArgument, "UOS_THREADS must be a non-negative integer, got '" + s + "'");
    return static_cast<unsigned>(v);
  }
  return 0;
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, std::string(flag) + " is required");
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v, 2) : "NA"; }

struct Common {
  std::string config;
  int threads = 0;
  CLI::Option* threads_opt = nullptr;
  std::string format = "binary";

  void attach(CLI::App* sub, bool has_output_format) {
    sub->add_option("--config", config, "key=value file; flags given on the command line win");
    threads_opt = sub->add_option("--threads", threads, "worker threads (0 = available parallelism; UOS_THREADS if unset)")
                      ->check(CLI::NonNegativeNumber);
    if (has_output_format)
      sub->add_option("--format", format, "output format for matrices")->check(CLI::IsMember({"binary", "text"}));
  }
  unsigned thread_count() const { return resolve_thread_flag(threads_opt, threads); }
  FileFormat file_format() const { return parse_file_format(format); }
};

struct CodingFlags {
  double lambda1 = 0.2;
  double lambda2 = 0.2;
  double tol = 1e-6;
  int max_iter = 1000;

  void attach(CLI::App* sub) {
    sub->add_option("--lambda1", lambda1, "l1 weight")->check(CLI::NonNegativeNumber);
    sub->add_option("--lambda2", lambda2, "group l2 weight (hilasso)")->check(CLI::NonNegativeNumber);
    sub->add_option("--tol", tol, "solver tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  }
  CodingConfig config() const {
    CodingConfig c;
    c.lambda1 = lambda1;
    c.lambda2 = lambda2;
    c.tolerance = tol;
    c.max_iterations = max_iter;
    c.validate();
    return c;
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::set<std::string> path_keys;
  std::function<void()> run;
};

// Appends "--key value" for config entries the user did not pass explicitly.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const Command& cmd) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  RunConfig rc = RunConfig::load(config_path);
  const fs::path base = fs::path(config_path).has_parent_path() ? fs::path(config_path).parent_path() : fs::path(".");
  rc.resolve_paths(base, cmd.path_keys);

  std::vector<std::string> merged = args;
  for (const auto& [key, value] : rc.values) {
    const std::string flag = "--" + key;
    if (key == "config" || cmd.app->get_option_no_throw(flag) == nullptr)
      throw Error(ErrorCode::InvalidArgument, config_path + ": line " + std::to_string(rc.lines.at(key)) +
                                                  ": unknown key '" + key + "' for " + cmd.app->get_name());
    bool given = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    merged.push_back(flag);
    merged.push_back(value);
  }
  return merged;
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::Io || e.code() == ErrorCode::Format ? kExitIo : kExitValidation;
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig rc;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Format, source + ": line " + std::to_string(number) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty())
      throw Error(ErrorCode::Format, source + ": line " + std::to_string(number) + ": empty key");
    if (rc.values.count(key))
      throw Error(ErrorCode::Format, source + ": line " + std::to_string(number) + ": duplicate key '" + key + "'");
    rc.values[key] = trim(line.substr(eq + 1));
    rc.lines[key] = number;
  }
  return rc;
}

RunConfig RunConfig::load(const fs::path& path) { return parse(read_file(path), path.string()); }

void RunConfig::resolve_paths(const fs::path& base, const std::set<std::string>& path_keys) {
  for (auto& [key, value] : values) {
    if (!path_keys.count(key) || value.empty()) continue;
    const fs::path p(value);
    if (p.is_relative()) value = (base / p).lexically_normal().string();
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Union-of-subspaces posterior enhancement toolkit", "uos"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& desc) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, desc);
    return c;
  };

  // synth
  SynthConfig synth;
  Eigen::Index test_frames = 0;
  std::string synth_out;
  Common synth_common;
  {
    Command& c = add("synth", "Generate synthetic union-of-subspaces posteriors");
    c.app->add_option("--dim", synth.m, "ambient dimension m");
    c.app->add_option("--classes", synth.classes, "number of classes L");
    c.app->add_option("--rank", synth.rank, "subspace dimension r");
    c.app->add_option("--frames", synth.frames_per_class, "training frames per class");
    c.app->add_option("--test-frames", test_frames, "held-out frames per class (0 = none)");
    c.app->add_option("--noise", synth.noise_sigma, "Gaussian noise std-dev before the simplex map");
    c.app->add_option("--angle", synth.subspace_angle_min, "minimum principal angle in degrees");
    c.app->add_option("--seed", synth.seed, "random seed");
    c.app->add_option("--out", synth_out,
                      "output directory (train_clean.uosm, train_noisy.uosm, train.ali, test_*)");
    synth_common.attach(c.app, true);
    c.path_keys = {"out"};
    c.run = [&] {
      require_path(synth_out, "--out");
      synth.validate();
      const FileFormat format = synth_common.file_format();
      Outputs outputs;
      const fs::path dir(synth_out);
      auto stage = [&](const SynthDataset& d, const std::string& prefix) {
        outputs.add(dir / (prefix + "_clean.uosm"), encode_matrix(d.clean, format));
        outputs.add(dir / (prefix + "_noisy.uosm"), encode_matrix(d.noisy, format));
        outputs.add(dir / (prefix + ".ali"), format_alignment(d.align));
      };
      if (test_frames > 0) {
        const SynthSplit split = generate_split(synth, test_frames);
        stage(split.train, "train");
        stage(split.test, "test");
      } else {
        stage(generate_dataset(generate_subspaces(synth), synth), "train");
      }
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
      outputs.commit();
      out << "wrote " << synth.classes << " classes x " << synth.frames_per_class << " frames to " << dir.string()
          << "\n";
    };
  }

  // train-dict
  LearnerConfig learner;
  learner.coding.lambda1 = 0.2;
  std::string td_data, td_align, td_out;
  Common td_common;
  {
    Command& c = add("train-dict", "Learn one dictionary group per class");
    c.app->add_option("--data", td_data, "posterior matrix (T x m)");
    c.app->add_option("--align", td_align, "class alignment, one label per frame");
    c.app->add_option("--out", td_out, "dictionary output file");
    c.app->add_option("--atoms", learner.atoms, "atoms per class")->check(CLI::PositiveNumber);
    c.app->add_option("--lambda", learner.coding.lambda1, "l1 weight for the coding step")->check(CLI::PositiveNumber);
    c.app->add_option("--epochs", learner.epochs, "passes over each class")->check(CLI::NonNegativeNumber);
    c.app->add_option("--batch", learner.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
    c.app->add_option("--seed", learner.seed, "random seed");
    td_common.attach(c.app, true);
    c.path_keys = {"data", "align", "out"};
    c.run = [&] {
      require_path(td_data, "--data");
      require_path(td_align, "--align");
      require_path(td_out, "--out");
      const RealMatrix z = read_matrix(td_data);
      const ClassAlignment align = read_alignment(td_align);
      learner.threads = td_common.thread_count();
      const DictionaryResult r = learn_all(z, align, learner);
      print_warnings(err, r.warnings);
      Outputs outputs;
      outputs.add(td_out, encode_dictionary(r.dictionary, td_common.file_format()));
      outputs.commit();
      out << "dictionary: " << r.dictionary.dim() << " x " << r.dictionary.num_atoms() << " in "
          << r.dictionary.layout().num_groups() << " groups\n";
      for (std::size_t l = 0; l < r.epoch_objectives.size(); ++l) {
        const auto& obj = r.epoch_objectives[l];
        if (obj.empty()) continue;
        out << "class " << l << " objective " << fmt(obj.front(), 6) << " -> " << fmt(obj.back(), 6) << "\n";
      }
    };
  }

  // encode
  CodingFlags enc_coding;
  std::string enc_data, enc_dict, enc_out, enc_mode = "lasso";
  Common enc_common;
  {
    Command& c = add("encode", "Sparse-code every frame over a dictionary");
    c.app->add_option("--data", enc_data, "posterior matrix (T x m)");
    c.app->add_option("--dict", enc_dict, "dictionary file");
    c.app->add_option("--out", enc_out, "codes output (T x n matrix)");
    c.app->add_option("--mode", enc_mode, "solver")->check(CLI::IsMember({"lasso", "hilasso"}));
    enc_coding.attach(c.app);
    enc_common.attach(c.app, true);
    c.path_keys = {"data", "dict", "out"};
    c.run = [&] {
      require_path(enc_data, "--data");
      require_path(enc_dict, "--dict");
      require_path(enc_out, "--out");
      const RealMatrix z = read_matrix(enc_data);
      const GroupedDictionary dict = read_dictionary(enc_dict);
      const CodingMode mode = enc_mode == "lasso" ? CodingMode::Lasso : CodingMode::Hilasso;
      const BatchCodes codes = batch_encode(z, dict, enc_coding.config(), mode, enc_common.thread_count());
      Outputs outputs;
      outputs.add(enc_out, encode_matrix(codes.codes, enc_common.file_format()));
      outputs.commit();
      std::size_t unconverged = 0;
      for (const auto& r : codes.reports) unconverged += r.converged ? 0 : 1;
      const double nnz = static_cast<double>((codes.codes.array() != 0.0).count());
      out << "frames " << z.rows() << " unconverged " << unconverged << " mean_nonzeros "
          << fmt(z.rows() ? nnz / static_cast<double>(z.rows()) : 0.0, 2) << "\n";
    };
  }

  // project
  CodingFlags proj_coding;
  std::string proj_data, proj_dict, proj_out, proj_stats;
  Common proj_common;
  {
    Command& c = add("project", "Project posteriors onto the learned union of subspaces");
    c.app->add_option("--data", proj_data, "posterior matrix (T x m)");
    c.app->add_option("--dict", proj_dict, "dictionary file");
    c.app->add_option("--out", proj_out, "projected posteriors output");
    c.app->add_option("--stats", proj_stats, "optional key=value stats file");
    proj_coding.attach(c.app);
    proj_common.attach(c.app, true);
    c.path_keys = {"data", "dict", "out", "stats"};
    c.run = [&] {
      require_path(proj_data, "--data");
      require_path(proj_dict, "--dict");
      require_path(proj_out, "--out");
      const RealMatrix z = read_matrix(proj_data);
      const GroupedDictionary dict = read_dictionary(proj_dict);
      const ProjectionResult r = project_posteriors(z, dict, proj_coding.config(), proj_common.thread_count());
      const std::string stats = "frames=" + std::to_string(r.stats.frames) + "\ndegenerate=" +
                                std::to_string(r.stats.degenerate) + "\nunconverged=" +
                                std::to_string(r.stats.unconverged) + "\n";
      Outputs outputs;
      outputs.add(proj_out, encode_matrix(r.posteriors, proj_common.file_format()));
      if (!proj_stats.empty()) outputs.add(proj_stats, stats);
      outputs.commit();
      if (r.stats.degenerate > 0)
        err << "warning: " << r.stats.degenerate << " frame(s) had an all-zero projection and were passed through\n";
      out << stats;
    };
  }

  // rpca
  RpcaConfig rpca_cfg;
  double rpca_lambda = 0.0;
  std::string rpca_data, rpca_align, rpca_out, rpca_domain = "log";
  Common rpca_common;
  {
    Command& c = add("rpca", "Low-rank enhancement of each class's posteriors");
    c.app->add_option("--data", rpca_data, "posterior matrix (T x m)");
    c.app->add_option("--align", rpca_align, "class alignment");
    c.app->add_option("--out", rpca_out, "enhanced posteriors output");
    c.app->add_option("--lambda-rpca", rpca_lambda, "sparse weight (0 = 1/sqrt(max(rows, cols)) per class)")
        ->check(CLI::NonNegativeNumber);
    c.app->add_option("--domain", rpca_domain, "decompose log posteriors or raw values")
        ->check(CLI::IsMember({"log", "raw"}));
    c.app->add_option("--tol", rpca_cfg.residual_tol, "relative residual tolerance")->check(CLI::PositiveNumber);
    c.app->add_option("--max-iter", rpca_cfg.max_iterations, "iteration cap")->check(CLI::PositiveNumber);
    rpca_common.attach(c.app, true);
    c.path_keys = {"data", "align", "out"};
    c.run = [&] {
      require_path(rpca_data, "--data");
      require_path(rpca_align, "--align");
      require_path(rpca_out, "--out");
      const RealMatrix z = read_matrix(rpca_data);
      const ClassAlignment align = read_alignment(rpca_align);
      if (rpca_lambda > 0.0) rpca_cfg.lambda = rpca_lambda;
      const EnhanceResult r = rpca_enhance_by_class(
          z, align, rpca_cfg, rpca_domain == "log" ? RpcaDomain::Log : RpcaDomain::Raw, rpca_common.thread_count());
      print_warnings(err, r.warnings);
      Outputs outputs;
      outputs.add(rpca_out, encode_matrix(r.posteriors, rpca_common.file_format()));
      outputs.commit();
      out << "classes " << align.num_classes() << " skipped " << r.skipped_classes.size() << " unconverged "
          << r.unconverged_classes.size() << "\n";
    };
  }

  // rank
  RankOptions rank_opts;
  std::string rank_mode = "sq", rank_data, rank_align, rank_out;
  Common rank_common;
  {
    Command& c = add("rank", "Effective rank of log posteriors, split by correct and incorrect frames");
    c.app->add_option("--data", rank_data, "posterior matrix (T x m)");
    c.app->add_option("--align", rank_align, "class alignment");
    c.app->add_option("--out", rank_out, "optional tab-separated per-class table");
    c.app->add_option("--sample", rank_opts.sample_per_class, "frames sampled per class and bucket")
        ->check(CLI::PositiveNumber);
    c.app->add_option("--variability", rank_opts.variability, "retained energy fraction")
        ->check(CLI::Range(0.0, 1.0));
    c.app->add_option("--mode", rank_mode, "energy of sigma^2 (sq) or sigma (linear)")
        ->check(CLI::IsMember({"sq", "linear"}));
    c.app->add_option("--seed", rank_opts.seed, "sampling seed");
    rank_common.attach(c.app, false);
    c.path_keys = {"data", "align", "out"};
    c.run = [&] {
      require_path(rank_data, "--data");
      require_path(rank_align, "--align");
      const RealMatrix z = read_matrix(rank_data);
      const ClassAlignment align = read_alignment(rank_align);
      rank_opts.mode = rank_mode == "sq" ? VariabilityMode::Squared : VariabilityMode::Linear;
      const RankReport r = rank_table(z, align, rank_opts);
      for (const auto& s : r.skipped) err << "note: " << s << "\n";

      std::string tsv = "class\tframes_correct\tframes_incorrect\trank_correct\trank_incorrect\trank_all\n";
      for (const auto& cr : r.classes)
        tsv += std::to_string(cr.label) + "\t" + std::to_string(cr.correct_frames) + "\t" +
               std::to_string(cr.incorrect_frames) + "\t" + fmt_opt(cr.correct) + "\t" + fmt_opt(cr.incorrect) +
               "\t" + fmt_opt(cr.all) + "\n";
      tsv += "mean\t\t\t" + fmt_opt(r.mean_correct) + "\t" + fmt_opt(r.mean_incorrect) + "\t" +
             fmt_opt(r.mean_all) + "\n";
      if (!rank_out.empty()) {
        Outputs outputs;
        outputs.add(rank_out, tsv);
        outputs.commit();
      }
      out << std::left << std::setw(16) << "" << "Rank\n"
          << std::setw(16) << "Rank-Correct" << fmt_opt(r.mean_correct) << "\n"
          << std::setw(16) << "Rank-Incorrect" << fmt_opt(r.mean_incorrect) << "\n";
    };
  }

  // eval
  std::string ev_before, ev_after, ev_align, ev_trans, ev_priors, ev_out;
  double ev_self_loop = 0.9;
  Common ev_common;
  {
    Command& c = add("eval", "Frame error and Viterbi label error before and after enhancement");
    c.app->add_option("--before", ev_before, "baseline posteriors");
    c.app->add_option("--after", ev_after, "enhanced posteriors");
    c.app->add_option("--align", ev_align, "reference alignment");
    c.app->add_option("--transitions", ev_trans, "transition model file (default: self-loop model)");
    c.app->add_option("--self-loop", ev_self_loop, "self-loop probability when no transition file is given")
        ->check(CLI::Range(0.0, 1.0));
    c.app->add_option("--priors", ev_priors, "optional 1 x m prior matrix for scaled likelihoods");
    c.app->add_option("--out", ev_out, "optional key=value report file");
    ev_common.attach(c.app, false);
    c.path_keys = {"before", "after", "align", "transitions", "priors", "out"};
    c.run = [&] {
      require_path(ev_before, "--before");
      require_path(ev_after, "--after");
      require_path(ev_align, "--align");
      const RealMatrix before = read_matrix(ev_before);
      const RealMatrix after = read_matrix(ev_after);
      const ClassAlignment align = read_alignment(ev_align);
      const TransitionModel tm = ev_trans.empty()
                                     ? TransitionModel::self_loop(static_cast<int>(before.cols()), ev_self_loop)
                                     : read_transitions(ev_trans);
      std::optional<RealVector> priors;
      if (!ev_priors.empty()) {
        const RealMatrix p = read_matrix(ev_priors);
        if (p.rows() != 1) throw Error(ErrorCode::DimensionMismatch, "priors must be a 1 x m matrix");
        priors = RealVector(p.row(0).transpose());
      }
      const ComparisonReport r = compare_systems(before, after, align, tm, priors);
      auto block = [](const std::string& name, const SystemScore& s) {
        return name + "_frame_error=" + fmt(s.frame_error, 6) + "\n" + name + "_label_error=" +
               fmt(s.label_errors.rate, 6) + "\n" + name + "_insertions=" + std::to_string(s.label_errors.insertions) +
               "\n" + name + "_deletions=" + std::to_string(s.label_errors.deletions) + "\n" + name +
               "_substitutions=" + std::to_string(s.label_errors.substitutions) + "\n";
      };
      const std::string report = "frames=" + std::to_string(before.rows()) + "\nreference_labels=" +
                                 std::to_string(r.before.label_errors.reference_length) + "\n" +
                                 block("before", r.before) + block("after", r.after) +
                                 "frame_error_relative_change=" + fmt(r.frame_error_relative_change, 6) +
                                 "\nlabel_error_relative_change=" + fmt(r.label_error_relative_change, 6) + "\n";
      if (!ev_out.empty()) {
        Outputs outputs;
        outputs.add(ev_out, report);
        outputs.commit();
      }
      out << report;
    };
  }

  try {
    std::vector<std::string> effective = args;
    if (!args.empty()) {
      if (auto it = commands.find(args.front()); it != commands.end()) effective = merge_config(args, it->second);
    }
    std::vector<const char*> argv{"uos"};
    for (const auto& a : effective) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }
    for (auto& [name, cmd] : commands)
      if (cmd.app->parsed()) cmd.run();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace uos
