#include "obstinate/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "obstinate/harness.hpp"

namespace obstinate {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  // paths
  std::string corpus;
  std::string checkpoint;
  std::string vocab;
  std::string synonyms;
  std::string antonyms;
  std::string output_dir;
  std::string pairs;
  std::string input;
  // attack
  double eta = 0.1;
  int max_steps = 1000;
  int restarts = 10;
  int k_words = 1;
  std::uint64_t seed = 0;
  int ig_steps = 50;
  std::string target_slot = "first";
  // oracle
  std::string oracle_mode = "builtin";
  std::string oracle_endpoint;
  double oracle_threshold = 0.90;
  double oracle_timeout = 5.0;
  bool no_oracle_fallback = false;
  int oracle_in_flight = 4;
  // limits
  std::size_t limit = 200;
  int workers = 1;
  bool verbose = false;
  bool baseline = false;
  // training
  int min_count = 1;
  int dim = 32;
  int hidden = 64;
  int epochs = 30;
  double learning_rate = 0.1;
  int batch_size = 16;
  // single-sentence attack
  std::string sentence;
  std::optional<std::string> second_sentence;
  // sweep / report
  int k_min = 1;
  int k_max = 5;
  int top_n = 10;
  std::string format = "json";
  std::string output;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::VocabFingerprintMismatch:
    case Errc::FormatVersionMismatch:
      return 3;
    case Errc::IoFailure:
    case Errc::CorruptFile:
      return 4;
    case Errc::RemoteUnreachable:
      return 5;
    default:
      return 2;
  }
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Slot parse_slot(const std::string& s) { return s == "second" ? Slot::Second : Slot::First; }

std::string vocab_path(const RunConfig& c) {
  return c.vocab.empty() ? c.checkpoint + ".vocab" : c.vocab;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir + ": " + ec.message());
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir.empty() ? "." : dir) / name).string();
}

EvalConfig eval_config(const RunConfig& c) {
  EvalConfig e;
  e.attack.eta = c.eta;
  e.attack.max_steps = c.max_steps;
  e.attack.restarts = c.restarts;
  e.attack.seed = c.seed;
  e.attack.trace = c.verbose;
  e.attack.validate();
  e.k_words = c.k_words;
  e.ig_steps = c.ig_steps;
  e.limit = c.limit;
  e.target_slot = parse_slot(c.target_slot);
  e.workers = c.workers;
  e.provenance = fs::path(c.corpus.empty() ? "sentence" : c.corpus).filename().string();
  return e;
}

OracleConfig oracle_config(const RunConfig& c) {
  OracleConfig o;
  o.mode = c.oracle_mode == "remote" ? OracleMode::Remote : OracleMode::Builtin;
  o.endpoint = c.oracle_endpoint;
  if (const char* env = std::getenv("OBSTINATE_ORACLE_URL"); env != nullptr && *env != '\0')
    o.endpoint = env;
  o.threshold = c.oracle_threshold;
  o.timeout = std::chrono::milliseconds(static_cast<long>(c.oracle_timeout * 1000.0));
  o.allow_fallback = !c.no_oracle_fallback;
  o.max_in_flight = c.oracle_in_flight;
  return o;
}

Lexicon synonyms_or_empty(const RunConfig& c) {
  if (c.synonyms.empty()) return Lexicon{{}, "none"};
  return load_synonym_lexicon(c.synonyms);
}

struct Loaded {
  Vocabulary vocab;
  Checkpoint ckpt;
};

Loaded load_model(const RunConfig& c) {
  auto vocab = Vocabulary::load(vocab_path(c));
  auto ckpt = load_checkpoint(c.checkpoint, vocab);
  return {std::move(vocab), std::move(ckpt)};
}

void log_sample(std::ostream& err, const SampleResult& s, bool verbose) {
  err << "sample " << s.sample_id << ": ";
  if (s.skipped) err << "skipped";
  else if (!s.error.empty()) err << "error " << s.error;
  else if (s.accepted_candidate) err << "success -> " << *s.accepted_candidate;
  else err << "no example found";
  err << '\n';
  if (!verbose) return;
  for (const auto& r : s.restarts) {
    err << "  restart " << r.restart << " " << r.filter_reason << " steps=" << r.steps << " loss:";
    for (double l : r.loss_trace) err << ' ' << l;
    err << '\n';
  }
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto corpus = read_corpus(c.corpus);
  auto vocab = build_vocabulary(corpus_sentences(corpus), c.min_count);
  TrainOptions opt;
  opt.dim = c.dim;
  opt.hidden = c.hidden;
  opt.epochs = c.epochs;
  opt.learning_rate = c.learning_rate;
  opt.batch_size = c.batch_size;
  opt.seed = c.seed;
  opt.slot = parse_slot(c.target_slot);
  const auto result = train(corpus, vocab, opt);
  if (auto parent = fs::path(c.checkpoint).parent_path(); !parent.empty()) ensure_dir(parent.string());
  save_checkpoint(result.checkpoint, c.checkpoint);
  vocab.save(vocab_path(c));
  out << "vocab_size=" << vocab.size() << '\n';
  out << "train_acc=" << fixed4(result.train_accuracy) << '\n';
  out << "checkpoint_hash=" << hex64(checkpoint_hash(result.checkpoint)) << '\n';
  return 0;
}

int attack_sentence(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto [vocab, ckpt] = load_model(c);
  const auto syn = synonyms_or_empty(c);
  const SimilarityOracle oracle(ckpt, vocab, oracle_config(c));
  const auto cfg = eval_config(c);
  const Example ex{0, c.sentence, c.second_sentence};
  const auto s = evaluate_sample(ckpt, vocab, ex, 0, cfg, syn, oracle);

  out << "original: " << s.original << '\n';
  out << "prediction: " << ckpt.label_names.at(static_cast<std::size_t>(s.original_prediction)) << '\n';
  if (!s.error.empty()) {
    err << s.error << '\n';
    return 2;
  }
  if (s.skipped) {
    err << "sentence has fewer than " << c.k_words << " attackable words\n";
    return 2;
  }
  out << "targets:";
  for (std::size_t i = 0; i < s.target_words.size(); ++i)
    out << ' ' << s.target_words[i] << '@' << s.target_indices[i];
  out << '\n';
  for (const auto& r : s.restarts) {
    out << "restart " << r.restart << ": " << r.filter_reason << " steps=" << r.steps
        << " candidate=" << r.candidate << '\n';
    if (c.verbose) {
      out << "  loss:";
      for (double l : r.loss_trace) out << ' ' << l;
      out << '\n';
    }
  }
  out << "result: " << (s.accepted_candidate ? *s.accepted_candidate : "no example found") << '\n';
  const auto record = sample_to_json(s).dump();
  out << record << '\n';
  if (!c.output_dir.empty()) {
    ensure_dir(c.output_dir);
    write_text_file(in_dir(c.output_dir, "attack_record.json"), record + "\n");
  }
  return 0;
}

int attack_corpus(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto [vocab, ckpt] = load_model(c);
  const auto corpus = read_corpus(c.corpus);
  const auto syn = synonyms_or_empty(c);
  const SimilarityOracle oracle(ckpt, vocab, oracle_config(c));
  const auto cfg = eval_config(c);
  ensure_dir(c.output_dir);

  SuccessReport report;
  std::optional<BaselineComparison> cmp;
  if (c.baseline) {
    if (c.antonyms.empty()) throw Error(Errc::InvalidConfig, "--baseline needs --antonyms");
    cmp = compare_baseline(ckpt, vocab, corpus, cfg, syn, load_antonym_lexicon(c.antonyms), oracle);
    report = cmp->gradient;
  } else {
    report = evaluate_dataset(ckpt, vocab, corpus, cfg, syn, oracle);
  }

  std::string records;
  for (const auto& s : report.samples) {
    log_sample(err, s, c.verbose);
    records += sample_to_json(s).dump() + "\n";
  }
  write_text_file(in_dir(c.output_dir, "attack_records.jsonl"), records);
  export_report(report, in_dir(c.output_dir, "report.json"), ReportFormat::Json);
  export_report(report, in_dir(c.output_dir, "report.csv"), ReportFormat::Csv);

  out << "success_rate=" << fixed4(report.success_rate) << " (" << report.n_success << "/"
      << report.n_samples << ", skipped " << report.n_skipped << ")\n";
  if (cmp) {
    nlohmann::json j = {{"gradient_rate", cmp->gradient.success_rate},
                        {"antonym_rate", cmp->antonym_rate},
                        {"antonym_success", cmp->antonym_success},
                        {"n_samples", cmp->gradient.n_samples},
                        {"delta", cmp->delta}};
    write_text_file(in_dir(c.output_dir, "baseline.json"), j.dump(2) + "\n");
    out << "antonym_rate=" << fixed4(cmp->antonym_rate) << " delta=" << fixed4(cmp->delta) << '\n';
  }
  return 0;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto [vocab, ckpt] = load_model(c);
  const auto corpus = read_corpus(c.corpus);
  const auto syn = synonyms_or_empty(c);
  const SimilarityOracle oracle(ckpt, vocab, oracle_config(c));
  const auto cfg = eval_config(c);
  ensure_dir(c.output_dir);
  const auto reports = sweep(ckpt, vocab, corpus, cfg, c.k_min, c.k_max, syn, oracle);
  for (const auto& r : reports) {
    export_report(r, in_dir(c.output_dir, "report_k" + std::to_string(r.k_words) + ".json"),
                  ReportFormat::Json);
    out << "k=" << r.k_words << " success_rate=" << fixed4(r.success_rate)
        << " n_evaluated=" << r.n_samples << " n_skipped=" << r.n_skipped << '\n';
    if (c.verbose)
      for (const auto& s : r.samples) log_sample(err, s, true);
  }
  write_text_file(in_dir(c.output_dir, "sweep_summary.csv"), sweep_summary_csv(reports));
  return 0;
}

int cmd_transfer(const RunConfig& c, std::ostream& out) {
  const auto [vocab, ckpt] = load_model(c);
  const auto corpus = read_corpus(c.corpus);
  const auto pairs = read_pairs(c.pairs);
  const auto counts = transfer_audit(pairs, ckpt, vocab, corpus, c.limit, parse_slot(c.target_slot));
  std::string csv = "original,substitution,provenance,success_num,total\n";
  for (const auto& tc : counts) {
    out << tc.pair.original_word << "→" << tc.pair.substitution_word << "  " << tc.success_num
        << "/" << tc.total << '\n';
    csv += tc.pair.original_word + "," + tc.pair.substitution_word + "," + tc.pair.provenance + "," +
           std::to_string(tc.success_num) + "," + std::to_string(tc.total) + "\n";
  }
  ensure_dir(c.output_dir);
  write_text_file(in_dir(c.output_dir, "transfer.csv"), csv);
  return 0;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const auto report = load_report(c.input);
  out << "k=" << report.k_words << " n_samples=" << report.n_samples
      << " n_skipped=" << report.n_skipped << " success_rate=" << fixed4(report.success_rate) << '\n';
  for (const auto& g : frequency_report(report.samples, c.top_n)) {
    out << g.original << ":";
    for (const auto& [sub, n] : g.substitutions) out << ' ' << sub << '(' << n << ')';
    out << '\n';
  }
  if (!c.output.empty())
    export_report(report, c.output, c.format == "csv" ? ReportFormat::Csv : ReportFormat::Json);
  return 0;
}

/// Flat `key=value` lines; keys are long flag names without the dashes.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot read config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::InvalidConfig, path + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

void add_model_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--checkpoint", c.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sub->add_option("--vocab", c.vocab, "Vocabulary file (default: <checkpoint>.vocab)");
}

void add_attack_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--synonyms", c.synonyms, "Synonym lexicon")->check(CLI::ExistingFile);
  sub->add_option("--output-dir", c.output_dir, "Directory for reports");
  sub->add_option("--eta", c.eta, "Sign-gradient step size")->check(CLI::PositiveNumber);
  sub->add_option("--max-steps", c.max_steps, "Steps per restart")->check(CLI::Range(1, 1000000));
  sub->add_option("--restarts", c.restarts, "Restarts per sample")->check(CLI::Range(1, 100000));
  sub->add_option("--k-words", c.k_words, "Words replaced per sample")->check(CLI::Range(1, 10000));
  sub->add_option("--seed", c.seed, "Base seed");
  sub->add_option("--ig-steps", c.ig_steps, "Integrated-gradient steps")->check(CLI::Range(1, 1000000));
  sub->add_option("--target-slot", c.target_slot, "Sentence slot to attack")
      ->check(CLI::IsMember({"first", "second"}));
  sub->add_option("--oracle-mode", c.oracle_mode)->check(CLI::IsMember({"builtin", "remote"}));
  sub->add_option("--oracle-endpoint", c.oracle_endpoint, "http://host:port/path");
  sub->add_option("--oracle-threshold", c.oracle_threshold)->check(CLI::Range(0.0, 1.0));
  sub->add_option("--oracle-timeout", c.oracle_timeout, "Seconds")->check(CLI::PositiveNumber);
  sub->add_flag("--no-oracle-fallback", c.no_oracle_fallback, "Fail instead of using the builtin oracle");
  sub->add_option("--oracle-in-flight", c.oracle_in_flight)->check(CLI::Range(1, 1024));
  sub->add_option("--limit", c.limit, "Sample cap");
  sub->add_option("--workers", c.workers)->check(CLI::Range(1, 256));
  sub->add_flag("--verbose", c.verbose, "Per-restart loss traces");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Obstinate adversarial example toolkit"};
  app.require_subcommand(1);
  app.footer("--config FILE supplies key=value defaults (keys are long flag names); flags win.");

  auto* train = app.add_subcommand("train", "Train the desk classifier");
  train->add_option("--corpus", c.corpus, "Training corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", c.checkpoint, "Output checkpoint")->required();
  train->add_option("--vocab", c.vocab, "Output vocabulary (default: <checkpoint>.vocab)");
  train->add_option("--min-count", c.min_count)->check(CLI::Range(1, 1 << 30));
  train->add_option("--dim", c.dim)->check(CLI::Range(1, 4096));
  train->add_option("--hidden", c.hidden)->check(CLI::Range(1, 4096));
  train->add_option("--epochs", c.epochs)->check(CLI::Range(0, 100000));
  train->add_option("--learning-rate", c.learning_rate)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", c.batch_size)->check(CLI::Range(1, 1 << 20));
  train->add_option("--seed", c.seed);
  train->add_option("--target-slot", c.target_slot)->check(CLI::IsMember({"first", "second"}));

  auto* attack = app.add_subcommand("attack", "Search for obstinate examples");
  add_model_options(attack, c);
  add_attack_options(attack, c);
  auto* corpus_opt = attack->add_option("--corpus", c.corpus, "Corpus file")->check(CLI::ExistingFile);
  auto* sentence_opt = attack->add_option("--sentence", c.sentence, "Single sentence");
  attack->add_option("--second-sentence", c.second_sentence, "Second sentence of a pair")
      ->needs(sentence_opt);
  corpus_opt->excludes(sentence_opt);
  attack->add_option("--antonyms", c.antonyms, "Antonym lexicon")->check(CLI::ExistingFile);
  attack->add_flag("--baseline", c.baseline, "Also run the antonym baseline");

  auto* sweep_cmd = app.add_subcommand("sweep", "Success rate per number of replaced words");
  add_model_options(sweep_cmd, c);
  add_attack_options(sweep_cmd, c);
  sweep_cmd->add_option("--corpus", c.corpus)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--k-min", c.k_min)->check(CLI::Range(1, 10000));
  sweep_cmd->add_option("--k-max", c.k_max)->check(CLI::Range(1, 10000));

  auto* transfer = app.add_subcommand("transfer", "Audit substitution pairs on a model");
  add_model_options(transfer, c);
  transfer->add_option("--corpus", c.corpus)->required()->check(CLI::ExistingFile);
  transfer->add_option("--pairs", c.pairs, "original<TAB>substitution<TAB>provenance")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--limit", c.limit);
  transfer->add_option("--output-dir", c.output_dir);
  transfer->add_option("--target-slot", c.target_slot)->check(CLI::IsMember({"first", "second"}));

  auto* report = app.add_subcommand("report", "Summarise a JSON report");
  report->add_option("--input", c.input, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--top-n", c.top_n)->check(CLI::Range(1, 1 << 20));
  report->add_option("--format", c.format)->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--output", c.output, "Export path");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // --config is handled here: its values become flags the user did not pass.
    std::string config_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_file = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        break;
      }
    }
    CLI::App* sub = args.empty() ? nullptr : app.get_subcommand_no_throw(args[0]);
    if (!config_file.empty() && sub != nullptr) {
      if (!fs::exists(config_file)) throw Error(Errc::InvalidConfig, "no such config " + config_file);
      std::vector<std::string> extra;
      for (const auto& [key, value] : read_config_file(config_file)) {
        const std::string flag = "--" + key;
        const auto* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr || given_on_command_line(args, flag)) continue;
        extra.push_back(flag + "=" + value);
      }
      args.insert(args.begin() + 1, extra.begin(), extra.end());
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  try {
    if (*train) return cmd_train(c, out);
    if (*attack) {
      if (c.corpus.empty() == c.sentence.empty()) {
        err << "attack needs exactly one of --corpus or --sentence\n";
        return 2;
      }
      return c.corpus.empty() ? attack_sentence(c, out, err) : attack_corpus(c, out, err);
    }
    if (*sweep_cmd) {
      if (c.k_min > c.k_max) {
        err << "--k-min must not exceed --k-max\n";
        return 2;
      }
      return cmd_sweep(c, out, err);
    }
    if (*transfer) return cmd_transfer(c, out);
    if (*report) return cmd_report(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
  return 2;
}

}  // namespace obstinate
