#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uicws/config.hpp"
#include "uicws/model_check.hpp"
#include "uicws/synthetic.hpp"
#include "uicws/train.hpp"

namespace fs = std::filesystem;
using namespace uicws;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitGradcheck = 3;

/// Opens `path` for writing, or returns stdout for "-" / empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw DataError("cannot write output file: " + path);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

/// Loads a checkpoint in whatever precision it was saved and hands it to `fn`.
template <class Fn>
auto with_model(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  try {
    const auto manifest = read_manifest(in);
    if (manifest.dtype == "f64") return fn(Model<double>::load(in, manifest));
    return fn(Model<float>::load(in, manifest));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

// ---- scan

struct ScanArgs {
  std::string lexicon;
  std::string text;
};

int run_scan(const ScanArgs& a) {
  const auto lex = Lexicon::load(a.lexicon);
  const auto sentence = utf8::decode(a.text);
  const auto words = scan_candidates(sentence, lex);
  std::cout << "# candidates " << words.size() << " (word start end)\n";
  for (const auto& w : words) std::cout << utf8::encode(w.surface) << ' ' << w.start << ' ' << w.end << '\n';
  std::cout << "# char B I E S\n";
  const auto m = candidate_matrix(sentence.size(), words);
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    std::cout << utf8::encode(sentence[i]);
    for (auto bit : m.rows[i]) std::cout << ' ' << static_cast<int>(bit);
    std::cout << '\n';
  }
  return kExitOk;
}

// ---- train

struct TrainArgs {
  std::string config;
  std::optional<std::string> train, val, test, lexicon, embeddings, output_dir;
  std::optional<std::size_t> max_epochs, patience, batch_size, jobs, split_seed;
  std::optional<double> lr, dropout, val_fraction;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> ablation, precision;
  bool redraw_split = false;
  bool bio = false;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_config(a.config);
  const auto set = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  set(c.paths.train, a.train);
  set(c.paths.val, a.val);
  set(c.paths.test, a.test);
  set(c.paths.lexicon, a.lexicon);
  set(c.paths.embeddings, a.embeddings);
  set(c.paths.output_dir, a.output_dir);
  set(c.train.max_epochs, a.max_epochs);
  set(c.train.patience, a.patience);
  set(c.train.batch_size, a.batch_size);
  set(c.train.jobs, a.jobs);
  set(c.train.split_seed, a.split_seed);
  set(c.train.lr, a.lr);
  set(c.encoder.dropout, a.dropout);
  set(c.train.val_fraction, a.val_fraction);
  if (!a.seeds.empty()) c.train.seeds = a.seeds;
  if (a.ablation) c.train.ablation = ablation_from_string(*a.ablation);
  if (a.precision) c.train.precision = precision_from_string(*a.precision);
  if (a.redraw_split) c.train.redraw_split = true;
  if (a.bio) c.bio_input = true;
  c.validate();
  c.validate_paths();
  return c;
}

template <class Real>
AggregateReport train_all(const RunConfig& c, const Dataset& data) {
  const fs::path out = c.paths.output_dir;
  return run_seeds<Real>(data, c.encoder, c.train, [&](std::uint64_t seed, const TrainResult<Real>& r, const std::string& log) {
    const std::string stem = "seed-" + std::to_string(seed);
    r.model.save((out / (stem + ".ckpt")).string());
    std::ofstream(out / (stem + ".log")) << log;
    if (!r.val_indices.empty()) {
      const std::uint64_t split_seed = c.train.redraw_split ? seed : c.train.split_seed;
      const std::string manifest =
          c.paths.train + (c.train.redraw_split ? ".split-seed" + std::to_string(seed) : std::string(".split"));
      write_split_manifest(manifest, r.val_indices, split_seed, c.train.val_fraction);
    }
    std::cerr << stem << ": " << r.log.size() << " epochs, best epoch " << r.best_epoch << "\n";
  });
}

int run_train(const TrainArgs& a) {
  const auto c = resolve_config(a);
  const ConllOptions conll{1, false, c.bio_input};
  const auto load = [&](const std::string& path) {
    return path.empty() ? std::vector<Sentence>{} : parse_conll(path, conll);
  };
  std::optional<EmbeddingTable> embeddings;
  if (!c.paths.embeddings.empty()) embeddings = load_embeddings(c.paths.embeddings, c.encoder.d_e);
  const auto data =
      make_dataset(load(c.paths.train), load(c.paths.val), load(c.paths.test), Lexicon::load(c.paths.lexicon), std::move(embeddings));

  fs::create_directories(c.paths.output_dir);
  save_config((fs::path(c.paths.output_dir) / "config.ini").string(), c);
  const auto agg = c.train.precision == Precision::Double ? train_all<double>(c, data) : train_all<float>(c, data);
  {
    std::ofstream report(fs::path(c.paths.output_dir) / "report.txt");
    if (!report) throw DataError("cannot write report in " + c.paths.output_dir);
    write_report(report, agg);
  }
  std::cout << std::fixed << std::setprecision(4) << "F = " << agg.mean_f() << " +- " << agg.std_f() << " over "
            << agg.runs.size() << " seeds; report in " << (fs::path(c.paths.output_dir) / "report.txt").string() << '\n';
  return kExitOk;
}

// ---- predict

struct PredictArgs {
  std::string checkpoint, input, output, spans;
  bool bio = false;
};

int run_predict(const PredictArgs& a) {
  const auto sentences = parse_conll(a.input, ConllOptions{1, true, a.bio});
  with_model(a.checkpoint, [&](const auto& model) {
    std::vector<std::vector<std::string>> predicted;
    for (const auto& ids : model.decode(sentences)) predicted.push_back(model.tag_strings(ids));
    Output out(a.output);
    write_conll(out.stream(), sentences, &predicted);
    const std::string spans_path = !a.spans.empty() ? a.spans : (a.output.empty() || a.output == "-" ? "" : a.output + ".spans");
    if (spans_path.empty()) return 0;
    Output spans(spans_path);
    spans.stream() << "# sentence start end type text\n";
    for (std::size_t s = 0; s < sentences.size(); ++s)
      for (const auto& sp : bioes_to_spans(predicted[s], s))
        spans.stream() << s << '\t' << sp.start << '\t' << sp.end << '\t' << sp.type << '\t'
                       << utf8::encode(std::u32string_view(sentences[s].chars).substr(sp.start, sp.length())) << '\n';
    return 0;
  });
  return kExitOk;
}

// ---- eval

struct EvalArgs {
  std::string checkpoint, corpus, predictions, output;
  bool bio = false;
};

int run_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.predictions.empty()) {
    throw CLI::ValidationError("eval", "give exactly one of --checkpoint (with --corpus) or --predictions");
  }
  EvalReport report;
  if (!a.predictions.empty()) {
    const auto gold = parse_conll(a.predictions, ConllOptions{1, false, a.bio});
    const auto pred = parse_conll(a.predictions, ConllOptions{2, false, a.bio});
    report = evaluate_spans(detail::gold_spans(gold), detail::gold_spans(pred));
  } else {
    if (a.corpus.empty()) throw CLI::ValidationError("eval", "--checkpoint needs --corpus");
    const auto gold = parse_conll(a.corpus, ConllOptions{1, false, a.bio});
    report = with_model(a.checkpoint, [&](const auto& model) { return evaluate(model, gold); });
  }
  Output out(a.output);
  write_report(out.stream(), report);
  return kExitOk;
}

// ---- gradcheck

struct GradcheckArgs {
  std::string config;
  std::size_t n = 3;
  std::size_t length = 6;
  std::size_t types = 3;
  std::size_t coords = 20;
  std::uint64_t seed = 1;
};

int run_gradcheck(const GradcheckArgs& a) {
  const RunConfig c = a.config.empty() ? RunConfig{} : load_config(a.config);
  c.validate();
  double worst = 0;
  for (std::size_t k = 0; k < a.n; ++k) {
    auto inst = make_loss_check_instance(c.encoder, a.length, a.types, a.seed + k, c.train.ablation);
    GradCheckOptions opts;
    opts.max_coords_per_param = a.coords;
    opts.seed = a.seed + k;
    const auto r = check_model_gradients(inst, opts);
    std::cout << "instance " << k << ": max relative error " << std::scientific << std::setprecision(3) << r.max_rel_error
              << '\n';
    for (const auto& p : r.params)
      std::cout << "  " << std::left << std::setw(18) << p.name << std::right << ' ' << std::setw(6) << p.coords << ' '
                << p.max_rel_error << '\n';
    worst = std::max(worst, r.max_rel_error);
  }
  const bool ok = worst < 1e-4;
  std::cout << "max relative error " << std::scientific << std::setprecision(3) << worst << (ok ? " < " : " >= ")
            << "1e-4\n";
  return ok ? kExitOk : kExitGradcheck;
}

// ---- inspect

struct InspectArgs {
  std::string checkpoint, text;
};

template <class Real>
void print_table(std::ostream& out, const std::u32string& chars, const Tensor<Real>& t,
                 const std::vector<std::string>& header) {
  out << "char";
  for (const auto& h : header) out << std::setw(9) << h;
  out << '\n' << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    out << utf8::encode(chars[i]) << "  ";
    for (std::size_t j = 0; j < t.cols(); ++j) out << std::setw(9) << static_cast<double>(t(i, j));
    out << '\n';
  }
  out << std::defaultfloat;
}

int run_inspect(const InspectArgs& a) {
  const auto chars = utf8::decode(a.text);
  with_model(a.checkpoint, [&](const auto& model) {
    const auto t = model.trace(chars);
    std::cout << "# v: position attention (" << chars.size() << " x 4)\n";
    print_table(std::cout, chars, t.v, {"B", "I", "E", "S"});
    if (t.alpha.empty()) {
      std::cout << "\n# alpha: not computed at ablation " << to_string(model.ablation()) << '\n';
    } else {
      std::cout << "\n# alpha: subword attention (" << chars.size() << " x 7)\n";
      print_table(std::cout, chars, t.alpha, {"<-3", "<-2", "<-1", "0", "->1", "->2", "->3"});
    }
    return 0;
  });
  return kExitOk;
}

// ---- synth

struct SynthArgs {
  std::string output;
  std::uint64_t seed = 7;
};

int run_synth(const SynthArgs& a) {
  SyntheticOptions o;
  o.seed = a.seed;
  const auto task = make_synthetic_task(o);
  fs::create_directories(a.output);
  const auto write = [&](const std::string& name, const std::vector<Sentence>& s) {
    std::ofstream out(fs::path(a.output) / name);
    if (!out) throw DataError("cannot write " + (fs::path(a.output) / name).string());
    write_conll(out, s);
  };
  write("train.conll", task.train);
  write("val.conll", task.val);
  write("test.conll", task.test);
  std::ofstream lex(fs::path(a.output) / "lexicon.txt");
  for (const auto& w : task.lexicon.words()) lex << utf8::encode(w) << '\n';
  std::ofstream entities(fs::path(a.output) / "entities.txt");
  for (const auto& w : task.entities) entities << utf8::encode(w) << '\n';
  std::cout << "wrote " << task.train.size() << '/' << task.val.size() << '/' << task.test.size() << " sentences to "
            << a.output << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chinese NER with lexicon candidacy, position attention and adaptive word convolution"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan", "Print lexicon candidates and the n x 4 candidacy matrix of a sentence");
  scan_cmd->add_option("--lexicon", scan.lexicon, "Lexicon file, one word per line")->required();
  scan_cmd->add_option("--text", scan.text, "Sentence (UTF-8)")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed and write checkpoints, logs and a report");
  train_cmd->add_option("--config", tr.config, "INI config file; flags override it");
  train_cmd->add_option("--train", tr.train, "Training corpus (CoNLL)");
  train_cmd->add_option("--val", tr.val, "Validation corpus; split off --train when absent");
  train_cmd->add_option("--test", tr.test, "Test corpus");
  train_cmd->add_option("--lexicon", tr.lexicon, "Lexicon file");
  train_cmd->add_option("--embeddings", tr.embeddings, "Pretrained character vectors");
  train_cmd->add_option("--output-dir", tr.output_dir, "Directory for checkpoints, logs and report");
  train_cmd->add_option("--seeds", tr.seeds, "Seeds, one model each");
  train_cmd->add_option("--max-epochs", tr.max_epochs);
  train_cmd->add_option("--patience", tr.patience);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--dropout", tr.dropout);
  train_cmd->add_option("--val-fraction", tr.val_fraction);
  train_cmd->add_option("--split-seed", tr.split_seed);
  train_cmd->add_flag("--redraw-split", tr.redraw_split, "Draw a new validation split per seed");
  train_cmd->add_option("--ablation", tr.ablation, "baseline, cpe, psa or awc");
  train_cmd->add_option("--precision", tr.precision, "single or double");
  train_cmd->add_option("--jobs", tr.jobs, "Seeds trained concurrently");
  train_cmd->add_flag("--bio", tr.bio, "Corpus tags are BIO");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Tag a corpus; writes char, input tag, predicted tag");
  predict_cmd->add_option("--checkpoint", pr.checkpoint)->required();
  predict_cmd->add_option("--input", pr.input, "CoNLL file; the tag column is optional")->required();
  predict_cmd->add_option("--output", pr.output, "Output CoNLL (default stdout)");
  predict_cmd->add_option("--spans", pr.spans, "Span list (default <output>.spans)");
  predict_cmd->add_flag("--bio", pr.bio, "Input tags are BIO");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Entity-level report with error breakdown and length buckets");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Model to decode --corpus with");
  eval_cmd->add_option("--corpus", ev.corpus, "Gold corpus");
  eval_cmd->add_option("--predictions", ev.predictions, "Three-column file from predict: gold in column 2, prediction in 3");
  eval_cmd->add_option("--output", ev.output, "Report file (default stdout)");
  eval_cmd->add_flag("--bio", ev.bio, "Tags are BIO");

  GradcheckArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model loss on random tiny instances");
  grad_cmd->add_option("--config", gc.config, "Config supplying encoder sizes and ablation");
  grad_cmd->add_option("--n", gc.n, "Number of instances");
  grad_cmd->add_option("--length", gc.length, "Sentence length");
  grad_cmd->add_option("--types", gc.types, "Entity types");
  grad_cmd->add_option("--coords", gc.coords, "Coordinates sampled per parameter; 0 checks all");
  grad_cmd->add_option("--seed", gc.seed);

  InspectArgs in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print the position (v) and subword (alpha) attention of a sentence");
  inspect_cmd->add_option("--checkpoint", in.checkpoint)->required();
  inspect_cmd->add_option("--text", in.text)->required();

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic lexicon-entity task");
  synth_cmd->add_option("--output", sy.output, "Directory")->required();
  synth_cmd->add_option("--seed", sy.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*scan_cmd) return run_scan(scan);
    if (*train_cmd) return run_train(tr);
    if (*predict_cmd) return run_predict(pr);
    if (*eval_cmd) return run_eval(ev);
    if (*grad_cmd) return run_gradcheck(gc);
    if (*inspect_cmd) return run_inspect(in);
    if (*synth_cmd) return run_synth(sy);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
