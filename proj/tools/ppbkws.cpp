// ppbkws: command-line front end. Every subcommand reads files (or stdin for
// "-") and writes files (or stdout for "-").

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppbkws/ppbkws.hpp"

namespace fs = std::filesystem;
using namespace ppbkws;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string read_input(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  return detail::read_file(path);
}

void write_output(const std::string& path, std::string_view data) {
  if (path == "-") {
    std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
    std::cout.flush();
    if (!std::cout) throw Error("write to stdout failed");
    return;
  }
  detail::write_file(path, data);
}

// Config checks are flag problems, reported as usage errors.
template <typename Cfg>
void check(const Cfg& cfg) {
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

PhoneSet load_phones(const std::string& path) { return parse_phone_set(read_input(path)); }

KeywordLexicon load_keywords(const std::string& path, const PhoneSet& phones) {
  std::vector<std::string> warnings;
  auto lex = parse_keywords(read_input(path), phones, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return lex;
}

struct Options {
  std::string input = "-";
  std::string output = "-";

  GenConfig gen;
  std::string out_dir;

  std::string phones;
  std::string keywords;
  std::string refs;
  std::string model;
  std::string model_out;
  std::string rtf_out;
  std::string curve_out;
  std::string ppb;
  std::optional<double> speech_seconds;
  std::vector<std::string> inputs;
  std::vector<std::string> weights;

  RunConfig run;
  bool exact = false;

  std::string corpus;
  std::string lattices;
  std::string param;
  double from = 0.0;
  double to = 1.0;
  int steps = 10;
};

void add_io(CLI::App* sub, Options& o) {
  sub->add_option("-i,--input", o.input, "input file, - for stdin")->capture_default_str();
  sub->add_option("-o,--output", o.output, "output file, - for stdout")->capture_default_str();
}

void add_lambda(CLI::App* sub, Options& o) {
  sub->add_option("--lambda", o.run.posterior.lambda, "acoustic scale")->capture_default_str();
}

void add_smoothing(CLI::App* sub, Options& o) {
  sub->add_option("--alpha", o.run.smoothing.alpha, "smoothing weight")->capture_default_str();
  sub->add_option("--epsilon", o.run.smoothing.epsilon, "probability floor")->capture_default_str();
  sub->add_flag("--log", o.run.smoothing.emit_log, "write log-probabilities");
}

void add_decoder(CLI::App* sub, Options& o) {
  auto& d = o.run.decoder;
  sub->add_option("--theta-start", d.theta_start, "spawn threshold")->capture_default_str();
  sub->add_option("--theta-beam", d.theta_beam, "beam threshold (defaults to min(0.1, theta-hit))");
  sub->add_option("--theta-hit", d.theta_hit, "acceptance threshold")->capture_default_str();
  sub->add_option("--min-phone-frames", d.min_phone_frames)->capture_default_str();
  sub->add_option("--max-phone-frames", d.max_phone_frames)->capture_default_str();
  sub->add_flag("--exact", o.exact, "exact recombination (slower, no state bound)");
  sub->add_option("--jobs", o.run.jobs, "worker threads")->capture_default_str();
}

void add_scoring(CLI::App* sub, Options& o) {
  sub->add_option("--beta", o.run.scoring.beta, "false-alarm weight")->capture_default_str();
  sub->add_option("--tolerance", o.run.scoring.align_tolerance_seconds, "midpoint tolerance in seconds")
      ->capture_default_str();
  sub->add_option("--gamma", o.run.sto_gamma, "STO exponent")->capture_default_str();
}

void finish_decoder(CLI::App* sub, Options& o) {
  auto& d = o.run.decoder;
  if (sub->count("--theta-beam") == 0 && d.theta_beam > d.theta_hit) d.theta_beam = d.theta_hit;
  d.recombination = o.exact ? Recombination::kExact : Recombination::kPerState;
  check(d);
}

void run_gen(Options& o) {
  check(o.gen);
  if (o.out_dir.empty()) throw UsageError("gen needs --out-dir for the phone set, keywords and references");
  const auto corpus = generate_corpus(o.gen);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  detail::write_file((dir / "phones.txt").string(), serialize_phone_set(corpus.phones));
  detail::write_file((dir / "keywords.txt").string(), serialize_keywords(corpus.lexicon, corpus.phones));
  detail::write_file((dir / "refs.tsv").string(), serialize_refs(corpus.refs));
  const auto lattices = serialize_lattices(corpus.lattices);
  detail::write_file((dir / "lattices.txt").string(), lattices);
  if (!o.output.empty()) write_output(o.output, lattices);
}

void run_posteriors(Options& o) {
  check(o.run.posterior);
  if (o.phones.empty()) throw UsageError("posteriors needs --phones");
  // stdin first: in a pipe behind gen, the side files exist once it closes.
  const auto text = read_input(o.input);
  const auto phones = load_phones(o.phones);
  const auto lattices = parse_lattices(text, &phones);
  const auto raw = compute_raw_posteriors(lattices, phones, o.run.posterior, o.run.jobs);
  write_output(o.output, serialize_matrices_for_path(o.output, raw));
}

void run_confusion_model(Options& o) {
  const auto raw = parse_matrices(read_input(o.input));
  write_output(o.output, serialize_confusion_model(estimate_confusion_model(raw)));
}

void run_smooth(Options& o) {
  check(o.run.smoothing);
  const auto raw = parse_matrices(read_input(o.input));
  const auto cm = o.model.empty() ? estimate_confusion_model(raw) : parse_confusion_model(read_input(o.model));
  if (!o.model_out.empty()) write_output(o.model_out, serialize_confusion_model(cm));
  write_output(o.output, serialize_matrices_for_path(o.output, smooth_all(raw, cm, o.run.smoothing)));
}

void run_search(CLI::App* sub, Options& o) {
  finish_decoder(sub, o);
  if (o.phones.empty() || o.keywords.empty()) throw UsageError("search needs --phones and --keywords");
  const auto features = parse_matrices(read_input(o.input));
  const auto phones = load_phones(o.phones);
  const auto lexicon = load_keywords(o.keywords, phones);
  for (const auto& m : features)
    if (m.phones() != phones.size())
      throw Error("features of '" + m.utt_id() + "' have " + std::to_string(m.phones()) + " phones, phone set has " +
                  std::to_string(phones.size()));
  const auto result = search_corpus(lexicon, features, o.run.decoder, o.run.jobs);
  if (!o.rtf_out.empty()) write_output(o.rtf_out, serialize_rtf_report(result.timings));
  write_output(o.output, serialize_hits(result.hits));
}

void run_normalize(Options& o) {
  if (!(o.run.sto_gamma > 0.0)) throw UsageError("--gamma must be positive");
  write_output(o.output, serialize_hits(sto_normalize(parse_hits(read_input(o.input)), o.run.sto_gamma)));
}

void run_score(Options& o) {
  if (o.refs.empty()) throw UsageError("score needs --refs");
  if (o.speech_seconds && !o.ppb.empty()) throw UsageError("give either --speech-seconds or --ppb, not both");
  if (!o.speech_seconds && o.ppb.empty()) throw UsageError("score needs --speech-seconds or --ppb");
  const auto hits = parse_hits(read_input(o.input));
  auto cfg = o.run.scoring;
  cfg.total_speech_seconds = o.speech_seconds ? *o.speech_seconds : total_duration(parse_matrices(read_input(o.ppb)));
  check(cfg);
  const auto refs = parse_refs(read_input(o.refs));
  const auto report = compute_mtwv(align_hits(hits, refs, cfg), refs, cfg);
  if (report.keywords_without_refs > 0)
    std::cerr << "note: " << report.keywords_without_refs << " keyword(s) without references left out\n";
  if (!o.curve_out.empty()) write_output(o.curve_out, serialize_twv_curve(report));
  write_output(o.output, mtwv_summary_line(report) + '\n');
}

void run_fuse(Options& o) {
  if (o.inputs.empty()) throw UsageError("fuse needs at least one --input name=path");
  std::vector<SystemHits> systems;
  for (const auto& spec : o.inputs) {
    const auto eq = spec.find('=');
    SystemHits s;
    if (eq == std::string::npos) {
      s.name = fs::path(spec).stem().string();
      s.hits = parse_hits(read_input(spec));
    } else {
      s.name = spec.substr(0, eq);
      s.hits = parse_hits(read_input(spec.substr(eq + 1)));
    }
    for (const auto& other : systems)
      if (other.name == s.name) throw UsageError("duplicate system name '" + s.name + "'");
    systems.push_back(std::move(s));
  }
  for (const auto& spec : o.weights) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--weights expects name=w, got '" + spec + "'");
    const auto name = spec.substr(0, eq);
    const auto w = detail::parse_number<double>(std::string_view(spec).substr(eq + 1));
    if (!w) throw UsageError("bad weight in '" + spec + "'");
    bool found = false;
    for (auto& s : systems)
      if (s.name == name) {
        s.weight = *w;
        found = true;
      }
    if (!found) throw UsageError("--weights names unknown system '" + name + "'");
  }
  std::vector<Hit> fused;
  try {
    fused = fuse_lists(systems, o.run.scoring.align_tolerance_seconds);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  write_output(o.output, serialize_hits(fused));
}

void run_sweep(CLI::App* sub, Options& o) {
  const auto param = parse_sweep_param(o.param);
  if (!param) throw UsageError("unknown --param '" + o.param + "'");
  if (o.steps < 1) throw UsageError("--steps must be >= 1");
  if (!o.corpus.empty()) {
    const fs::path dir(o.corpus);
    if (o.lattices.empty()) o.lattices = (dir / "lattices.txt").string();
    if (o.phones.empty()) o.phones = (dir / "phones.txt").string();
    if (o.keywords.empty()) o.keywords = (dir / "keywords.txt").string();
    if (o.refs.empty()) o.refs = (dir / "refs.tsv").string();
  }
  if (o.lattices.empty() || o.phones.empty() || o.keywords.empty() || o.refs.empty())
    throw UsageError("sweep needs --corpus or all of --lattices, --phones, --keywords, --refs");
  if (*param != SweepParam::kThetaHit) finish_decoder(sub, o);
  else o.run.decoder.recombination = o.exact ? Recombination::kExact : Recombination::kPerState;
  check(o.run.posterior);
  check(o.run.smoothing);
  if (o.speech_seconds) o.run.scoring.total_speech_seconds = *o.speech_seconds;

  const auto phones = load_phones(o.phones);
  const auto lexicon = load_keywords(o.keywords, phones);
  const auto lattices = parse_lattices(read_input(o.lattices), &phones);
  const auto refs = parse_refs(read_input(o.refs));
  const auto values = linspace(o.from, o.to, o.steps);
  std::vector<SweepPoint> points;
  try {
    points = sweep(lattices, phones, lexicon, refs, o.run, *param, values);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }

  std::string out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out += detail::format_double(p.value) + '\t' + detail::format_double(p.mtwv) + '\t' +
           detail::format_double(p.theta) + '\n';
    if (p.mtwv > points[best].mtwv) best = i;
  }
  out += "# best " + o.param + "=" + detail::format_double(points[best].value) + " " +
         mtwv_summary_line({{}, points[best].mtwv, points[best].theta, {}, 0}) + '\n';
  write_output(o.output, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phoneme-posterior keyword search"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "synthetic corpus: lattices, phone set, keywords, references");
  gen->add_option("--seed", o.gen.seed)->capture_default_str();
  gen->add_option("--utterances", o.gen.num_utterances)->capture_default_str();
  gen->add_option("--frames", o.gen.frames_per_utterance, "frames per utterance")->capture_default_str();
  gen->add_option("--phones", o.gen.num_phones, "phone set size including SIL")->capture_default_str();
  gen->add_option("--keywords", o.gen.num_keywords)->capture_default_str();
  gen->add_option("--occurrences", o.gen.occurrences, "plants per keyword")->capture_default_str();
  gen->add_option("--noise", o.gen.confusion_noise, "confusion noise mass")->capture_default_str();
  gen->add_option("--branching", o.gen.branching, "arcs per word slot")->capture_default_str();
  gen->add_option("--lambda", o.gen.lambda, "acoustic scale the noise is calibrated for")->capture_default_str();
  gen->add_option("--out-dir", o.out_dir, "directory for phones.txt, keywords.txt, refs.tsv, lattices.txt");
  gen->add_option("-o,--output", o.output, "also write the lattices here, - for stdout")->capture_default_str();

  auto* post = app.add_subcommand("posteriors", "lattices -> raw frame posteriors");
  add_io(post, o);
  add_lambda(post, o);
  post->add_option("--phones", o.phones, "phone set file");
  post->add_option("--jobs", o.run.jobs, "worker threads")->capture_default_str();

  auto* cmodel = app.add_subcommand("confusion-model", "raw posteriors -> confusion model");
  add_io(cmodel, o);

  auto* smooth_cmd = app.add_subcommand("smooth", "raw posteriors -> smoothed features");
  add_io(smooth_cmd, o);
  add_smoothing(smooth_cmd, o);
  smooth_cmd->add_option("--model", o.model, "confusion model (estimated from the input when absent)");
  smooth_cmd->add_option("--save-model", o.model_out, "write the confusion model used");

  auto* search_cmd = app.add_subcommand("search", "smoothed features -> keyword hits");
  add_io(search_cmd, o);
  add_decoder(search_cmd, o);
  search_cmd->add_option("--phones", o.phones, "phone set file");
  search_cmd->add_option("--keywords", o.keywords, "keyword lexicon file");
  search_cmd->add_option("--rtf", o.rtf_out, "per-keyword timing report");

  auto* norm = app.add_subcommand("normalize", "sum-to-one score normalization");
  add_io(norm, o);
  norm->add_option("--gamma", o.run.sto_gamma, "STO exponent")->capture_default_str();

  auto* score = app.add_subcommand("score", "hits + references -> MTWV");
  add_io(score, o);
  score->add_option("--refs", o.refs, "reference occurrences");
  score->add_option("--speech-seconds", o.speech_seconds, "total speech duration");
  score->add_option("--ppb", o.ppb, "features whose total duration is the speech duration");
  score->add_option("--beta", o.run.scoring.beta)->capture_default_str();
  score->add_option("--tolerance", o.run.scoring.align_tolerance_seconds)->capture_default_str();
  score->add_option("--curve", o.curve_out, "write the theta/TWV curve as TSV");

  auto* fuse = app.add_subcommand("fuse", "list-level fusion of STO-normalized hit lists");
  fuse->add_option("-i,--input", o.inputs, "name=path (repeatable)");
  fuse->add_option("-o,--output", o.output)->capture_default_str();
  fuse->add_option("--weights", o.weights, "name=w (repeatable, default 1)");
  fuse->add_option("--tolerance", o.run.scoring.align_tolerance_seconds)->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "MTWV as a function of one parameter");
  sweep_cmd->add_option("--corpus", o.corpus, "directory written by gen");
  sweep_cmd->add_option("--lattices", o.lattices);
  sweep_cmd->add_option("--phones", o.phones);
  sweep_cmd->add_option("--keywords", o.keywords);
  sweep_cmd->add_option("--refs", o.refs);
  sweep_cmd->add_option("--param", o.param, "theta_hit, theta_beam, theta_start, alpha or lambda")->required();
  sweep_cmd->add_option("--from", o.from)->required();
  sweep_cmd->add_option("--to", o.to)->required();
  sweep_cmd->add_option("--steps", o.steps)->capture_default_str();
  sweep_cmd->add_option("--speech-seconds", o.speech_seconds, "default: total feature duration");
  sweep_cmd->add_option("-o,--output", o.output)->capture_default_str();
  add_lambda(sweep_cmd, o);
  add_smoothing(sweep_cmd, o);
  add_decoder(sweep_cmd, o);
  add_scoring(sweep_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) run_gen(o);
    else if (*post) run_posteriors(o);
    else if (*cmodel) run_confusion_model(o);
    else if (*smooth_cmd) run_smooth(o);
    else if (*search_cmd) run_search(search_cmd, o);
    else if (*norm) run_normalize(o);
    else if (*score) run_score(o);
    else if (*fuse) run_fuse(o);
    else if (*sweep_cmd) run_sweep(sweep_cmd, o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
