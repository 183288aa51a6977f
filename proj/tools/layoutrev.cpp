// layoutrev: corpus synthesis, sampling, revision chains, evaluation,
// rendering and the HTTP service.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 backend error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "layoutrev/backend.hpp"
#include "layoutrev/hash.hpp"
#include "layoutrev/orchestrator.hpp"
#include "layoutrev/render.hpp"
#include "layoutrev/sampler.hpp"
#include "layoutrev/service.hpp"
#include "layoutrev/trajectory.hpp"

#include "CLI11.hpp"

using namespace layoutrev;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << data;
}

ClassConfig classes_from(const std::string& path) {
  return path.empty() ? default_class_config() : load_class_config(path);
}

Corpus read_corpus(const std::string& path, const ClassRegistry& registry) {
  return parse_corpus(read_file(path), registry);
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layout revision engine"};
  app.require_subcommand(1);
  std::string classes_path;
  app.add_option("--classes", classes_path, "Class/color table (default: built-in)");

  // corpus synth / stage-fid
  auto* corpus = app.add_subcommand("corpus", "Synthetic corpus operations");
  corpus->require_subcommand(1);
  auto* synth = corpus->add_subcommand("synth", "Generate a synthetic JSONL corpus");
  std::size_t synth_n = 512;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--n", synth_n, "Number of trajectories")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--out", synth_out, "Output path (default stdout)");

  auto* stage = corpus->add_subcommand("stage-fid", "FID of each revision stage to the finals");
  std::string stage_in;
  StageProfileConfig stage_cfg;
  stage->add_option("--in", stage_in, "Corpus JSONL")->required();
  stage->add_option("--buckets", stage_cfg.bucket_count, "Number of stage buckets")
      ->check(CLI::Range(2, 100));
  stage->add_option("--seed", stage_cfg.seed, "RNG seed for per-bucket state picks");

  // sample
  auto* sample = app.add_subcommand("sample", "Expand a corpus into training examples");
  std::string sample_in, sample_out, strategy = "single";
  SamplerConfig sampler;
  sample->add_option("--in", sample_in, "Corpus JSONL")->required();
  sample->add_option("--out", sample_out, "Output JSONL (default stdout)");
  sample->add_option("--strategy", strategy, "direct|direct-i|hop-jti|hop-quant|single|multi")
      ->check(CLI::IsMember({"direct", "direct-i", "hop-jti", "hop-quant", "single", "multi"}));
  sample->add_option("--repeats", sampler.repeats, "Examples per trajectory")
      ->check(CLI::PositiveNumber);
  sample->add_option("--seed", sampler.seed, "RNG seed");
  sample->add_option("--buckets", sampler.bucket_count, "Buckets for hop-quant");

  // chain
  auto* chain = app.add_subcommand("chain", "Run revision chains");
  std::string chain_in, chain_s0, chain_prompt, chain_report, backend_name = "heuristic";
  std::string setup_name = "single", human = "none";
  ChainConfig chain_cfg;
  std::uint64_t backend_seed = 0;
  std::size_t workers = 4;
  chain->add_option("--backend", backend_name, "heuristic|echo|remote")
      ->check(CLI::IsMember({"heuristic", "echo", "remote"}));
  chain->add_option("--setup", setup_name, "direct|hop|single|multi")
      ->check(CLI::IsMember({"direct", "hop", "single", "multi"}));
  chain->add_option("--rounds", chain_cfg.rounds, "Rounds per chain")->check(CLI::PositiveNumber);
  chain->add_option("--temp", chain_cfg.temperature, "Decoding temperature")
      ->check(CLI::NonNegativeNumber);
  auto* in_opt = chain->add_option("--in", chain_in, "Corpus JSONL; one chain per trajectory");
  auto* s0_opt = chain->add_option("--s0", chain_s0, "Single S0 design-code file");
  in_opt->excludes(s0_opt);
  chain->add_option("--prompt", chain_prompt, "Task description for --s0");
  chain->add_option("--human", human, "Round-1 human edit from the corpus: none|final|penultimate")
      ->check(CLI::IsMember({"none", "final", "penultimate"}));
  chain->add_option("--report", chain_report, "Report JSONL (default stdout)");
  chain->add_option("--seed", backend_seed, "Heuristic jitter seed");
  chain->add_option("--workers", workers, "Concurrent chains")->check(CLI::PositiveNumber);

  // eval
  auto* eval = app.add_subcommand("eval", "Per-round metrics of chain reports");
  std::string eval_reports, eval_reference, eval_out;
  EvalConfig eval_cfg;
  eval->add_option("--reports", eval_reports, "Report JSONL from `chain`")->required();
  eval->add_option("--reference", eval_reference, "Corpus JSONL; its final states are the reference")
      ->required();
  eval->add_option("--fid-samples", eval_cfg.fid_samples, "FID sample size")
      ->check(CLI::Range(2, 1 << 20));
  eval->add_option("--seed", eval_cfg.seed, "Subsampling seed");
  eval->add_option("--out", eval_out, "CSV output (default stdout)");

  // render
  auto* rend = app.add_subcommand("render", "Render layouts to PNG");
  std::string render_in, render_dir, which = "all";
  int scale = 1;
  rend->add_option("--in", render_in, "Corpus JSONL or a design-code file")->required();
  rend->add_option("--out-dir", render_dir, "Output directory")->required();
  rend->add_option("--scale", scale, "Integer scale factor")->check(CLI::Range(1, 16));
  rend->add_option("--states", which, "all|initial|final (corpus input)")
      ->check(CLI::IsMember({"all", "initial", "final"}));

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string listen = std::getenv("LAYOUTREV_LISTEN") ? std::getenv("LAYOUTREV_LISTEN")
                                                       : "127.0.0.1:8080";
  std::string data_dir, corpus_dir;
  serve->add_option("--listen", listen, "host:port (env LAYOUTREV_LISTEN)");
  serve->add_option("--data-dir", data_dir, "Session store directory (env LAYOUTREV_DATA_DIR)");
  serve->add_option("--corpus-dir", corpus_dir, "Corpora for /metrics/fid (env LAYOUTREV_CORPUS_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    const ClassConfig classes = classes_from(classes_path);
    const ClassRegistry& reg = classes.registry;

    if (*synth) {
      Corpus c = synthesize_corpus(synth_n, synth_seed, {}, reg);
      write_output(synth_out, format_corpus(c));
    } else if (*stage) {
      Corpus c = read_corpus(stage_in, reg);
      StageProfile p = stage_profile(c, stage_cfg, reg);
      std::cout << "bucket\tsamples\tfid\n";
      for (std::size_t b = 0; b < p.bucket_fids.size(); ++b) {
        std::printf("%zu\t%zu\t%.4f\n", b, p.sample_counts[b], p.bucket_fids[b]);
      }
      for (const FidResult& d : p.details) {
        for (const std::string& w : d.warnings) std::cerr << "warning: " << w << "\n";
      }
    } else if (*sample) {
      sampler.strategy = parse_strategy(strategy);
      Corpus c = read_corpus(sample_in, reg);
      write_output(sample_out, format_examples(expand_corpus(c, sampler)));
    } else if (*chain) {
      chain_cfg.setup = parse_model_setup(setup_name);
      if (chain_in.empty() && chain_s0.empty()) {
        std::cerr << "chain: one of --in or --s0 is required\n";
        return kExitUsage;
      }
      std::unique_ptr<ReviserBackend> backend = make_backend(backend_name, backend_seed);
      std::vector<ChainReport> reports;
      if (!chain_in.empty()) {
        Corpus c = read_corpus(chain_in, reg);
        reports = run_corpus_chains(*backend, c, chain_cfg, parse_human_source(human), workers);
      } else {
        if (human != "none") {
          std::cerr << "chain: --human needs a corpus (--in)\n";
          return kExitUsage;
        }
        LayoutDoc s0 = parse_layout_code(read_file(chain_s0), reg);
        reports.push_back(run_chain(*backend, chain_prompt, s0, chain_cfg));
      }
      std::string out;
      bool failed = false;
      for (const ChainReport& r : reports) {
        out += session_to_json(r) + "\n";
        if (r.error) {
          std::cerr << "chain " << r.id << ": " << *r.error << "\n";
          failed = true;
        }
      }
      write_output(chain_report, out);
      if (failed) return kExitBackend;
    } else if (*eval) {
      std::vector<ChainReport> reports;
      std::istringstream lines(read_file(eval_reports));
      std::string line;
      while (std::getline(lines, line)) {
        if (!line.empty()) reports.push_back(session_from_json(line, reg));
      }
      Corpus ref = read_corpus(eval_reference, reg);
      std::vector<LayoutDoc> finals;
      for (const RevisionTrajectory& t : ref.trajectories) finals.push_back(t.final_state());
      std::vector<EvalRow> rows = evaluate_run(reports, finals, eval_cfg, reg);
      for (const EvalRow& r : rows) {
        for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
      }
      write_output(eval_out, format_eval_csv(rows));
    } else if (*rend) {
      std::filesystem::create_directories(render_dir);
      auto emit = [&](const LayoutDoc& doc, const std::string& stem) {
        std::string png = encode_png(render(doc, classes.legend, scale, RenderMode::kClip));
        write_output((std::filesystem::path(render_dir) / (stem + ".png")).string(), png);
      };
      std::string text = read_file(render_in);
      if (text.rfind("CANVAS", 0) == 0) {
        LayoutDoc doc = parse_layout_code(text, reg);
        emit(doc, layout_id(serialize_layout_code(doc)));
      } else {
        Corpus c = parse_corpus(text, reg);
        for (const RevisionTrajectory& t : c.trajectories) {
          for (std::size_t i = 0; i < t.states.size(); ++i) {
            bool keep = which == "all" || (which == "initial" && i == 0) ||
                        (which == "final" && i + 1 == t.states.size());
            if (keep) emit(t.states[i], t.id + "_s" + std::to_string(i));
          }
        }
      }
    } else if (*serve) {
      ServiceConfig cfg = ServiceConfig::from_env();
      if (!data_dir.empty()) cfg.data_dir = data_dir;
      if (!corpus_dir.empty()) cfg.corpus_dir = corpus_dir;
      cfg.classes = classes;
      auto colon = listen.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "serve: --listen must be host:port\n";
        return kExitUsage;
      }
      int port = std::stoi(listen.substr(colon + 1));
      Service service(cfg, default_backends());
      int bound = service.bind(listen.substr(0, colon), port);
      if (bound < 0) {
        std::cerr << "serve: cannot bind " << listen << "\n";
        return kExitData;
      }
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << listen.substr(0, colon) << ":" << bound << "\n";
      service.listen();
      g_service = nullptr;
    }
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
