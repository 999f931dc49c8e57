#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "exq/collection_io.hpp"
#include "exq/harness.hpp"
#include "exq/index.hpp"
#include "exq/service.hpp"

namespace fs = std::filesystem;

namespace {

exq::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

std::uint64_t parse_size_limit(const std::string& s) {
  if (s == "inf" || s == "all") return exq::kUnlimited;
  return std::stoull(s);
}

int cmd_ingest(const fs::path& visual, const fs::path& text, const fs::path& out) {
  const auto dv = exq::load_dense(visual);
  const auto dt = exq::load_dense(text);
  if (dv.size() != dt.size()) throw exq::Error("modality count mismatch");
  fs::create_directories(out);
  exq::save_compressed(out / "visual.exqc",
                       exq::compress_collection(dv, exq::compute_feature_stats(dv)));
  exq::save_compressed(out / "text.exqc", exq::compress_collection(dt, exq::compute_feature_stats(dt)));
  std::cout << "compressed " << dv.size() << " items into " << out << '\n';
  return 0;
}

int cmd_build_index(const fs::path& dir, std::uint64_t seed) {
  const auto cv = exq::load_compressed(dir / "visual.exqc");
  const auto ct = exq::load_compressed(dir / "text.exqc");
  const auto corpus = exq::build_corpus(cv, ct, seed);
  exq::save_index(corpus.visual, dir / "visual.exqi");
  exq::save_index(corpus.text, dir / "text.exqi");
  std::cout << "indexed " << corpus.size() << " items: " << corpus.visual.cluster_count()
            << " clusters, " << corpus.visual.level_count() << " levels\n";
  return 0;
}

int cmd_serve(const std::string& host, int port, const fs::path& data_dir) {
  exq::Service service(data_dir);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = service.start(host, port);
  std::cout << "serving " << service.collection_count() << " collections from " << data_dir
            << " on http://" << host << ':' << bound << std::endl;
  service.wait();
  g_service = nullptr;
  return 0;
}

struct BenchOptions {
  exq::SyntheticSpec spec;
  std::vector<std::size_t> b{1, 8, 64};
  std::vector<std::string> max_cluster_size{"inf"};
  std::vector<std::size_t> segments{1};
  std::vector<std::size_t> workers{1};
  std::size_t r = 50;
  std::size_t k = 25;
  std::size_t rounds = 10;
  std::size_t actors = 3;
  fs::path out;
};

int cmd_bench(const BenchOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const exq::SyntheticCollection synth(o.spec);
  const auto cv = exq::compress_source(synth.source(exq::Modality::kVisual));
  const auto ct = exq::compress_source(synth.source(exq::Modality::kText));
  const auto corpus = exq::build_corpus(cv, ct, o.spec.seed);
  std::cerr << "collection ready in "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            << " s (" << corpus.visual.cluster_count() << " clusters)\n";

  std::vector<exq::ActorProfile> actors;
  const auto n_actors = std::min<std::size_t>(o.actors, o.spec.categories);
  for (std::size_t a = 0; a < n_actors; ++a) {
    actors.push_back(exq::make_actor(synth.members(static_cast<std::int32_t>(a)), synth.size(),
                                     exq::mix_seed(o.spec.seed, 100 + a)));
  }

  exq::RetrievalParams base;
  base.r = o.r;
  base.k = o.k;
  std::vector<std::size_t> b = o.b;
  for (auto& v : b) {
    if (v == 0) v = corpus.visual.cluster_count();
  }
  std::vector<std::uint64_t> sm;
  for (const auto& s : o.max_cluster_size) sm.push_back(parse_size_limit(s));
  const auto grid = exq::make_grid(base, b, sm, o.segments, o.workers);
  const std::string csv = exq::sweep(corpus, actors, grid, o.rounds, o.spec.seed);
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(o.out) << csv;
    std::cerr << "wrote " << o.out << '\n';
  }
  return 0;
}

void add_synthetic_options(CLI::App* cmd, exq::SyntheticSpec& spec) {
  cmd->add_option("-n,--items", spec.n, "collection size")->capture_default_str();
  cmd->add_option("--dim-visual", spec.dim_visual)->capture_default_str();
  cmd->add_option("--dim-text", spec.dim_text)->capture_default_str();
  cmd->add_option("--categories", spec.categories)->capture_default_str();
  cmd->add_option("--duplicates", spec.duplicate_fraction, "share of identical dead items")
      ->capture_default_str();
  cmd->add_option("--seed", spec.seed)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exq: interactive multimodal retrieval over compressed feature vectors"};
  app.require_subcommand(1);

  fs::path visual, text, out_dir;
  auto* ingest = app.add_subcommand("ingest", "compress dense EXQD files into EXQC");
  ingest->add_option("visual", visual, "visual EXQD file")->required()->check(CLI::ExistingFile);
  ingest->add_option("text", text, "text EXQD file")->required()->check(CLI::ExistingFile);
  ingest->add_option("-o,--out", out_dir, "output directory")->required();

  fs::path index_dir;
  std::uint64_t index_seed = 1;
  auto* build = app.add_subcommand("build-index", "build both cluster indexes for an ingested collection");
  build->add_option("dir", index_dir, "directory holding visual.exqc and text.exqc")
      ->required()
      ->check(CLI::ExistingDirectory);
  build->add_option("--seed", index_seed)->capture_default_str();

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("-p,--port", port)->capture_default_str();
  serve->add_option("--data-dir", data_dir, "persistence root (default: $EXQ_DATA_DIR or ./exq-data)");

  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "run a parameter sweep on a synthetic collection");
  add_synthetic_options(bench, bench_opts.spec);
  bench->add_option("-b", bench_opts.b, "clusters per modality (0 = all)")->capture_default_str();
  bench->add_option("--sm", bench_opts.max_cluster_size, "cluster size limit (inf = none)")
      ->capture_default_str();
  bench->add_option("--sc", bench_opts.segments, "segments")->capture_default_str();
  bench->add_option("-w,--workers", bench_opts.workers)->capture_default_str();
  bench->add_option("-r", bench_opts.r, "per-segment candidates")->capture_default_str();
  bench->add_option("-k", bench_opts.k, "suggestions per round")->capture_default_str();
  bench->add_option("--rounds", bench_opts.rounds)->capture_default_str();
  bench->add_option("--actors", bench_opts.actors)->capture_default_str();
  bench->add_option("-o,--out", bench_opts.out, "CSV output (default: stdout)");

  exq::SyntheticSpec gen_spec;
  fs::path gen_dir;
  auto* generate = app.add_subcommand("generate", "write a synthetic collection as EXQD files");
  add_synthetic_options(generate, gen_spec);
  generate->add_option("-o,--out", gen_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(visual, text, out_dir);
    if (*build) return cmd_build_index(index_dir, index_seed);
    if (*serve) return cmd_serve(host, port, data_dir.empty() ? exq::default_data_dir() : fs::path(data_dir));
    if (*bench) return cmd_bench(bench_opts);
    if (*generate) {
      fs::create_directories(gen_dir);
      exq::write_synthetic_files(exq::SyntheticCollection(gen_spec), gen_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "exq: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
